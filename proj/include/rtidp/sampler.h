#ifndef RTIDP_SAMPLER_H_
#define RTIDP_SAMPLER_H_

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "rtidp/envs.h"
#include "rtidp/net.h"
#include "rtidp/policy.h"
#include "rtidp/schedule.h"

namespace rtidp {

// A_k = sqrt(abar_k) A_0 + sqrt(1 - abar_k) eps; k = 0 returns A_0.
Chunk ForwardNoise(const Chunk& clean, int k, const Chunk& eps,
                   const NoiseSchedule& schedule);

// A_{k-1} = (A_k - beta_k / sqrt(1 - abar_k) * eps_hat) / sqrt(alpha_k)
//           + sigma_k * noise.
// `noise` may be null for a noise-free step. Throws NumericalError if the
// result is not finite.
Chunk ReverseStepFromEps(const Chunk& noisy, int k, const Chunk& eps_hat,
                         const NoiseSchedule& schedule, const Chunk* noise);
Chunk ReverseStep(const DenoiserModel& model, const Chunk& noisy, int k,
                  const Vec& cond, const NoiseSchedule& schedule,
                  const Chunk* noise);

Chunk GaussianChunk(int rows, int cols, std::mt19937_64& rng);

struct DenoiseOptions {
  // Skip sigma * Y on the last step of the list.
  bool deterministic_final = true;
  // Forward-noise the guess to the first listed step before denoising.
  bool renoise = false;
};

// [K, K-1, ..., 1].
std::vector<int> FullSteps(int total_steps);
// [n, n-1, ..., 1].
std::vector<int> LowestSteps(int n);
// Non-empty, strictly decreasing, within [1, K]; throws
// std::invalid_argument otherwise.
void ValidateSteps(std::span<const int> steps, int total_steps);

// Applies the reverse step at each listed k, starting from `guess` as the
// state entering the first listed step. With renoise the guess is first
// mapped through ForwardNoise with a fresh draw from `rng`.
Chunk TruncatedDenoise(const DenoiserModel& model, const Vec& cond,
                       const Chunk& guess, std::span<const int> steps,
                       const NoiseSchedule& schedule, std::mt19937_64& rng,
                       const DenoiseOptions& options = {});

// Draws G ~ N(0, I) from `rng` and runs every step K..1.
Chunk FullDenoise(const DenoiserModel& model, const Vec& cond,
                  const NoiseSchedule& schedule, std::mt19937_64& rng,
                  const DenoiseOptions& options = {});

// [a_1, ..., a_{T-1}, a_{T-1}]: drop the first action, repeat the last.
Chunk ShiftGuess(const Chunk& chunk);

// Divides the masked columns by `factor`. Throws std::invalid_argument if
// factor <= 0.
Chunk ScaleDiscreteGuess(const Chunk& guess, double factor,
                         const std::vector<bool>& discrete_mask);

struct SamplerConfig {
  std::vector<int> rti_steps = {3, 2, 1};
  bool deterministic_final = true;
  bool renoise = false;
  // Divide discrete dimensions of every warm-start guess by this factor
  // (clip variant); 1 disables it.
  double discrete_guess_factor = 1.0;
};

uint64_t HashSamplerConfig(const SamplerConfig& config);

// Sliding window of normalised observations fed to the model.
class ObsHistory {
 public:
  ObsHistory(const Normalizer& normalizer, int length, const Vec& first);
  void Push(const Vec& raw);
  Vec Cond() const;

 private:
  const Normalizer* normalizer_;
  std::vector<Vec> frames_;
};

struct EpisodeResult {
  int episode_id = 0;
  double score = 0.0;
  int n_predictions = 0;
  int env_steps = 0;
  // Wall-clock of every prediction in microseconds; entry 0 is the
  // initial full denoise.
  std::vector<double> latencies_us;
  std::vector<int> modes;  // behaviour mode of each prediction
  int mode_switches = 0;
  uint64_t config_hash = 0;
};

struct LatencyStats {
  double mean = 0.0, median = 0.0, p95 = 0.0;
};
// Statistics over `samples`; zeros when empty.
LatencyStats ComputeLatencyStats(std::vector<double> samples);
// Per-prediction statistics excluding the first (warm-up) prediction.
LatencyStats SteadyLatency(const EpisodeResult& r);

// Mode changes between consecutive predictions with non-zero modes.
int CountModeSwitches(std::span<const int> modes);

// Closed loop with warm starts: full denoise at t = 0, then at every step
// shift the previous chunk, optionally scale its discrete part, refine it
// with config.rti_steps and execute only the first action. A step list
// that begins at K restarts from N(0, I) instead of the shifted guess.
// The environment must already be reset. episode_cap <= 0 uses the
// environment's cap.
EpisodeResult RtiRollout(Env& env, const Policy& policy,
                         const SamplerConfig& config, int episode_cap,
                         uint64_t seed);

// Receding-horizon baseline: full denoise, execute the first `executed`
// actions open loop, then predict again.
EpisodeResult DpRollout(Env& env, const Policy& policy, int executed,
                        int episode_cap, uint64_t seed,
                        bool deterministic_final = true);

// CSV: episode_id,score,n_predictions,latency_us_mean,latency_us_median,
// latency_us_p95,mode_switches,config_hash
std::string EpisodeCsvHeader();
std::string EpisodeCsvRow(const EpisodeResult& r);

}  // namespace rtidp

#endif  // RTIDP_SAMPLER_H_

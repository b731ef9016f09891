#include "rtidp/sampler.h"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <stdexcept>

namespace rtidp {
namespace {

using Clock = std::chrono::steady_clock;

double MicrosSince(Clock::time_point start) {
  return std::chrono::duration<double, std::micro>(Clock::now() - start)
      .count();
}

void CheckStep(int k, int lo, const NoiseSchedule& s) {
  if (k < lo || k > s.total_steps()) {
    throw std::invalid_argument("step index " + std::to_string(k) +
                                " outside [" + std::to_string(lo) + ", " +
                                std::to_string(s.total_steps()) + "]");
  }
}

}  // namespace

Chunk ForwardNoise(const Chunk& clean, int k, const Chunk& eps,
                   const NoiseSchedule& schedule) {
  CheckStep(k, 0, schedule);
  if (eps.rows() != clean.rows() || eps.cols() != clean.cols()) {
    throw std::invalid_argument("noise shape does not match the chunk");
  }
  if (!eps.allFinite()) throw std::invalid_argument("non-finite noise");
  if (k == 0) return clean;
  const double ab = schedule.alpha_bar(k);
  return std::sqrt(ab) * clean + std::sqrt(1.0 - ab) * eps;
}

Chunk ReverseStepFromEps(const Chunk& noisy, int k, const Chunk& eps_hat,
                         const NoiseSchedule& schedule, const Chunk* noise) {
  CheckStep(k, 1, schedule);
  const double coef = schedule.beta(k) / std::sqrt(1.0 - schedule.alpha_bar(k));
  Chunk out = (noisy - coef * eps_hat) / std::sqrt(schedule.alpha(k));
  if (noise != nullptr) out += schedule.sigma(k) * *noise;
  if (!out.allFinite()) {
    throw NumericalError("non-finite value in reverse step k=" +
                         std::to_string(k));
  }
  return out;
}

Chunk ReverseStep(const DenoiserModel& model, const Chunk& noisy, int k,
                  const Vec& cond, const NoiseSchedule& schedule,
                  const Chunk* noise) {
  return ReverseStepFromEps(noisy, k, model.Forward(noisy, k, cond), schedule,
                            noise);
}

Chunk GaussianChunk(int rows, int cols, std::mt19937_64& rng) {
  std::normal_distribution<double> normal;
  Chunk g(rows, cols);
  for (Eigen::Index i = 0; i < g.size(); ++i) g.data()[i] = normal(rng);
  return g;
}

std::vector<int> FullSteps(int total_steps) { return LowestSteps(total_steps); }

std::vector<int> LowestSteps(int n) {
  std::vector<int> steps;
  for (int k = n; k >= 1; --k) steps.push_back(k);
  return steps;
}

void ValidateSteps(std::span<const int> steps, int total_steps) {
  if (steps.empty()) throw std::invalid_argument("empty denoising step list");
  for (size_t i = 0; i < steps.size(); ++i) {
    if (steps[i] < 1 || steps[i] > total_steps) {
      throw std::invalid_argument("denoising step " + std::to_string(steps[i]) +
                                  " outside [1, " +
                                  std::to_string(total_steps) + "]");
    }
    if (i > 0 && steps[i] >= steps[i - 1]) {
      throw std::invalid_argument("denoising steps must strictly decrease");
    }
  }
}

Chunk TruncatedDenoise(const DenoiserModel& model, const Vec& cond,
                       const Chunk& guess, std::span<const int> steps,
                       const NoiseSchedule& schedule, std::mt19937_64& rng,
                       const DenoiseOptions& options) {
  ValidateSteps(steps, schedule.total_steps());
  if (!guess.allFinite()) throw std::invalid_argument("non-finite guess");
  const int rows = static_cast<int>(guess.rows());
  const int cols = static_cast<int>(guess.cols());
  Chunk a = guess;
  if (options.renoise) {
    a = ForwardNoise(guess, steps.front(), GaussianChunk(rows, cols, rng),
                     schedule);
  }
  for (size_t i = 0; i < steps.size(); ++i) {
    const int k = steps[i];
    const bool last = i + 1 == steps.size();
    if (schedule.sigma(k) > 0.0 && !(last && options.deterministic_final)) {
      const Chunk y = GaussianChunk(rows, cols, rng);
      a = ReverseStep(model, a, k, cond, schedule, &y);
    } else {
      a = ReverseStep(model, a, k, cond, schedule, nullptr);
    }
  }
  return a;
}

Chunk FullDenoise(const DenoiserModel& model, const Vec& cond,
                  const NoiseSchedule& schedule, std::mt19937_64& rng,
                  const DenoiseOptions& options) {
  const ModelConfig& c = model.config();
  const Chunk g = GaussianChunk(c.horizon, c.action_dim, rng);
  DenoiseOptions opts = options;
  opts.renoise = false;
  return TruncatedDenoise(model, cond, g, FullSteps(schedule.total_steps()),
                          schedule, rng, opts);
}

Chunk ShiftGuess(const Chunk& chunk) {
  const Eigen::Index rows = chunk.rows();
  if (rows < 1) throw std::invalid_argument("empty chunk");
  Chunk out(rows, chunk.cols());
  if (rows > 1) out.topRows(rows - 1) = chunk.bottomRows(rows - 1);
  out.row(rows - 1) = chunk.row(rows - 1);
  return out;
}

Chunk ScaleDiscreteGuess(const Chunk& guess, double factor,
                         const std::vector<bool>& discrete_mask) {
  if (!(factor > 0.0)) {
    throw std::invalid_argument("guess scaling factor must be > 0");
  }
  Chunk out = guess;
  for (Eigen::Index d = 0; d < out.cols(); ++d) {
    if (d < static_cast<Eigen::Index>(discrete_mask.size()) &&
        discrete_mask[d]) {
      out.col(d) /= factor;
    }
  }
  return out;
}

uint64_t HashSamplerConfig(const SamplerConfig& config) {
  std::ostringstream s;
  s << "steps=";
  for (int k : config.rti_steps) s << k << ',';
  s << ";df=" << config.deterministic_final << ";rn=" << config.renoise
    << ";dg=" << config.discrete_guess_factor;
  return Fnv1a64(s.str());
}

ObsHistory::ObsHistory(const Normalizer& normalizer, int length,
                       const Vec& first)
    : normalizer_(&normalizer) {
  if (length < 1) throw std::invalid_argument("history length must be >= 1");
  frames_.assign(length, normalizer.NormalizeObs(first));
}

void ObsHistory::Push(const Vec& raw) {
  std::rotate(frames_.begin(), frames_.begin() + 1, frames_.end());
  frames_.back() = normalizer_->NormalizeObs(raw);
}

Vec ObsHistory::Cond() const {
  const Eigen::Index dim = frames_.front().size();
  Vec c(dim * static_cast<Eigen::Index>(frames_.size()));
  for (size_t i = 0; i < frames_.size(); ++i) c.segment(i * dim, dim) = frames_[i];
  return c;
}

LatencyStats ComputeLatencyStats(std::vector<double> samples) {
  LatencyStats s;
  if (samples.empty()) return s;
  std::sort(samples.begin(), samples.end());
  double sum = 0.0;
  for (double v : samples) sum += v;
  s.mean = sum / static_cast<double>(samples.size());
  const size_t n = samples.size();
  s.median = n % 2 ? samples[n / 2]
                   : 0.5 * (samples[n / 2 - 1] + samples[n / 2]);
  const size_t idx = static_cast<size_t>(
      std::ceil(0.95 * static_cast<double>(n))) - 1;
  s.p95 = samples[std::min(idx, n - 1)];
  return s;
}

LatencyStats SteadyLatency(const EpisodeResult& r) {
  if (r.latencies_us.size() <= 1) return {};
  return ComputeLatencyStats(
      std::vector<double>(r.latencies_us.begin() + 1, r.latencies_us.end()));
}

int CountModeSwitches(std::span<const int> modes) {
  int switches = 0;
  int last = 0;
  for (int m : modes) {
    if (m == 0) continue;
    if (last != 0 && m != last) ++switches;
    last = m;
  }
  return switches;
}

namespace {

void CheckPolicyMatchesEnv(const Env& env, const Policy& policy) {
  const ModelConfig& c = policy.model.config();
  if (c.action_dim != env.spec().action_dim ||
      c.obs_dim != env.spec().obs_dim) {
    throw std::invalid_argument("policy for " + policy.env_name +
                                " does not match environment " +
                                env.spec().name);
  }
}

}  // namespace

EpisodeResult RtiRollout(Env& env, const Policy& policy,
                         const SamplerConfig& config, int episode_cap,
                         uint64_t seed) {
  CheckPolicyMatchesEnv(env, policy);
  const DenoiserModel& model = policy.model;
  const NoiseSchedule& schedule = policy.schedule;
  const ModelConfig& c = model.config();
  ValidateSteps(config.rti_steps, schedule.total_steps());
  const int cap = episode_cap > 0 ? episode_cap : env.spec().episode_cap;
  const bool restart = config.rti_steps.front() == schedule.total_steps();
  const bool scale_guess = config.discrete_guess_factor != 1.0;
  const DenoiseOptions opts{config.deterministic_final, config.renoise};

  std::mt19937_64 rng(seed);
  ObsHistory history(policy.normalizer, c.obs_history, env.Observe());
  EpisodeResult result;
  result.config_hash = HashSamplerConfig(config);

  Chunk chunk;
  for (int t = 0; t < cap; ++t) {
    const auto start = Clock::now();
    const Vec cond = history.Cond();
    if (t == 0) {
      chunk = FullDenoise(model, cond, schedule, rng, opts);
    } else if (restart) {
      const Chunk g = GaussianChunk(c.horizon, c.action_dim, rng);
      chunk = TruncatedDenoise(model, cond, g, config.rti_steps, schedule, rng,
                               {config.deterministic_final, false});
    } else {
      Chunk guess = ShiftGuess(chunk);
      if (scale_guess) {
        guess = ScaleDiscreteGuess(guess, config.discrete_guess_factor,
                                   policy.normalizer.discrete_mask);
      }
      chunk = TruncatedDenoise(model, cond, guess, config.rti_steps, schedule,
                               rng, opts);
    }
    result.latencies_us.push_back(MicrosSince(start));
    ++result.n_predictions;
    const Chunk world = policy.normalizer.ToEnvChunk(chunk);
    result.modes.push_back(env.ModeOf(world));
    history.Push(env.Step(world.row(0).transpose()));
    ++result.env_steps;
  }
  result.score = env.Score();
  result.mode_switches = CountModeSwitches(result.modes);
  return result;
}

EpisodeResult DpRollout(Env& env, const Policy& policy, int executed,
                        int episode_cap, uint64_t seed,
                        bool deterministic_final) {
  CheckPolicyMatchesEnv(env, policy);
  const ModelConfig& c = policy.model.config();
  if (executed < 1 || executed > c.horizon) {
    throw std::invalid_argument("executed prefix must lie in [1, T]");
  }
  const int cap = episode_cap > 0 ? episode_cap : env.spec().episode_cap;
  std::mt19937_64 rng(seed);
  ObsHistory history(policy.normalizer, c.obs_history, env.Observe());
  EpisodeResult result;
  SamplerConfig as_config;
  as_config.rti_steps = FullSteps(policy.schedule.total_steps());
  as_config.deterministic_final = deterministic_final;
  result.config_hash =
      HashSamplerConfig(as_config) ^ static_cast<uint64_t>(executed);
  int t = 0;
  while (t < cap) {
    const auto start = Clock::now();
    const Chunk chunk = FullDenoise(policy.model, history.Cond(),
                                    policy.schedule, rng,
                                    {deterministic_final, false});
    result.latencies_us.push_back(MicrosSince(start));
    ++result.n_predictions;
    const Chunk world = policy.normalizer.ToEnvChunk(chunk);
    result.modes.push_back(env.ModeOf(world));
    for (int i = 0; i < executed && t < cap; ++i, ++t) {
      history.Push(env.Step(world.row(i).transpose()));
      ++result.env_steps;
    }
  }
  result.score = env.Score();
  result.mode_switches = CountModeSwitches(result.modes);
  return result;
}

std::string EpisodeCsvHeader() {
  return "episode_id,score,n_predictions,latency_us_mean,latency_us_median,"
         "latency_us_p95,mode_switches,config_hash\n";
}

std::string EpisodeCsvRow(const EpisodeResult& r) {
  const LatencyStats s = SteadyLatency(r);
  char buf[256];
  std::snprintf(buf, sizeof(buf), "%d,%.17g,%d,%.3f,%.3f,%.3f,%d,%016llx\n",
                r.episode_id, r.score, r.n_predictions, s.mean, s.median, s.p95,
                r.mode_switches,
                static_cast<unsigned long long>(r.config_hash));
  return buf;
}

}  // namespace rtidp

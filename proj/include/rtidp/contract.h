#ifndef RTIDP_CONTRACT_H_
#define RTIDP_CONTRACT_H_

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "rtidp/dataset.h"
#include "rtidp/net.h"
#include "rtidp/policy.h"
#include "rtidp/schedule.h"

namespace rtidp {

struct LipschitzOptions {
  int n_pairs = 500;
  // Norm of every perturbation u.
  double perturbation_scale = 1e-3;
  // Refinements of u towards the top singular direction of the input
  // Jacobian; 0 keeps purely random directions.
  int power_iterations = 3;
  uint64_t seed = 0;
};

// Sampled lower bound on the Lipschitz constant of eps_theta in A: the
// largest secant ratio ||f(A + u) - f(A)|| / ||u|| seen.
struct LipschitzEstimate {
  double L = 0.0;
  // Maximum ratio per step index; entry 0 unused, 0 for unsampled k.
  std::vector<double> per_k;
  int n_pairs = 0;     // pairs requested
  int n_skipped = 0;   // pairs skipped for a zero perturbation
};

// Each pair draws a sample, k ~ U{1..K} and eps, forms A_k by forward
// noising the sample's chunk, then measures secant ratios. Pair i consumes
// the same random numbers regardless of n_pairs, so the estimate is
// nondecreasing in n_pairs. Throws std::invalid_argument on empty samples,
// n_pairs < 1 or a negative scale.
LipschitzEstimate EstimateLipschitz(const DenoiserModel& model,
                                    const NoiseSchedule& schedule,
                                    std::span<const TrainPair> samples,
                                    const LipschitzOptions& options);

// (sqrt((1 - abar_k) alpha_k) + sqrt(abar_k) beta_k L)
//   / sqrt((1 - abar_k) alpha_k).
// Throws std::invalid_argument for k outside [1, K] or L < 0.
double ComputeCk(const NoiseSchedule& schedule, double L, int k);
// Product of c_k over k = 1..kprime; throws for kprime outside [1, K].
double ComputeC(const NoiseSchedule& schedule, double L, int kprime);

// Noise consumed by one reverse chain: the initial state and one draw per
// step (y[k] for k = 1..K, y[0] unused).
struct ChainNoise {
  Chunk initial;
  std::vector<Chunk> y;
};
ChainNoise DrawChainNoise(int rows, int cols, int total_steps,
                          std::mt19937_64& rng);

// Runs steps K..1 from noise.initial. Returns states[k] = A_k for
// k = 0..K. Step k adds sigma_k * y[k] unless sigma_k = 0 or it is the
// final step and deterministic_final is set.
std::vector<Chunk> ReverseChain(const DenoiserModel& model, const Vec& cond,
                                const NoiseSchedule& schedule,
                                const ChainNoise& noise,
                                bool deterministic_final);

// Restarts the chain at reference[kprime] + delta with the same draws.
// Returns errors[k] = ||A~_k - A_k|| for k = 0..kprime.
std::vector<double> PerturbedChainErrors(const DenoiserModel& model,
                                         const Vec& cond,
                                         const NoiseSchedule& schedule,
                                         const ChainNoise& noise,
                                         std::span<const Chunk> reference,
                                         int kprime, const Chunk& delta,
                                         bool deterministic_final);

struct ContractionOptions {
  std::vector<int> kprimes = {1, 2, 3, 5, 10};
  std::vector<double> delta_norms = {0.01, 0.05, 0.1};
  int n_trials = 50;
  bool deterministic_final = true;
  uint64_t seed = 0;
};

struct DecayRow {
  int kprime = 0;
  double delta_norm = 0.0;
  double median_error = 0.0;  // ||A~_0 - A_0||
  double max_error = 0.0;
  double median_ratio = 0.0;  // error / ||delta||; 0 when delta = 0
  double max_ratio = 0.0;
  int n_trials = 0;
};

// Each trial picks a conditioning from `conds`, draws one ChainNoise and
// a random direction, and reuses both for every (kprime, delta) cell.
// Throws std::invalid_argument on empty inputs, n_trials < 1, negative
// norms or kprime outside [1, K].
std::vector<DecayRow> EmpiricalContraction(const DenoiserModel& model,
                                           const NoiseSchedule& schedule,
                                           std::span<const Vec> conds,
                                           const ContractionOptions& options);

struct KprimeOptions {
  std::vector<int> candidates = {1, 2, 3, 5, 10};
  // Candidates whose mean deviation is within (1 + tolerance) of the
  // minimum are acceptable; the largest acceptable one is chosen.
  double tolerance = 0.0;
  int n_transitions = 100;
  uint64_t seed = 0;
};

struct KprimeEstimate {
  int chosen = 0;
  std::vector<int> candidates;
  std::vector<double> mean_deviation;  // per candidate
  int n_transitions = 0;
};

// Mean over pairs of ||guess - sqrt(abar_k) target|| per candidate k.
// Throws std::invalid_argument on empty candidates or inputs, size
// mismatch or candidates outside [1, K].
KprimeEstimate KprimeFromGuesses(const NoiseSchedule& schedule,
                                 std::span<const Chunk> guesses,
                                 std::span<const Chunk> targets,
                                 const KprimeOptions& options);

// Samples transitions (t - 1, t) from the demonstrations. The guess is the
// shifted full-denoise prediction at t - 1, the target the full-denoise
// prediction at t, both conditioned on the recorded observations
// normalised with the policy's statistics.
KprimeEstimate EstimateKprime(const Policy& policy, const Dataset& data,
                              const KprimeOptions& options);

struct ContractOptions {
  LipschitzOptions lipschitz;
  ContractionOptions contraction;
  KprimeOptions kprime;
  // Conditionings used for the contraction trials.
  int n_conditions = 50;
};

struct ContractivityReport {
  LipschitzEstimate lipschitz;
  std::vector<double> c_k;           // k = 1..K at index k, entry 0 unused
  std::vector<double> C_of_kprime;   // same indexing
  std::vector<DecayRow> empirical_decay;
  KprimeEstimate kprime;
};

ContractivityReport BuildContractivityReport(const Policy& policy,
                                             const Dataset& data,
                                             const ContractOptions& options);

// k,c_k,C_of_kprime
std::string ConstantsCsv(const ContractivityReport& report);
// k,max_ratio
std::string LipschitzCsv(const LipschitzEstimate& estimate);
// kprime,delta_norm,median_error,max_error,median_ratio,max_ratio,
// analytic_C,n_trials
std::string DecayCsv(const ContractivityReport& report);
// k,alpha_bar,mean_deviation,chosen
std::string KprimeCsv(const NoiseSchedule& schedule,
                      const KprimeEstimate& estimate);
std::string ReportSummary(const ContractivityReport& report);

}  // namespace rtidp

#endif  // RTIDP_CONTRACT_H_

#include "rtidp/contract.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <stdexcept>

#include "rtidp/sampler.h"

namespace rtidp {
namespace {

void CheckK(const NoiseSchedule& s, int k, const char* what) {
  if (k < 1 || k > s.total_steps()) {
    throw std::invalid_argument(std::string(what) + " " + std::to_string(k) +
                                " outside [1, " +
                                std::to_string(s.total_steps()) + "]");
  }
}

double Median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

double SecantRatio(const DenoiserModel& model, const Chunk& a, int k,
                   const Vec& cond, const Chunk& base, const Chunk& u) {
  const double norm = u.norm();
  return (model.Forward(a + u, k, cond) - base).norm() / norm;
}

bool AddsNoise(const NoiseSchedule& s, int k, bool last,
               bool deterministic_final) {
  return s.sigma(k) > 0.0 && !(last && deterministic_final);
}

std::string Fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

}  // namespace

LipschitzEstimate EstimateLipschitz(const DenoiserModel& model,
                                    const NoiseSchedule& schedule,
                                    std::span<const TrainPair> samples,
                                    const LipschitzOptions& options) {
  if (samples.empty()) throw std::invalid_argument("no samples");
  if (options.n_pairs < 1) throw std::invalid_argument("n_pairs must be >= 1");
  if (options.perturbation_scale < 0.0 || options.power_iterations < 0) {
    throw std::invalid_argument("invalid Lipschitz estimation options");
  }
  const ModelConfig& c = model.config();
  const int total = schedule.total_steps();
  LipschitzEstimate est;
  est.per_k.assign(total + 1, 0.0);
  est.n_pairs = options.n_pairs;
  std::mt19937_64 rng(options.seed);
  std::uniform_int_distribution<size_t> pick(0, samples.size() - 1);
  std::uniform_int_distribution<int> pick_k(1, total);
  for (int i = 0; i < options.n_pairs; ++i) {
    const TrainPair& s = samples[pick(rng)];
    const int k = pick_k(rng);
    const Chunk eps = GaussianChunk(c.horizon, c.action_dim, rng);
    Chunk dir = GaussianChunk(c.horizon, c.action_dim, rng);
    const double dir_norm = dir.norm();
    if (options.perturbation_scale == 0.0 || dir_norm == 0.0) {
      ++est.n_skipped;
      continue;
    }
    const Chunk a = ForwardNoise(s.actions, k, eps, schedule);
    const Chunk base = model.Forward(a, k, s.cond);
    const double h = options.perturbation_scale;
    dir /= dir_norm;
    double best = SecantRatio(model, a, k, s.cond, base, h * dir);
    for (int it = 0; it < options.power_iterations; ++it) {
      const Chunk jv = (model.Forward(a + h * dir, k, s.cond) - base) / h;
      Chunk next = model.InputVjp(a, k, s.cond, jv);
      const double n = next.norm();
      if (!(n > 0.0) || !std::isfinite(n)) break;
      dir = next / n;
      best = std::max(best, SecantRatio(model, a, k, s.cond, base, h * dir));
    }
    est.per_k[k] = std::max(est.per_k[k], best);
    est.L = std::max(est.L, best);
  }
  return est;
}

double ComputeCk(const NoiseSchedule& schedule, double L, int k) {
  CheckK(schedule, k, "step index");
  if (!(L >= 0.0)) throw std::invalid_argument("L must be >= 0");
  const double ab = schedule.alpha_bar(k);
  const double denom = std::sqrt((1.0 - ab) * schedule.alpha(k));
  return (denom + std::sqrt(ab) * schedule.beta(k) * L) / denom;
}

double ComputeC(const NoiseSchedule& schedule, double L, int kprime) {
  CheckK(schedule, kprime, "K'");
  double c = 1.0;
  for (int k = 1; k <= kprime; ++k) c *= ComputeCk(schedule, L, k);
  return c;
}

ChainNoise DrawChainNoise(int rows, int cols, int total_steps,
                          std::mt19937_64& rng) {
  ChainNoise n;
  n.initial = GaussianChunk(rows, cols, rng);
  n.y.resize(total_steps + 1);
  for (int k = total_steps; k >= 1; --k) n.y[k] = GaussianChunk(rows, cols, rng);
  return n;
}

std::vector<Chunk> ReverseChain(const DenoiserModel& model, const Vec& cond,
                                const NoiseSchedule& schedule,
                                const ChainNoise& noise,
                                bool deterministic_final) {
  const int total = schedule.total_steps();
  if (static_cast<int>(noise.y.size()) != total + 1) {
    throw std::invalid_argument("chain noise does not match the schedule");
  }
  std::vector<Chunk> states(total + 1);
  states[total] = noise.initial;
  for (int k = total; k >= 1; --k) {
    const bool noisy = AddsNoise(schedule, k, k == 1, deterministic_final);
    states[k - 1] = ReverseStep(model, states[k], k, cond, schedule,
                                noisy ? &noise.y[k] : nullptr);
  }
  return states;
}

std::vector<double> PerturbedChainErrors(const DenoiserModel& model,
                                         const Vec& cond,
                                         const NoiseSchedule& schedule,
                                         const ChainNoise& noise,
                                         std::span<const Chunk> reference,
                                         int kprime, const Chunk& delta,
                                         bool deterministic_final) {
  CheckK(schedule, kprime, "K'");
  if (static_cast<int>(reference.size()) != schedule.total_steps() + 1) {
    throw std::invalid_argument("reference chain does not match the schedule");
  }
  std::vector<double> errors(kprime + 1);
  Chunk a = reference[kprime] + delta;
  errors[kprime] = (a - reference[kprime]).norm();
  for (int k = kprime; k >= 1; --k) {
    const bool noisy = AddsNoise(schedule, k, k == 1, deterministic_final);
    a = ReverseStep(model, a, k, cond, schedule,
                    noisy ? &noise.y[k] : nullptr);
    errors[k - 1] = (a - reference[k - 1]).norm();
  }
  return errors;
}

std::vector<DecayRow> EmpiricalContraction(const DenoiserModel& model,
                                           const NoiseSchedule& schedule,
                                           std::span<const Vec> conds,
                                           const ContractionOptions& options) {
  if (conds.empty()) throw std::invalid_argument("no conditionings");
  if (options.kprimes.empty() || options.delta_norms.empty()) {
    throw std::invalid_argument("empty K' or delta list");
  }
  if (options.n_trials < 1) throw std::invalid_argument("n_trials must be >= 1");
  for (int kp : options.kprimes) CheckK(schedule, kp, "K'");
  for (double d : options.delta_norms) {
    if (!(d >= 0.0)) throw std::invalid_argument("delta norms must be >= 0");
  }
  const ModelConfig& c = model.config();
  const size_t n_cells = options.kprimes.size() * options.delta_norms.size();
  std::vector<std::vector<double>> errors(n_cells), ratios(n_cells);
  std::mt19937_64 rng(options.seed);
  std::uniform_int_distribution<size_t> pick(0, conds.size() - 1);
  for (int trial = 0; trial < options.n_trials; ++trial) {
    const Vec& cond = conds[pick(rng)];
    const ChainNoise noise =
        DrawChainNoise(c.horizon, c.action_dim, schedule.total_steps(), rng);
    Chunk dir = GaussianChunk(c.horizon, c.action_dim, rng);
    dir /= dir.norm();
    const std::vector<Chunk> ref =
        ReverseChain(model, cond, schedule, noise, options.deterministic_final);
    size_t cell = 0;
    for (int kp : options.kprimes) {
      for (double d : options.delta_norms) {
        const std::vector<double> e = PerturbedChainErrors(
            model, cond, schedule, noise, ref, kp, d * dir,
            options.deterministic_final);
        errors[cell].push_back(e[0]);
        ratios[cell].push_back(d > 0.0 ? e[0] / d : 0.0);
        ++cell;
      }
    }
  }
  std::vector<DecayRow> rows;
  size_t cell = 0;
  for (int kp : options.kprimes) {
    for (double d : options.delta_norms) {
      DecayRow r;
      r.kprime = kp;
      r.delta_norm = d;
      r.n_trials = options.n_trials;
      r.median_error = Median(errors[cell]);
      r.max_error = *std::max_element(errors[cell].begin(), errors[cell].end());
      r.median_ratio = Median(ratios[cell]);
      r.max_ratio = *std::max_element(ratios[cell].begin(), ratios[cell].end());
      rows.push_back(r);
      ++cell;
    }
  }
  return rows;
}

KprimeEstimate KprimeFromGuesses(const NoiseSchedule& schedule,
                                 std::span<const Chunk> guesses,
                                 std::span<const Chunk> targets,
                                 const KprimeOptions& options) {
  if (options.candidates.empty()) {
    throw std::invalid_argument("empty K' candidate list");
  }
  if (guesses.empty() || guesses.size() != targets.size()) {
    throw std::invalid_argument("guesses and targets must be non-empty and "
                                "of equal count");
  }
  if (!(options.tolerance >= 0.0)) {
    throw std::invalid_argument("tolerance must be >= 0");
  }
  for (int k : options.candidates) CheckK(schedule, k, "K' candidate");
  KprimeEstimate est;
  est.candidates = options.candidates;
  est.n_transitions = static_cast<int>(guesses.size());
  for (int k : options.candidates) {
    const double root = std::sqrt(schedule.alpha_bar(k));
    double sum = 0.0;
    for (size_t i = 0; i < guesses.size(); ++i) {
      sum += (guesses[i] - root * targets[i]).norm();
    }
    est.mean_deviation.push_back(sum / static_cast<double>(guesses.size()));
  }
  const double best = *std::min_element(est.mean_deviation.begin(),
                                        est.mean_deviation.end());
  const double limit = best * (1.0 + options.tolerance);
  for (size_t i = 0; i < est.candidates.size(); ++i) {
    if (est.mean_deviation[i] <= limit &&
        (est.chosen == 0 || est.candidates[i] > est.chosen)) {
      est.chosen = est.candidates[i];
    }
  }
  return est;
}

namespace {

// Training pairs of `data` in the policy's normalised units.
std::vector<TrainPair> PolicyPairs(const Policy& policy, const Dataset& data) {
  if (data.action_dim != policy.model.config().action_dim ||
      data.obs_dim != policy.model.config().obs_dim) {
    throw std::invalid_argument("dataset for " + data.env_name +
                                " does not match policy for " +
                                policy.env_name);
  }
  Dataset local = data;
  local.normalizer = policy.normalizer;
  return MakeTrainPairs(local);
}

}  // namespace

KprimeEstimate EstimateKprime(const Policy& policy, const Dataset& data,
                              const KprimeOptions& options) {
  if (options.n_transitions < 1) {
    throw std::invalid_argument("n_transitions must be >= 1");
  }
  const std::vector<TrainPair> pairs = PolicyPairs(policy, data);
  // Indices whose predecessor belongs to the same episode.
  std::vector<size_t> eligible;
  size_t offset = 0;
  for (const Episode& e : data.episodes) {
    for (int t = 1; t < e.size(); ++t) eligible.push_back(offset + t);
    offset += e.size();
  }
  if (eligible.empty()) throw std::invalid_argument("no transitions in data");
  std::mt19937_64 rng(options.seed);
  std::uniform_int_distribution<size_t> pick(0, eligible.size() - 1);
  std::vector<Chunk> guesses, targets;
  for (int i = 0; i < options.n_transitions; ++i) {
    const size_t idx = eligible[pick(rng)];
    const Chunk prev =
        FullDenoise(policy.model, pairs[idx - 1].cond, policy.schedule, rng);
    targets.push_back(
        FullDenoise(policy.model, pairs[idx].cond, policy.schedule, rng));
    guesses.push_back(ShiftGuess(prev));
  }
  return KprimeFromGuesses(policy.schedule, guesses, targets, options);
}

ContractivityReport BuildContractivityReport(const Policy& policy,
                                             const Dataset& data,
                                             const ContractOptions& options) {
  if (options.n_conditions < 1) {
    throw std::invalid_argument("n_conditions must be >= 1");
  }
  const std::vector<TrainPair> pairs = PolicyPairs(policy, data);
  if (pairs.empty()) throw std::invalid_argument("dataset has no samples");
  ContractivityReport report;
  report.lipschitz = EstimateLipschitz(policy.model, policy.schedule, pairs,
                                       options.lipschitz);
  const int total = policy.schedule.total_steps();
  report.c_k.assign(total + 1, 0.0);
  report.C_of_kprime.assign(total + 1, 0.0);
  double running = 1.0;
  for (int k = 1; k <= total; ++k) {
    report.c_k[k] = ComputeCk(policy.schedule, report.lipschitz.L, k);
    running *= report.c_k[k];
    report.C_of_kprime[k] = running;
  }
  std::mt19937_64 rng(options.contraction.seed);
  std::uniform_int_distribution<size_t> pick(0, pairs.size() - 1);
  std::vector<Vec> conds;
  for (int i = 0; i < options.n_conditions; ++i) {
    conds.push_back(pairs[pick(rng)].cond);
  }
  report.empirical_decay = EmpiricalContraction(
      policy.model, policy.schedule, conds, options.contraction);
  report.kprime = EstimateKprime(policy, data, options.kprime);
  return report;
}

std::string ConstantsCsv(const ContractivityReport& report) {
  std::string out = "k,c_k,C_of_kprime\n";
  for (size_t k = 1; k < report.c_k.size(); ++k) {
    out += std::to_string(k) + "," + Fmt(report.c_k[k]) + "," +
           Fmt(report.C_of_kprime[k]) + "\n";
  }
  return out;
}

std::string LipschitzCsv(const LipschitzEstimate& estimate) {
  std::string out = "k,max_ratio\n";
  for (size_t k = 1; k < estimate.per_k.size(); ++k) {
    out += std::to_string(k) + "," + Fmt(estimate.per_k[k]) + "\n";
  }
  return out;
}

std::string DecayCsv(const ContractivityReport& report) {
  std::string out =
      "kprime,delta_norm,median_error,max_error,median_ratio,max_ratio,"
      "analytic_C,n_trials\n";
  for (const DecayRow& r : report.empirical_decay) {
    const double c = r.kprime < static_cast<int>(report.C_of_kprime.size())
                         ? report.C_of_kprime[r.kprime]
                         : 0.0;
    out += std::to_string(r.kprime) + "," + Fmt(r.delta_norm) + "," +
           Fmt(r.median_error) + "," + Fmt(r.max_error) + "," +
           Fmt(r.median_ratio) + "," + Fmt(r.max_ratio) + "," + Fmt(c) + "," +
           std::to_string(r.n_trials) + "\n";
  }
  return out;
}

std::string KprimeCsv(const NoiseSchedule& schedule,
                      const KprimeEstimate& estimate) {
  std::string out = "k,alpha_bar,mean_deviation,chosen\n";
  for (size_t i = 0; i < estimate.candidates.size(); ++i) {
    const int k = estimate.candidates[i];
    out += std::to_string(k) + "," + Fmt(schedule.alpha_bar(k)) + "," +
           Fmt(estimate.mean_deviation[i]) + "," +
           (k == estimate.chosen ? "1" : "0") + "\n";
  }
  return out;
}

std::string ReportSummary(const ContractivityReport& report) {
  std::ostringstream s;
  const LipschitzEstimate& l = report.lipschitz;
  s << "estimated L (sampled lower bound): " << Fmt(l.L) << " from "
    << l.n_pairs - l.n_skipped << " pairs (" << l.n_skipped << " skipped)\n";
  const size_t total = report.c_k.size() > 0 ? report.c_k.size() - 1 : 0;
  for (size_t k : {size_t{1}, size_t{3}, size_t{10}, total}) {
    if (k >= 1 && k <= total) {
      s << "c_" << k << " = " << Fmt(report.c_k[k]) << ", C(" << k
        << ") = " << Fmt(report.C_of_kprime[k]) << "\n";
    }
  }
  s << "empirical contraction (shared noise):\n";
  s << "  K'  |delta|     median ratio  max ratio     analytic C\n";
  for (const DecayRow& r : report.empirical_decay) {
    char line[160];
    std::snprintf(line, sizeof(line), "  %-3d %-10.4g %-13.5g %-13.5g %.5g\n",
                  r.kprime, r.delta_norm, r.median_ratio, r.max_ratio,
                  report.C_of_kprime[r.kprime]);
    s << line;
  }
  s << "K' deviation curve:";
  for (size_t i = 0; i < report.kprime.candidates.size(); ++i) {
    s << " " << report.kprime.candidates[i] << ":"
      << Fmt(report.kprime.mean_deviation[i]);
  }
  s << "\nchosen K' = " << report.kprime.chosen << "\n";
  return s.str();
}

}  // namespace rtidp

// Acceptance suite: one PASS/FAIL line per criterion. Checkpoints are
// trained on first use and cached under the checkpoint directory.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include <CLI11.hpp>

#include "rtidp/bench.h"
#include "rtidp/contract.h"
#include "rtidp/dataset.h"
#include "rtidp/policy.h"
#include "rtidp/sampler.h"
#include "rtidp/schedule.h"

namespace rtidp {
namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string Sci(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.2e", v);
  return buf;
}

std::string Fixed(double v, int digits = 3) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
  return buf;
}

class Suite {
 public:
  explicit Suite(std::string checkpoint_dir)
      : checkpoint_dir_(std::move(checkpoint_dir)) {}

  BenchConfig BaseBench(const std::string& env) const {
    BenchConfig c;
    c.env = env;
    c.checkpoint_dir = checkpoint_dir_;
    c.threads = 1;
    return c;
  }

  const Policy& Checkpoint(const std::string& env, uint64_t seed,
                           bool scaled = false) {
    const auto key = std::make_tuple(env, seed, scaled);
    auto it = policies_.find(key);
    if (it == policies_.end()) {
      Log("loading or training " + env + (scaled ? " (scaled)" : "") +
          " seed " + std::to_string(seed));
      it = policies_
               .emplace(key, LoadOrTrainCheckpoint(BaseBench(env), seed,
                                                   scaled, nullptr))
               .first;
    }
    return it->second;
  }

  const Dataset& TrainingData(const std::string& env) {
    auto it = data_.find(env);
    if (it == data_.end()) {
      const TrainRecipe r = BaseBench(env).recipe;
      it = data_.emplace(env, GenerateDemos(env, r.n_demos, r.data_seed,
                                            r.demos)).first;
    }
    return it->second;
  }

  // Timed bench over 3 seeds x 100 paired episodes, shared by the speed,
  // retention and discrete-action criteria.
  const BenchResult& MainBench(const std::string& env) {
    auto it = bench_.find(env);
    if (it == bench_.end()) {
      BenchConfig c = BaseBench(env);
      c.variants = {Variant::kDpChunked, Variant::kRti};
      if (env == "pick_discrete") c.variants.push_back(Variant::kRtiScale);
      for (uint64_t s : c.seeds) {
        Checkpoint(env, s);
        if (env == "pick_discrete") Checkpoint(env, s, true);
      }
      Log("bench " + env);
      it = bench_.emplace(env, RunBench(c)).first;
    }
    return it->second;
  }

  static const VariantSummary& Summary(const BenchResult& r, Variant v) {
    for (const VariantSummary& s : r.summary) {
      if (s.variant == v) return s;
    }
    throw std::logic_error("variant missing from bench");
  }

  static void Log(const std::string& msg) { std::cerr << "  .. " << msg << "\n"; }

 private:
  std::string checkpoint_dir_;
  std::map<std::tuple<std::string, uint64_t, bool>, Policy> policies_;
  std::map<std::string, Dataset> data_;
  std::map<std::string, BenchResult> bench_;
};

Outcome ReductionIdentity(Suite& suite) {
  const Policy& p = suite.Checkpoint("reach2d_bimodal", 0);
  const Dataset& data = suite.TrainingData("reach2d_bimodal");
  const std::vector<TrainPair> pairs = MakeTrainPairs(data);
  const std::vector<int> full = FullSteps(p.schedule.total_steps());
  const ModelConfig& c = p.model.config();
  int compared = 0;
  bool same = true;
  for (int i = 0; i < 20; ++i) {
    const Vec& cond = pairs[static_cast<size_t>(i) * 97 % pairs.size()].cond;
    for (bool det : {true, false}) {
      std::mt19937_64 r1(i), r2(i);
      const Chunk a = FullDenoise(p.model, cond, p.schedule, r1, {det, false});
      const Chunk g = GaussianChunk(c.horizon, c.action_dim, r2);
      const Chunk b =
          TruncatedDenoise(p.model, cond, g, full, p.schedule, r2, {det, false});
      same = same && (a.array() == b.array()).all();
      ++compared;
    }
  }
  // Closed loop: RTI with the full list against per-step full denoising.
  SamplerConfig sc;
  sc.rti_steps = full;
  for (int i = 0; i < 3; ++i) {
    auto e1 = MakeEnv("reach2d_bimodal", 1000 + i);
    auto e2 = MakeEnv("reach2d_bimodal", 1000 + i);
    const EpisodeResult rti = RtiRollout(*e1, p, sc, 0, i);
    const EpisodeResult dp = DpRollout(*e2, p, 1, 0, i);
    same = same && rti.score == dp.score && rti.modes == dp.modes &&
           (e1->Observe().array() == e2->Observe().array()).all();
  }
  return {same, std::to_string(compared) +
                    " denoises and 3 closed-loop episodes bitwise identical"};
}

Outcome SpeedScaling(Suite& suite) {
  bool pass = true;
  std::string detail;
  for (const std::string& env : EnvNames()) {
    const BenchResult& r = suite.MainBench(env);
    const double rti = Suite::Summary(r, Variant::kRti).latency_us_median;
    const double ratio = rti / r.full_latency_us;
    pass = pass && ratio >= 0.03 * 0.75 && ratio <= 0.03 * 1.25;
    detail += env + " " + Fixed(rti, 1) + "/" + Fixed(r.full_latency_us, 1) +
              " us = " + Fixed(ratio, 4) + "; ";
  }
  return {pass, detail + "window [0.0225, 0.0375]"};
}

Outcome PerformanceRetention(Suite& suite) {
  bool pass = true;
  std::string detail;
  for (const std::string env : {"reach2d_bimodal", "pushL"}) {
    const BenchResult& r = suite.MainBench(env);
    const double rti = Suite::Summary(r, Variant::kRti).avg_score;
    const double dp = Suite::Summary(r, Variant::kDpChunked).avg_score;
    pass = pass && std::abs(rti - dp) <= 0.05;
    detail += env + " rti " + Fixed(rti) + " vs dp " + Fixed(dp) + "; ";
  }
  return {pass, detail + "3 seeds x 100 episodes, tolerance 0.05"};
}

Outcome DiscreteActions(Suite& suite) {
  const BenchResult& r = suite.MainBench("pick_discrete");
  const double rti = Suite::Summary(r, Variant::kRti).avg_score;
  const double scale = Suite::Summary(r, Variant::kRtiScale).avg_score;
  const double dp = Suite::Summary(r, Variant::kDpChunked).avg_score;
  const bool pass = scale - rti >= 0.10 && std::abs(scale - dp) <= 0.05;
  return {pass, "rti " + Fixed(rti) + ", rti-scale " + Fixed(scale) +
                    ", dp " + Fixed(dp) + "; need gap >= 0.10 and parity 0.05"};
}

Outcome Multimodality(Suite& suite) {
  const Policy& p = suite.Checkpoint("reach2d_bimodal", 0);
  auto env = MakeEnv("reach2d_bimodal", 0);
  const ModelConfig& c = p.model.config();
  int right = 0, counted = 0;
  for (int i = 0; i < 200; ++i) {
    env->Reset(1000 + i);
    ObsHistory h(p.normalizer, c.obs_history, env->Observe());
    std::mt19937_64 rng(i);
    const Chunk a = FullDenoise(p.model, h.Cond(), p.schedule, rng);
    const int mode = env->ModeOf(p.normalizer.ToEnvChunk(a));
    right += mode > 0;
    counted += mode != 0;
  }
  const double freq = static_cast<double>(right) / counted;
  int same = 0, pairs = 0;
  for (int i = 0; i < 100; ++i) {
    env->Reset(1000 + i);
    const EpisodeResult r = RtiRollout(*env, p, SamplerConfig{}, 0, i);
    for (size_t t = 1; t < r.modes.size(); ++t) {
      same += r.modes[t] == r.modes[t - 1];
      ++pairs;
    }
  }
  const double consistency = static_cast<double>(same) / pairs;
  const bool pass =
      counted == 200 && std::abs(freq - 0.5) <= 0.1 && consistency >= 0.95;
  return {pass, "right-goal frequency " + Fixed(freq) +
                    " over 200 samples; same-mode consecutive RTI pairs " +
                    Fixed(consistency, 4) + " over " + std::to_string(pairs)};
}

Outcome Contractivity(Suite& suite) {
  bool pass = true;
  std::string detail;
  for (const std::string env : {"reach2d_bimodal", "pushL"}) {
    const Policy& p = suite.Checkpoint(env, 0);
    const std::vector<TrainPair> pairs = MakeTrainPairs(suite.TrainingData(env));
    const LipschitzEstimate L =
        EstimateLipschitz(p.model, p.schedule, pairs, LipschitzOptions{});
    ContractionOptions opts;
    std::vector<Vec> conds;
    for (int i = 0; i < 50; ++i) {
      conds.push_back(pairs[static_cast<size_t>(i) * 131 % pairs.size()].cond);
    }
    const std::vector<DecayRow> rows =
        EmpiricalContraction(p.model, p.schedule, conds, opts);
    double worst_median = 0.0, worst_slack = 0.0;
    for (const DecayRow& r : rows) {
      const double C = ComputeC(p.schedule, L.L, r.kprime);
      worst_slack = std::max(worst_slack, r.max_ratio / C);
      pass = pass && r.max_ratio <= C;
      if (r.kprime == 3) {
        worst_median = std::max(worst_median, r.median_ratio);
        pass = pass && r.median_ratio < 1.0;
      }
    }
    detail += env + " L " + Fixed(L.L, 2) + ", C(3) " +
              Fixed(ComputeC(p.schedule, L.L, 3), 2) +
              ", max median ratio at K'=3 " + Fixed(worst_median) +
              ", max ratio/C " + Fixed(worst_slack) + "; ";
  }
  return {pass, detail + "delta in {0.01, 0.05, 0.1}, 50 trials"};
}

Outcome GradientCheck() {
  const Dataset data = GenerateDemos("pushL", 4, 0);
  const std::vector<TrainPair> pairs = MakeTrainPairs(data);
  ModelConfig c;
  c.horizon = data.horizon;
  c.action_dim = data.action_dim;
  c.obs_dim = data.obs_dim;
  c.obs_history = data.obs_history;
  DenoiserModel m(c, 17);
  const NoiseSchedule s = MakeSchedule(ScheduleKind::kSquaredCosine, 100);
  std::vector<TrainPair> batch(pairs.begin(), pairs.begin() + 32);
  std::mt19937_64 rng(18);
  std::vector<NoiseDraw> draws;
  std::uniform_int_distribution<int> pick_k(1, 100);
  for (size_t i = 0; i < batch.size(); ++i) {
    draws.push_back({pick_k(rng), GaussianChunk(c.horizon, c.action_dim, rng)});
  }
  const LossGrad lg = LossAndGrad(m, batch, draws, s);
  std::vector<size_t> idx;
  size_t offset = 0;
  for (size_t l = 0; l < m.params().weights.size(); ++l) {
    std::uniform_int_distribution<size_t> in_layer(
        0, m.params().weights[l].size() + m.params().biases[l].size() - 1);
    idx.push_back(offset + in_layer(rng));
    offset += m.params().weights[l].size() + m.params().biases[l].size();
  }
  std::uniform_int_distribution<size_t> any(0, m.params().Count() - 1);
  while (idx.size() < 20) idx.push_back(any(rng));
  double worst = 0.0;
  for (size_t i : idx) {
    const double orig = m.mutable_params().At(i);
    m.mutable_params().At(i) = orig + 1e-5;
    const double up = LossAndGrad(m, batch, draws, s).loss;
    m.mutable_params().At(i) = orig - 1e-5;
    const double down = LossAndGrad(m, batch, draws, s).loss;
    m.mutable_params().At(i) = orig;
    const double fd = (up - down) / 2e-5;
    const double an = lg.grad.At(i);
    const double scale = std::max(std::abs(fd), std::abs(an));
    worst = std::max(worst, scale == 0.0 ? 0.0 : std::abs(fd - an) / scale);
  }
  return {worst < 1e-4, "20 parameters over all layers, worst relative error " +
                            Sci(worst)};
}

Outcome ScheduleCorrectness() {
  bool pass = true;
  double worst = 0.0;
  for (ScheduleKind kind : {ScheduleKind::kLinear, ScheduleKind::kSquaredCosine}) {
    for (int K : {2, 4, 10, 50, 100, 1000}) {
      const NoiseSchedule s = MakeSchedule(kind, K);
      double product = 1.0;
      for (int k = 1; k <= K; ++k) {
        product *= s.alpha(k);
        worst = std::max(worst, std::abs(product - s.alpha_bar(k)) / s.alpha_bar(k));
        pass = pass && ComputeCk(s, 0.0, k) == 1.0;
      }
      for (double L : {0.5, 3.0, 40.0}) {
        double running = 1.0;
        for (int k = 1; k <= K; ++k) {
          running *= ComputeCk(s, L, k);
          pass = pass &&
                 std::abs(ComputeC(s, L, k) - running) <= 1e-12 * running;
        }
      }
    }
  }
  pass = pass && worst <= 1e-12;
  return {pass, "worst alpha_bar product error " + Sci(worst) +
                    "; c_k(L=0) = 1 and C running products over 12 schedules"};
}

Outcome KprimeEstimation(Suite& suite) {
  const std::string env = "pushL";
  const Policy& p = suite.Checkpoint(env, 0);
  const KprimeEstimate est =
      EstimateKprime(p, suite.TrainingData(env), KprimeOptions{});
  std::map<int, double> scores;
  std::string detail = "chosen K' " + std::to_string(est.chosen) + "; grid";
  for (int kp : {1, 2, 3, 5, 10}) {
    BenchConfig c = suite.BaseBench(env);
    c.variants = {Variant::kRti};
    c.sampler.rti_steps = LowestSteps(kp);
    c.record_timing = false;
    for (uint64_t s : c.seeds) suite.Checkpoint(env, s);
    Suite::Log("K' grid " + std::to_string(kp));
    scores[kp] = Suite::Summary(RunBench(c), Variant::kRti).avg_score;
    detail += " " + std::to_string(kp) + ":" + Fixed(scores[kp]);
  }
  double best = 0.0;
  for (const auto& [kp, s] : scores) best = std::max(best, s);
  const bool pass = scores.count(est.chosen) && scores[est.chosen] >= best - 0.05;
  return {pass, detail + "; tolerance 0.05"};
}

Outcome Serialization(Suite& suite) {
  const Policy& p = suite.Checkpoint("pick_discrete", 0, true);
  const std::string ckpt = SerializeCheckpoint(p);
  const Dataset data = ScaleDatasetDiscrete(GenerateDemos("pick_discrete", 20, 3), 10.0);
  const std::string ds = SerializeDataset(data);
  bool pass = SerializeCheckpoint(DeserializeCheckpoint(ckpt)) == ckpt &&
              SerializeDataset(DeserializeDataset(ds)) == ds;
  int rejected = 0;
  for (std::string bytes : {ckpt, ds}) {
    bytes[0] ^= 0x20;
    try {
      if (bytes.rfind("rTIDPC", 0) == 0) {
        DeserializeCheckpoint(bytes);
      } else {
        DeserializeDataset(bytes);
      }
    } catch (const FormatError&) {
      ++rejected;
    }
  }
  pass = pass && rejected == 2;
  return {pass, "checkpoint " + std::to_string(ckpt.size()) + " B and dataset " +
                    std::to_string(ds.size()) +
                    " B round-trip byte-identical; corrupted magic rejected " +
                    std::to_string(rejected) + "/2"};
}

}  // namespace
}  // namespace rtidp

int main(int argc, char** argv) {
  using namespace rtidp;
  CLI::App app{"Acceptance criteria"};
  std::string checkpoint_dir = RTIDP_TEST_CKPT_DIR;
  std::vector<int> only;
  app.add_option("--checkpoint-dir", checkpoint_dir, "Checkpoint cache")
      ->capture_default_str();
  app.add_option("--only", only, "Run only these criteria");
  CLI11_PARSE(app, argc, argv);

  Suite suite(checkpoint_dir);
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"reduction identity", [&] { return ReductionIdentity(suite); }},
      {"speed scaling", [&] { return SpeedScaling(suite); }},
      {"performance retention", [&] { return PerformanceRetention(suite); }},
      {"discrete actions", [&] { return DiscreteActions(suite); }},
      {"multimodality", [&] { return Multimodality(suite); }},
      {"contractivity", [&] { return Contractivity(suite); }},
      {"gradient correctness", [] { return GradientCheck(); }},
      {"schedule correctness", [] { return ScheduleCorrectness(); }},
      {"K' estimation", [&] { return KprimeEstimation(suite); }},
      {"serialization", [&] { return Serialization(suite); }},
  };
  const std::set<int> selected(only.begin(), only.end());
  int failures = 0;
  for (size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!selected.empty() && !selected.count(id)) continue;
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(
                            std::chrono::steady_clock::now() - start).count();
    if (!o.pass) ++failures;
    std::printf("%s criterion %d %s: %s [%.1f s]\n", o.pass ? "PASS" : "FAIL",
                id, criteria[i].first.c_str(), o.detail.c_str(), secs);
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}

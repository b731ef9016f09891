// Properties of trained checkpoints, shared with the acceptance suite
// through the checkpoint cache.

#include <algorithm>
#include <cmath>
#include <map>
#include <string>

#include <doctest.h>

#include "rtidp/bench.h"
#include "rtidp/contract.h"
#include "rtidp/sampler.h"

namespace rtidp {
namespace {

BenchConfig CacheConfig(const std::string& env) {
  BenchConfig c;
  c.env = env;
  c.checkpoint_dir = RTIDP_TEST_CKPT_DIR;
  return c;
}

const Policy& Trained(const std::string& env) {
  static std::map<std::string, Policy> cache;
  auto it = cache.find(env);
  if (it == cache.end()) {
    it = cache.emplace(env, LoadOrTrainCheckpoint(CacheConfig(env), 0, false,
                                                  nullptr)).first;
  }
  return it->second;
}

const Dataset& TrainingData(const std::string& env) {
  static std::map<std::string, Dataset> cache;
  auto it = cache.find(env);
  if (it == cache.end()) {
    const TrainRecipe r = CacheConfig(env).recipe;
    it = cache.emplace(env, GenerateDemos(env, r.n_demos, r.data_seed, r.demos))
             .first;
  }
  return it->second;
}

Vec InitialCond(const Policy& p, Env& env, uint64_t seed) {
  env.Reset(seed);
  return ObsHistory(p.normalizer, p.model.config().obs_history, env.Observe())
      .Cond();
}

// Three warm-started steps barely move a converged prediction on an
// unchanged observation; the bound was measured once and frozen.
TEST_CASE("converged prediction is a near fixed point of truncated denoising") {
  constexpr double kEpsStab = 0.15;
  const Policy& p = Trained("reach2d_bimodal");
  auto env = MakeEnv("reach2d_bimodal", 0);
  double worst = 0.0;
  for (int i = 0; i < 50; ++i) {
    const Vec cond = InitialCond(p, *env, 1000 + i);
    std::mt19937_64 rng(i);
    const Chunk a0 = FullDenoise(p.model, cond, p.schedule, rng);
    const Chunk refined =
        TruncatedDenoise(p.model, cond, a0, LowestSteps(3), p.schedule, rng);
    worst = std::max(worst, (refined - a0).norm());
  }
  INFO("worst deviation " << worst);
  CHECK(worst <= kEpsStab);
}

TEST_CASE("full denoising covers both reach goals") {
  const Policy& p = Trained("reach2d_bimodal");
  auto env = MakeEnv("reach2d_bimodal", 0);
  int right = 0;
  for (int i = 0; i < 200; ++i) {
    const Vec cond = InitialCond(p, *env, 1000 + i);
    std::mt19937_64 rng(i);
    const Chunk a = FullDenoise(p.model, cond, p.schedule, rng);
    right += env->ModeOf(p.normalizer.ToEnvChunk(a)) > 0;
  }
  CHECK(std::abs(right / 200.0 - 0.5) <= 0.1);
}

TEST_CASE("RTI switches modes no more often than per-step full denoising") {
  const Policy& p = Trained("reach2d_bimodal");
  auto env = MakeEnv("reach2d_bimodal", 0);
  int rti = 0, dp = 0;
  for (int i = 0; i < 100; ++i) {
    env->Reset(1000 + i);
    rti += RtiRollout(*env, p, SamplerConfig{}, 0, i).mode_switches;
    env->Reset(1000 + i);
    dp += DpRollout(*env, p, 1, 0, i).mode_switches;
  }
  INFO("RTI switches " << rti << ", per-step DP switches " << dp);
  CHECK(rti <= dp);
}

TEST_CASE("trained model contracts perturbations entering at K' = 3") {
  const Policy& p = Trained("reach2d_bimodal");
  const std::vector<TrainPair> pairs = MakeTrainPairs(TrainingData("reach2d_bimodal"));
  std::vector<Vec> conds;
  for (size_t i = 0; i < 50; ++i) conds.push_back(pairs[i * 53 % pairs.size()].cond);
  ContractionOptions opts;
  opts.kprimes = {3};
  opts.delta_norms = {0.1};
  const std::vector<DecayRow> rows =
      EmpiricalContraction(p.model, p.schedule, conds, opts);
  REQUIRE(rows.size() == 1);
  INFO("median ratio " << rows[0].median_ratio);
  CHECK(rows[0].median_ratio < 1.0);
}

TEST_CASE("trained Lipschitz estimate grows with the number of pairs") {
  const Policy& p = Trained("reach2d_bimodal");
  const std::vector<TrainPair> pairs = MakeTrainPairs(TrainingData("reach2d_bimodal"));
  double last = 0.0;
  for (int n : {25, 50, 100, 200, 400}) {
    LipschitzOptions opts;
    opts.n_pairs = n;
    const double L = EstimateLipschitz(p.model, p.schedule, pairs, opts).L;
    CHECK(L >= last);
    last = L;
  }
  CHECK(last > 0.0);
}

TEST_CASE("K' estimate reports the full deviation curve") {
  const Policy& p = Trained("pushL");
  KprimeOptions opts;
  opts.n_transitions = 20;
  const KprimeEstimate est = EstimateKprime(p, TrainingData("pushL"), opts);
  CHECK(est.mean_deviation.size() == opts.candidates.size());
  CHECK(std::find(opts.candidates.begin(), opts.candidates.end(), est.chosen) !=
        opts.candidates.end());
  for (double d : est.mean_deviation) CHECK(std::isfinite(d));
}

}  // namespace
}  // namespace rtidp

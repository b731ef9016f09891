#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include <doctest.h>

#include "rtidp/contract.h"
#include "rtidp/sampler.h"
#include "test_util.h"

namespace rtidp {
namespace {

using testing::RandomPairs;
using testing::RandomVec;
using testing::SmallConfig;

int CountLines(const std::string& s) {
  return static_cast<int>(std::count(s.begin(), s.end(), '\n'));
}

TEST_CASE("zero model has Lipschitz estimate zero") {
  const ModelConfig c = SmallConfig();
  const NoiseSchedule s = MakeSchedule(ScheduleKind::kSquaredCosine, 10);
  const auto pairs = RandomPairs(c, 10, 1);
  const LipschitzEstimate e =
      EstimateLipschitz(DenoiserModel::Zero(c), s, pairs, {.n_pairs = 50});
  CHECK(e.L == 0.0);
  CHECK(e.n_pairs == 50);
  CHECK(e.per_k.size() == 11);
}

// The A-block of a single linear layer has operator norm equal to its top
// singular value.
TEST_CASE("linear model estimate matches the top singular value") {
  ModelConfig c = SmallConfig();
  c.hidden = {};
  const DenoiserModel m(c, 2);
  const NoiseSchedule s = MakeSchedule(ScheduleKind::kSquaredCosine, 10);
  const Eigen::MatrixXd a_block = m.params().weights[0].leftCols(c.chunk_size());
  const double sigma_max =
      Eigen::JacobiSVD<Eigen::MatrixXd>(a_block).singularValues()[0];
  const auto pairs = RandomPairs(c, 20, 3);
  const LipschitzEstimate e =
      EstimateLipschitz(m, s, pairs, {.n_pairs = 2000, .seed = 4});
  INFO("estimate " << e.L << " singular value " << sigma_max);
  CHECK(e.L <= sigma_max * (1.0 + 1e-9));
  CHECK(e.L >= 0.95 * sigma_max);

  // Random directions alone still give a lower bound.
  const LipschitzEstimate raw = EstimateLipschitz(
      m, s, pairs, {.n_pairs = 2000, .power_iterations = 0, .seed = 4});
  CHECK(raw.L <= sigma_max * (1.0 + 1e-9));
}

TEST_CASE("Lipschitz estimate is nondecreasing in the number of pairs") {
  const ModelConfig c = SmallConfig();
  const DenoiserModel m(c, 5);
  const NoiseSchedule s = MakeSchedule(ScheduleKind::kSquaredCosine, 10);
  const auto pairs = RandomPairs(c, 30, 6);
  double last = 0.0;
  for (int n : {1, 5, 20, 100, 400}) {
    const double L = EstimateLipschitz(m, s, pairs, {.n_pairs = n, .seed = 7}).L;
    CHECK(L >= last);
    last = L;
  }
  CHECK_THROWS_AS(EstimateLipschitz(m, s, std::vector<TrainPair>{}, {}),
                  std::invalid_argument);
  CHECK_THROWS_AS(EstimateLipschitz(m, s, pairs, {.n_pairs = 0}),
                  std::invalid_argument);
  const LipschitzEstimate zero_scale =
      EstimateLipschitz(m, s, pairs, {.n_pairs = 5, .perturbation_scale = 0.0});
  CHECK(zero_scale.n_skipped == 5);
  CHECK(zero_scale.L == 0.0);
}

TEST_CASE("c_k and C identities") {
  const NoiseSchedule s = MakeSchedule(ScheduleKind::kSquaredCosine, 100);
  for (int k = 1; k <= 100; ++k) {
    CHECK(ComputeCk(s, 0.0, k) == 1.0);
    CHECK(ComputeCk(s, 2.5, k) >= 1.0);
    CHECK(ComputeCk(s, 2.0, k) - 1.0 ==
          doctest::Approx(2.0 * (ComputeCk(s, 1.0, k) - 1.0)).epsilon(1e-12));
    CHECK(ComputeC(s, 0.0, k) == 1.0);
  }
  CHECK(ComputeCk(s, 1.0, 50) == doctest::Approx(1.030691853990256).epsilon(1e-12));
  CHECK(ComputeC(s, 2.0, 3) == doctest::Approx(1.1676028317085814).epsilon(1e-12));
  CHECK(ComputeC(s, 0.7, 1) == ComputeCk(s, 0.7, 1));
  double running = 1.0;
  double last = 1.0;
  for (int k = 1; k <= 100; ++k) {
    running *= ComputeCk(s, 3.0, k);
    const double C = ComputeC(s, 3.0, k);
    CHECK(std::abs(C - running) <= 1e-12 * running);
    CHECK(C >= last);
    last = C;
  }
  CHECK_THROWS_AS(ComputeCk(s, 1.0, 0), std::invalid_argument);
  CHECK_THROWS_AS(ComputeCk(s, 1.0, 101), std::invalid_argument);
  CHECK_THROWS_AS(ComputeCk(s, -1.0, 5), std::invalid_argument);
  CHECK_THROWS_AS(ComputeC(s, 1.0, 0), std::invalid_argument);
}

TEST_CASE("zero perturbation leaves the chain unchanged at every step") {
  const ModelConfig c = SmallConfig(20);
  const DenoiserModel m(c, 8);
  const NoiseSchedule s = MakeSchedule(ScheduleKind::kSquaredCosine, 20);
  std::mt19937_64 rng(9);
  const Vec cond = RandomVec(c.cond_dim(), rng);
  const ChainNoise noise = DrawChainNoise(c.horizon, c.action_dim, 20, rng);
  for (bool det : {true, false}) {
    const std::vector<Chunk> ref = ReverseChain(m, cond, s, noise, det);
    CHECK(ref.size() == 21);
    CHECK((ref[20].array() == noise.initial.array()).all());
    for (int kp : {1, 3, 20}) {
      const std::vector<double> err = PerturbedChainErrors(
          m, cond, s, noise, ref, kp, Chunk::Zero(c.horizon, c.action_dim), det);
      REQUIRE(err.size() == static_cast<size_t>(kp + 1));
      for (double e : err) CHECK(e == 0.0);
    }
  }

  const std::vector<Vec> conds = {cond};
  ContractionOptions opts;
  opts.kprimes = {1, 3};
  opts.delta_norms = {0.0, 0.1};
  opts.n_trials = 5;
  const std::vector<DecayRow> rows = EmpiricalContraction(m, s, conds, opts);
  REQUIRE(rows.size() == 4);
  for (const DecayRow& r : rows) {
    CHECK(r.n_trials == 5);
    CHECK(std::isfinite(r.max_ratio));
    if (r.delta_norm == 0.0) {
      CHECK(r.max_error == 0.0);
      CHECK(r.max_ratio == 0.0);
    } else {
      CHECK(r.max_error > 0.0);
    }
  }
  opts.kprimes = {21};
  CHECK_THROWS_AS(EmpiricalContraction(m, s, conds, opts), std::invalid_argument);
}

TEST_CASE("one perturbed step matches the reverse step on both states") {
  const ModelConfig c = SmallConfig(10);
  const DenoiserModel m(c, 1);
  const NoiseSchedule s = MakeSchedule(ScheduleKind::kSquaredCosine, 10);
  std::mt19937_64 rng(2);
  const Vec cond = RandomVec(c.cond_dim(), rng);
  const ChainNoise noise = DrawChainNoise(c.horizon, c.action_dim, 10, rng);
  const std::vector<Chunk> ref = ReverseChain(m, cond, s, noise, false);
  const Chunk delta = 0.05 * GaussianChunk(c.horizon, c.action_dim, rng);
  const std::vector<double> err =
      PerturbedChainErrors(m, cond, s, noise, ref, 1, delta, false);
  const Chunk perturbed =
      ReverseStep(m, ref[1] + delta, 1, cond, s, &noise.y[1]);
  CHECK(err[1] == doctest::Approx(delta.norm()));
  CHECK(err[0] == doctest::Approx((perturbed - ref[0]).norm()).epsilon(1e-12));
}

TEST_CASE("K' estimate on the trivial guesses") {
  const NoiseSchedule s = MakeSchedule(ScheduleKind::kSquaredCosine, 20);
  std::mt19937_64 rng(3);
  std::vector<Chunk> targets, same, zeros;
  for (int i = 0; i < 10; ++i) {
    targets.push_back(GaussianChunk(8, 2, rng));
    same.push_back(targets.back());
    zeros.push_back(Chunk::Zero(8, 2));
  }
  KprimeOptions opts;
  opts.candidates.resize(20);
  std::iota(opts.candidates.begin(), opts.candidates.end(), 1);
  const KprimeEstimate exact = KprimeFromGuesses(s, same, targets, opts);
  CHECK(exact.chosen == 1);
  const KprimeEstimate empty = KprimeFromGuesses(s, zeros, targets, opts);
  CHECK(empty.chosen == 20);
  CHECK(exact.n_transitions == 10);
  // Both deviation curves are monotone in k.
  for (size_t i = 0; i + 1 < opts.candidates.size(); ++i) {
    CHECK(exact.mean_deviation[i] <= exact.mean_deviation[i + 1]);
    CHECK(empty.mean_deviation[i] >= empty.mean_deviation[i + 1]);
  }
  opts.candidates = {};
  CHECK_THROWS_AS(KprimeFromGuesses(s, same, targets, opts), std::invalid_argument);
  opts.candidates = {0};
  CHECK_THROWS_AS(KprimeFromGuesses(s, same, targets, opts), std::invalid_argument);
  opts.candidates = {1, 2};
  CHECK_THROWS_AS(
      KprimeFromGuesses(s, same, std::span<const Chunk>(targets).first(3), opts),
      std::invalid_argument);
}

TEST_CASE("K' tolerance prefers the largest acceptable candidate") {
  const NoiseSchedule s = MakeSchedule(ScheduleKind::kSquaredCosine, 20);
  std::vector<Chunk> targets = {Chunk::Constant(2, 1, 1.0)};
  std::vector<Chunk> guesses = {Chunk::Constant(2, 1, std::sqrt(s.alpha_bar(2)) - 0.001)};
  KprimeOptions opts;
  opts.candidates = {1, 2, 3, 10};
  CHECK(KprimeFromGuesses(s, guesses, targets, opts).chosen == 2);
  opts.tolerance = 1e9;
  CHECK(KprimeFromGuesses(s, guesses, targets, opts).chosen == 10);
}

TEST_CASE("report tables") {
  const ModelConfig c = SmallConfig(10);
  const DenoiserModel m(c, 1);
  const NoiseSchedule s = MakeSchedule(ScheduleKind::kSquaredCosine, 10);
  ContractivityReport r;
  r.lipschitz = EstimateLipschitz(m, s, RandomPairs(c, 5, 1), {.n_pairs = 20});
  r.c_k.assign(11, 0.0);
  r.C_of_kprime.assign(11, 0.0);
  for (int k = 1; k <= 10; ++k) {
    r.c_k[k] = ComputeCk(s, r.lipschitz.L, k);
    r.C_of_kprime[k] = ComputeC(s, r.lipschitz.L, k);
  }
  ContractionOptions opts;
  opts.kprimes = {1, 3};
  opts.delta_norms = {0.1};
  opts.n_trials = 3;
  const std::vector<Vec> conds = {Vec::Zero(c.cond_dim())};
  r.empirical_decay = EmpiricalContraction(m, s, conds, opts);
  r.kprime.candidates = {1, 2};
  r.kprime.mean_deviation = {0.5, 0.25};
  r.kprime.chosen = 2;

  const std::string constants = ConstantsCsv(r);
  CHECK(constants.rfind("k,c_k,C_of_kprime\n", 0) == 0);
  CHECK(CountLines(constants) == 11);
  CHECK(CountLines(LipschitzCsv(r.lipschitz)) == 11);
  const std::string decay = DecayCsv(r);
  CHECK(decay.rfind("kprime,delta_norm,median_error,max_error,median_ratio,"
                    "max_ratio,analytic_C,n_trials\n", 0) == 0);
  CHECK(CountLines(decay) == 3);
  const std::string kp = KprimeCsv(s, r.kprime);
  CHECK(kp.rfind("k,alpha_bar,mean_deviation,chosen\n", 0) == 0);
  CHECK(CountLines(kp) == 3);
  CHECK_FALSE(ReportSummary(r).empty());
}

}  // namespace
}  // namespace rtidp

#ifndef RTIDP_TESTS_TEST_UTIL_H_
#define RTIDP_TESTS_TEST_UTIL_H_

#include <random>
#include <vector>

#include "rtidp/net.h"
#include "rtidp/sampler.h"

namespace rtidp::testing {

inline ModelConfig SmallConfig(int total_steps = 10) {
  ModelConfig c;
  c.horizon = 4;
  c.action_dim = 2;
  c.obs_dim = 3;
  c.obs_history = 2;
  c.step_embed_dim = 8;
  c.total_steps = total_steps;
  c.hidden = {16, 16};
  return c;
}

inline Vec RandomVec(int n, std::mt19937_64& rng) {
  std::normal_distribution<double> normal;
  Vec v(n);
  for (int i = 0; i < n; ++i) v[i] = normal(rng);
  return v;
}

inline std::vector<TrainPair> RandomPairs(const ModelConfig& c, int n,
                                          uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<TrainPair> out;
  for (int i = 0; i < n; ++i) {
    out.push_back({RandomVec(c.cond_dim(), rng),
                   GaussianChunk(c.horizon, c.action_dim, rng)});
  }
  return out;
}

inline std::vector<NoiseDraw> RandomDraws(const ModelConfig& c, int n,
                                          int total_steps, uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> pick(1, total_steps);
  std::vector<NoiseDraw> out;
  for (int i = 0; i < n; ++i) {
    NoiseDraw d;
    d.k = pick(rng);
    d.eps = GaussianChunk(c.horizon, c.action_dim, rng);
    out.push_back(d);
  }
  return out;
}

}  // namespace rtidp::testing

#endif  // RTIDP_TESTS_TEST_UTIL_H_

#ifndef RTIDP_CONFIG_H_
#define RTIDP_CONFIG_H_

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "rtidp/bench.h"
#include "rtidp/contract.h"
#include "rtidp/net.h"
#include "rtidp/sampler.h"
#include "rtidp/schedule.h"

namespace rtidp {

// Raised for malformed or invalid configuration; the message names the
// line (for file input) and the key.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct RunConfig {
  uint64_t seed = 0;

  // [env]
  std::string env = "reach2d_bimodal";
  int n_demos = 200;
  int horizon = 8;
  int obs_history = 2;
  double min_expert_score = 0.95;
  // Dataset-level divisor of discrete action dimensions; 1 disables it.
  double discrete_scale = 1.0;

  // [model]
  std::vector<int> hidden = {256, 256, 256};
  Activation activation = Activation::kRelu;
  int step_embed_dim = 16;

  // [schedule]
  ScheduleKind schedule = ScheduleKind::kSquaredCosine;
  int total_steps = 100;

  // [sampler]
  SamplerConfig sampler;

  // [train]
  TrainConfig train;

  // [bench]
  std::vector<Variant> variants;  // empty: every variant valid for env
  int n_episodes = 100;
  int n_checkpoints = 3;  // checkpoint seeds are seed .. seed + n - 1
  int dp_executed = 4;
  int episode_cap = 0;
  uint64_t env_seed_base = 1000;
  std::string checkpoint_dir = "checkpoints";
  bool train_missing = true;
  bool record_timing = true;
  int threads = 0;
  double scale_variant_factor = 10.0;  // rti-scale and rti-clip factor

  // [contract]
  int n_pairs = 500;
  double perturbation_scale = 1e-3;
  int power_iterations = 3;
  std::vector<int> kprimes = {1, 2, 3, 5, 10};
  std::vector<double> delta_norms = {0.01, 0.05, 0.1};
  int n_trials = 50;
  int n_conditions = 50;
  std::vector<int> kprime_candidates = {1, 2, 3, 5, 10};
  double kprime_tolerance = 0.0;
  int n_transitions = 100;
};

// Parses the text format:
//   # comment
//   seed = 0
//   [section]
//   key = value
// Lists are comma-separated. Throws ConfigError naming the line and key
// for syntax errors, unknown sections or keys, and invalid values.
RunConfig ParseRunConfig(std::string_view text, RunConfig base = {});
RunConfig LoadRunConfig(const std::string& path, RunConfig base = {});

// Sets "section.key" (or "seed") from a string. Throws ConfigError.
void SetConfigValue(RunConfig& config, std::string_view dotted_key,
                    std::string_view value);

// Checks cross-field constraints; throws ConfigError.
void ValidateRunConfig(const RunConfig& config);

// Text form accepted by ParseRunConfig that reproduces `config`.
std::string FormatRunConfig(const RunConfig& config);

// Every "section.key" accepted by SetConfigValue.
std::vector<std::string> ConfigKeys();

// Views of the merged configuration consumed by the modules.
DemoOptions ToDemoOptions(const RunConfig& c);
ModelConfig ToModelConfig(const RunConfig& c);
TrainConfig ToTrainConfig(const RunConfig& c);
BenchConfig ToBenchConfig(const RunConfig& c);
ContractOptions ToContractOptions(const RunConfig& c);

// "3,2,1" -> {3, 2, 1}; throws std::invalid_argument.
std::vector<int> ParseIntList(std::string_view text);

}  // namespace rtidp

#endif  // RTIDP_CONFIG_H_

#ifndef RTIDP_BENCH_H_
#define RTIDP_BENCH_H_

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "rtidp/dataset.h"
#include "rtidp/net.h"
#include "rtidp/policy.h"
#include "rtidp/sampler.h"
#include "rtidp/schedule.h"

namespace rtidp {

enum class Variant { kDpChunked, kDpPerStep, kRti, kRtiClip, kRtiScale };

// "dp-chunked", "dp-per-step", "rti", "rti-clip", "rti-scale".
std::string_view ToString(Variant v);
Variant ParseVariant(std::string_view name);
// Every variant for environments with discrete actions, the first three
// otherwise.
std::vector<Variant> DefaultVariants(std::string_view env_name);

// How bench checkpoints are produced.
struct TrainRecipe {
  int n_demos = 200;
  uint64_t data_seed = 1;
  DemoOptions demos;
  ModelConfig model;
  ScheduleKind schedule = ScheduleKind::kSquaredCosine;
  int total_steps = 100;
  TrainConfig train;
  // Dataset-level factor for the rti-scale checkpoints.
  double discrete_scale = 10.0;
};

// Hash of every recipe field that affects the trained parameters.
uint64_t HashRecipe(const TrainRecipe& recipe, std::string_view env_name);

struct BenchConfig {
  std::string env = "reach2d_bimodal";
  std::vector<Variant> variants;  // empty selects DefaultVariants(env)
  int n_episodes = 100;
  std::vector<uint64_t> seeds = {0, 1, 2};  // one checkpoint per seed
  SamplerConfig sampler;
  int dp_executed = 4;  // open-loop prefix of dp-chunked
  int episode_cap = 0;  // <= 0 uses the environment's cap
  uint64_t env_seed_base = 1000;  // episode i resets with base + i
  TrainRecipe recipe;
  std::string checkpoint_dir = "checkpoints";
  // Explicit checkpoints, one per seed, used instead of the cache when
  // non-empty. scaled_checkpoints serves rti-scale.
  std::vector<std::string> checkpoints;
  std::vector<std::string> scaled_checkpoints;
  // Train and save checkpoints that are missing instead of failing.
  bool train_missing = true;
  // With timing off every latency column is 0 and the CSV is a pure
  // function of the configuration.
  bool record_timing = true;
  // Parallel rollouts; 0 reads RTIDP_THREADS (default 1).
  int threads = 0;
  // Full denoises timed per checkpoint for the speedup reference, spread
  // before and after each variant run.
  int reference_calls = 30;
};

// Throws std::invalid_argument describing the first invalid field.
void ValidateBenchConfig(const BenchConfig& config);

// Path of the checkpoint for (env, seed, scaled) under `config`.
std::string CheckpointPath(const BenchConfig& config, uint64_t seed,
                           bool scaled);

// Loads the checkpoint or, when train_missing is set, trains and saves
// it. Throws std::runtime_error naming the path when it is missing.
Policy LoadOrTrainCheckpoint(const BenchConfig& config, uint64_t seed,
                             bool scaled, std::string* blob_hash);

struct BenchRow {
  Variant variant = Variant::kRti;
  std::string env;
  uint64_t seed = 0;
  int episode = 0;
  double score = 0.0;
  int n_predictions = 0;
  double latency_us_median = 0.0;  // excludes the first prediction
  double latency_us_p95 = 0.0;
  std::vector<int> rti_steps;  // empty for full-denoise variants
  double speedup_vs_full = 0.0;
  uint64_t config_hash = 0;
  std::string checkpoint_hash;
  bool operator==(const BenchRow&) const = default;
};

struct VariantSummary {
  Variant variant = Variant::kRti;
  std::string env;
  std::vector<double> seed_scores;  // mean score per checkpoint
  double max_score = 0.0;
  double avg_score = 0.0;
  // Pooled over every prediction of every episode.
  double latency_us_median = 0.0;  // warm-up excluded
  double latency_us_p95 = 0.0;
  double latency_us_median_with_warmup = 0.0;
  double speedup_vs_full = 0.0;
  double mean_mode_switches = 0.0;
};

struct BenchResult {
  std::vector<BenchRow> rows;
  std::vector<VariantSummary> summary;
  double full_latency_us = 0.0;  // median of all timed full denoises
  std::string host;
};

// Evaluates every variant on every checkpoint with paired environment
// seeds and paired sampler seeds.
BenchResult RunBench(const BenchConfig& config);

// Columns: variant,env,seed,episode,score,n_predictions,latency_us_median,
// latency_us_p95,rti_steps,speedup_vs_full,config_hash,checkpoint_hash.
// rti_steps is ';'-joined, or "full" for full-denoise variants.
std::string BenchCsvHeader();
std::string BenchCsv(const std::vector<BenchRow>& rows);
// Inverse of BenchCsv; throws FormatError naming the line.
std::vector<BenchRow> ParseBenchCsv(const std::string& text);
std::string BenchTable(const BenchResult& result);

// CPU model and thread count.
std::string HostDescriptor();
// RTIDP_THREADS when set to a positive integer, else 1.
int ThreadsFromEnvironment();

}  // namespace rtidp

#endif  // RTIDP_BENCH_H_

#include "rtidp/bench.h"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "rtidp/binary_io.h"
#include "rtidp/envs.h"

namespace rtidp {
namespace {

constexpr Variant kAllVariants[] = {Variant::kDpChunked, Variant::kDpPerStep,
                                    Variant::kRti, Variant::kRtiClip,
                                    Variant::kRtiScale};

bool HasDiscrete(const EnvSpec& spec) {
  return std::find(spec.discrete_mask.begin(), spec.discrete_mask.end(),
                   true) != spec.discrete_mask.end();
}

bool IsDp(Variant v) {
  return v == Variant::kDpChunked || v == Variant::kDpPerStep;
}

uint64_t SamplerSeed(uint64_t checkpoint_seed, int episode) {
  return (checkpoint_seed + 1) * 0x9E3779B97F4A7C15ull +
         static_cast<uint64_t>(episode);
}

std::string Hex(uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::string Num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

// Runs fn(i) for i in [0, n) on `threads` workers.
template <class F>
void ParallelFor(int n, int threads, F&& fn) {
  if (threads <= 1 || n <= 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr error;
  std::mutex error_mu;
  std::vector<std::thread> pool;
  for (int w = 0; w < std::min(threads, n); ++w) {
    pool.emplace_back([&] {
      for (int i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mu);
          if (!error) error = std::current_exception();
        }
      }
    });
  }
  for (std::thread& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

struct Checkpoint {
  Policy policy;
  std::string hash;
};

EpisodeResult RunVariant(Variant v, const BenchConfig& config,
                         const Checkpoint& plain, const Checkpoint* scaled,
                         int episode, uint64_t seed) {
  std::unique_ptr<Env> env = MakeEnv(config.env, 0);
  env->Reset(config.env_seed_base + static_cast<uint64_t>(episode));
  const uint64_t sampler_seed = SamplerSeed(seed, episode);
  switch (v) {
    case Variant::kDpChunked:
      return DpRollout(*env, plain.policy, config.dp_executed,
                       config.episode_cap, sampler_seed,
                       config.sampler.deterministic_final);
    case Variant::kDpPerStep:
      return DpRollout(*env, plain.policy, 1, config.episode_cap, sampler_seed,
                       config.sampler.deterministic_final);
    case Variant::kRti:
      return RtiRollout(*env, plain.policy, config.sampler, config.episode_cap,
                        sampler_seed);
    case Variant::kRtiClip: {
      SamplerConfig s = config.sampler;
      s.discrete_guess_factor = config.recipe.discrete_scale;
      return RtiRollout(*env, plain.policy, s, config.episode_cap,
                        sampler_seed);
    }
    case Variant::kRtiScale:
      return RtiRollout(*env, scaled->policy, config.sampler,
                        config.episode_cap, sampler_seed);
  }
  throw std::logic_error("unhandled variant");
}

uint64_t VariantHash(Variant v, const BenchConfig& config) {
  std::ostringstream s;
  s << ToString(v) << ";sampler=" << HashSamplerConfig(config.sampler)
    << ";dp=" << config.dp_executed << ";cap=" << config.episode_cap
    << ";clip=" << config.recipe.discrete_scale;
  return Fnv1a64(s.str());
}

void TimeFullDenoise(const Policy& p, int calls, uint64_t rng_seed,
                    std::vector<double>* samples) {
  std::mt19937_64 rng(rng_seed);
  const ModelConfig& c = p.model.config();
  const Vec cond = Vec::Zero(c.cond_dim());
  for (int i = 0; i < calls; ++i) {
    const auto start = std::chrono::steady_clock::now();
    const Chunk out = FullDenoise(p.model, cond, p.schedule, rng);
    samples->push_back(std::chrono::duration<double, std::micro>(
                           std::chrono::steady_clock::now() - start)
                           .count());
    if (!out.allFinite()) throw NumericalError("non-finite full denoise");
  }
}

std::vector<std::string> Split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : s) {
    if (ch == sep) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += ch;
    }
  }
  out.push_back(cur);
  return out;
}

}  // namespace

std::string_view ToString(Variant v) {
  switch (v) {
    case Variant::kDpChunked: return "dp-chunked";
    case Variant::kDpPerStep: return "dp-per-step";
    case Variant::kRti: return "rti";
    case Variant::kRtiClip: return "rti-clip";
    case Variant::kRtiScale: return "rti-scale";
  }
  return "unknown";
}

Variant ParseVariant(std::string_view name) {
  for (Variant v : kAllVariants) {
    if (ToString(v) == name) return v;
  }
  throw std::invalid_argument("unknown variant: " + std::string(name));
}

std::vector<Variant> DefaultVariants(std::string_view env_name) {
  const bool discrete = HasDiscrete(MakeEnv(env_name, 0)->spec());
  std::vector<Variant> out(std::begin(kAllVariants), std::end(kAllVariants));
  if (!discrete) out.resize(3);
  return out;
}

uint64_t HashRecipe(const TrainRecipe& r, std::string_view env_name) {
  std::ostringstream s;
  s << env_name << ";n=" << r.n_demos << ";ds=" << r.data_seed
    << ";T=" << r.demos.horizon << ";h=" << r.demos.obs_history
    << ";min=" << Num(r.demos.min_expert_score)
    << ";emb=" << r.model.step_embed_dim << ";act=" << ToString(r.model.activation)
    << ";hidden=";
  for (int h : r.model.hidden) s << h << ',';
  s << ";sched=" << ToString(r.schedule) << ";K=" << r.total_steps
    << ";ep=" << r.train.epochs << ";bs=" << r.train.batch_size
    << ";lr=" << Num(r.train.learning_rate) << ";mu=" << Num(r.train.momentum)
    << ";clip=" << Num(r.train.grad_clip) << ";cos=" << r.train.cosine_decay
    << ";scale=" << Num(r.discrete_scale);
  return Fnv1a64(s.str());
}

void ValidateBenchConfig(const BenchConfig& c) {
  const auto& names = EnvNames();
  if (std::find(names.begin(), names.end(), c.env) == names.end()) {
    throw std::invalid_argument("unknown environment: " + c.env);
  }
  if (c.n_episodes < 1) throw std::invalid_argument("n_episodes must be >= 1");
  if (c.seeds.empty()) throw std::invalid_argument("seeds must not be empty");
  if (c.dp_executed < 1 || c.dp_executed > c.recipe.demos.horizon) {
    throw std::invalid_argument("dp_executed must lie in [1, horizon]");
  }
  if (c.threads < 0) throw std::invalid_argument("threads must be >= 0");
  if (c.reference_calls < 1) {
    throw std::invalid_argument("reference_calls must be >= 1");
  }
  ValidateSteps(c.sampler.rti_steps, c.recipe.total_steps);
  const bool discrete = HasDiscrete(MakeEnv(c.env, 0)->spec());
  for (Variant v : c.variants) {
    if ((v == Variant::kRtiClip || v == Variant::kRtiScale) && !discrete) {
      throw std::invalid_argument("variant " + std::string(ToString(v)) +
                                  " requires discrete action dimensions");
    }
  }
  if (!c.checkpoints.empty() && c.checkpoints.size() != c.seeds.size()) {
    throw std::invalid_argument("need one checkpoint per seed");
  }
  if (!c.scaled_checkpoints.empty() &&
      c.scaled_checkpoints.size() != c.seeds.size()) {
    throw std::invalid_argument("need one scaled checkpoint per seed");
  }
  if (!(c.recipe.discrete_scale > 0.0)) {
    throw std::invalid_argument("discrete_scale must be > 0");
  }
}

std::string CheckpointPath(const BenchConfig& c, uint64_t seed, bool scaled) {
  std::ostringstream name;
  name << c.env << (scaled ? "-scaled" : "") << "-seed" << seed << "-"
       << Hex(HashRecipe(c.recipe, c.env)) << ".ckpt";
  return (std::filesystem::path(c.checkpoint_dir) / name.str()).string();
}

Policy LoadOrTrainCheckpoint(const BenchConfig& c, uint64_t seed, bool scaled,
                             std::string* blob_hash) {
  const std::vector<std::string>& given =
      scaled ? c.scaled_checkpoints : c.checkpoints;
  if (!given.empty()) {
    const auto it = std::find(c.seeds.begin(), c.seeds.end(), seed);
    const size_t idx = static_cast<size_t>(it - c.seeds.begin());
    if (idx >= given.size()) {
      throw std::invalid_argument("no checkpoint given for seed " +
                                  std::to_string(seed));
    }
    if (!std::filesystem::exists(given[idx])) {
      throw std::runtime_error("missing checkpoint: " + given[idx]);
    }
    const std::string bytes = ReadFileBytes(given[idx]);
    if (blob_hash != nullptr) *blob_hash = GitBlobHash(bytes);
    return DeserializeCheckpoint(bytes);
  }
  const std::string path = CheckpointPath(c, seed, scaled);
  if (std::filesystem::exists(path)) {
    const std::string bytes = ReadFileBytes(path);
    if (blob_hash != nullptr) *blob_hash = GitBlobHash(bytes);
    return DeserializeCheckpoint(bytes);
  }
  if (!c.train_missing) {
    throw std::runtime_error("missing checkpoint: " + path);
  }
  Dataset data = GenerateDemos(c.env, c.recipe.n_demos, c.recipe.data_seed,
                               c.recipe.demos);
  if (scaled) data = ScaleDatasetDiscrete(data, c.recipe.discrete_scale);
  TrainConfig train = c.recipe.train;
  train.seed = seed;
  const Policy p = TrainPolicy(data, c.recipe.model, c.recipe.schedule,
                               c.recipe.total_steps, train);
  std::filesystem::create_directories(c.checkpoint_dir);
  const std::string bytes = SerializeCheckpoint(p);
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw std::runtime_error("cannot write checkpoint: " + tmp);
  }
  std::filesystem::rename(tmp, path);
  if (blob_hash != nullptr) *blob_hash = GitBlobHash(bytes);
  return p;
}

BenchResult RunBench(const BenchConfig& input) {
  BenchConfig config = input;
  if (config.variants.empty()) config.variants = DefaultVariants(config.env);
  ValidateBenchConfig(config);
  const int threads =
      config.threads > 0 ? config.threads : ThreadsFromEnvironment();
  const bool need_scaled =
      std::find(config.variants.begin(), config.variants.end(),
                Variant::kRtiScale) != config.variants.end();
  const int n = config.n_episodes;

  BenchResult result;
  result.host = HostDescriptor() + ", rollout threads " + std::to_string(threads);
  std::vector<double> full_refs;
  struct Pool {
    std::vector<double> steady, all;
    std::vector<double> seed_scores;
    double switches = 0.0;
    int episodes = 0;
  };
  std::map<Variant, Pool> pools;

  for (uint64_t seed : config.seeds) {
    Checkpoint plain, scaled;
    plain.policy = LoadOrTrainCheckpoint(config, seed, false, &plain.hash);
    if (need_scaled) {
      scaled.policy = LoadOrTrainCheckpoint(config, seed, true, &scaled.hash);
    }
    // Reference calls are interleaved with the variant runs.
    std::vector<double> ref_samples;
    const int n_slots = static_cast<int>(config.variants.size()) + 1;
    const int per_slot = (config.reference_calls + n_slots - 1) / n_slots;
    uint64_t ref_seed = 0;
    if (config.record_timing) {
      TimeFullDenoise(plain.policy, per_slot, ref_seed++, &ref_samples);
    }
    struct Run {
      std::vector<EpisodeResult> episodes, timed;
    };
    std::vector<Run> runs;
    for (Variant v : config.variants) {
      Run& run = runs.emplace_back();
      run.episodes.resize(n);
      ParallelFor(n, threads, [&](int i) {
        run.episodes[i] = RunVariant(v, config, plain, &scaled, i, seed);
        run.episodes[i].episode_id = i;
      });
      if (config.record_timing && threads > 1) {
        // Dedicated single-threaded pass for the pooled latency figures.
        const int m = std::min(n, 10);
        for (int i = 0; i < m; ++i) {
          run.timed.push_back(RunVariant(v, config, plain, &scaled, i, seed));
        }
      }
      if (config.record_timing) {
        TimeFullDenoise(plain.policy, per_slot, ref_seed++, &ref_samples);
      }
    }
    double full_ref = 0.0;
    if (config.record_timing) {
      full_ref = ComputeLatencyStats(ref_samples).median;
      full_refs.insert(full_refs.end(), ref_samples.begin(), ref_samples.end());
    }
    for (size_t vi = 0; vi < config.variants.size(); ++vi) {
      const Variant v = config.variants[vi];
      const Checkpoint& used = v == Variant::kRtiScale ? scaled : plain;
      const Run& run = runs[vi];
      Pool& pool = pools[v];
      double score_sum = 0.0;
      const uint64_t vhash = VariantHash(v, config);
      for (const EpisodeResult& e : run.episodes) {
        BenchRow row;
        row.variant = v;
        row.env = config.env;
        row.seed = seed;
        row.episode = e.episode_id;
        row.score = e.score;
        row.n_predictions = e.n_predictions;
        if (config.record_timing) {
          const LatencyStats s = SteadyLatency(e);
          row.latency_us_median = s.median;
          row.latency_us_p95 = s.p95;
          row.speedup_vs_full = s.median > 0.0 ? full_ref / s.median : 0.0;
        }
        if (!IsDp(v)) row.rti_steps = config.sampler.rti_steps;
        row.config_hash = vhash;
        row.checkpoint_hash = used.hash;
        result.rows.push_back(row);
        score_sum += e.score;
        pool.switches += e.mode_switches;
        ++pool.episodes;
      }
      const std::vector<EpisodeResult>& latency_src =
          run.timed.empty() ? run.episodes : run.timed;
      if (config.record_timing) {
        for (const EpisodeResult& e : latency_src) {
          for (size_t i = 0; i < e.latencies_us.size(); ++i) {
            pool.all.push_back(e.latencies_us[i]);
            if (i > 0) pool.steady.push_back(e.latencies_us[i]);
          }
        }
      }
      pool.seed_scores.push_back(score_sum / n);
    }
  }
  result.full_latency_us = ComputeLatencyStats(full_refs).median;
  for (Variant v : config.variants) {
    Pool& pool = pools[v];
    VariantSummary s;
    s.variant = v;
    s.env = config.env;
    s.seed_scores = pool.seed_scores;
    s.max_score = *std::max_element(pool.seed_scores.begin(),
                                    pool.seed_scores.end());
    double sum = 0.0;
    for (double x : pool.seed_scores) sum += x;
    s.avg_score = sum / static_cast<double>(pool.seed_scores.size());
    const LatencyStats steady = ComputeLatencyStats(pool.steady);
    s.latency_us_median = steady.median;
    s.latency_us_p95 = steady.p95;
    s.latency_us_median_with_warmup = ComputeLatencyStats(pool.all).median;
    s.speedup_vs_full =
        steady.median > 0.0 ? result.full_latency_us / steady.median : 0.0;
    s.mean_mode_switches = pool.switches / std::max(1, pool.episodes);
    result.summary.push_back(s);
  }
  return result;
}

std::string BenchCsvHeader() {
  return "variant,env,seed,episode,score,n_predictions,latency_us_median,"
         "latency_us_p95,rti_steps,speedup_vs_full,config_hash,"
         "checkpoint_hash\n";
}

std::string BenchCsv(const std::vector<BenchRow>& rows) {
  std::string out = BenchCsvHeader();
  for (const BenchRow& r : rows) {
    std::string steps;
    if (r.rti_steps.empty()) {
      steps = "full";
    } else {
      for (size_t i = 0; i < r.rti_steps.size(); ++i) {
        if (i) steps += ';';
        steps += std::to_string(r.rti_steps[i]);
      }
    }
    out += std::string(ToString(r.variant)) + "," + r.env + "," +
           std::to_string(r.seed) + "," + std::to_string(r.episode) + "," +
           Num(r.score) + "," + std::to_string(r.n_predictions) + "," +
           Num(r.latency_us_median) + "," + Num(r.latency_us_p95) + "," +
           steps + "," + Num(r.speedup_vs_full) + "," + Hex(r.config_hash) +
           "," + r.checkpoint_hash + "\n";
  }
  return out;
}

std::vector<BenchRow> ParseBenchCsv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  if (!std::getline(in, line) || line + "\n" != BenchCsvHeader()) {
    throw FormatError("bench CSV line 1: unexpected header");
  }
  ++line_no;
  std::vector<BenchRow> rows;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const std::vector<std::string> f = Split(line, ',');
    const std::string where = "bench CSV line " + std::to_string(line_no);
    if (f.size() != 12) throw FormatError(where + ": expected 12 fields");
    try {
      BenchRow r;
      r.variant = ParseVariant(f[0]);
      r.env = f[1];
      r.seed = std::stoull(f[2]);
      r.episode = std::stoi(f[3]);
      r.score = std::stod(f[4]);
      r.n_predictions = std::stoi(f[5]);
      r.latency_us_median = std::stod(f[6]);
      r.latency_us_p95 = std::stod(f[7]);
      if (f[8] != "full") {
        for (const std::string& k : Split(f[8], ';')) {
          r.rti_steps.push_back(std::stoi(k));
        }
      }
      r.speedup_vs_full = std::stod(f[9]);
      r.config_hash = std::stoull(f[10], nullptr, 16);
      r.checkpoint_hash = f[11];
      rows.push_back(std::move(r));
    } catch (const std::logic_error& e) {
      throw FormatError(where + ": " + e.what());
    }
  }
  return rows;
}

std::string BenchTable(const BenchResult& result) {
  std::ostringstream s;
  char line[256];
  std::snprintf(line, sizeof(line), "%-16s %-12s %-9s %-9s %-12s %-12s %-9s\n",
                "env", "variant", "max", "avg", "median_ms", "p95_ms",
                "speedup");
  s << line;
  for (const VariantSummary& v : result.summary) {
    std::snprintf(line, sizeof(line),
                  "%-16s %-12s %-9.3f %-9.3f %-12.4f %-12.4f %-9.2f\n",
                  v.env.c_str(), std::string(ToString(v.variant)).c_str(),
                  v.max_score, v.avg_score, v.latency_us_median / 1000.0,
                  v.latency_us_p95 / 1000.0, v.speedup_vs_full);
    s << line;
  }
  std::snprintf(line, sizeof(line), "full denoise median: %.4f ms\n",
                result.full_latency_us / 1000.0);
  s << line << "host: " << result.host << "\n";
  return s.str();
}

std::string HostDescriptor() {
  std::string model = "unknown cpu";
  std::ifstream cpu("/proc/cpuinfo");
  std::string line;
  while (std::getline(cpu, line)) {
    if (line.rfind("model name", 0) == 0) {
      const size_t colon = line.find(':');
      if (colon != std::string::npos) model = line.substr(colon + 2);
      break;
    }
  }
  return model + ", " + std::to_string(std::thread::hardware_concurrency()) +
         " hardware threads";
}

int ThreadsFromEnvironment() {
  const char* v = std::getenv("RTIDP_THREADS");
  if (v == nullptr) return 1;
  char* end = nullptr;
  const long n = std::strtol(v, &end, 10);
  if (end == v || *end != '\0' || n < 1) return 1;
  return static_cast<int>(std::min<long>(n, 256));
}

}  // namespace rtidp

// Command-line driver: data generation, training, rollouts, benchmarks and
// contractivity reports.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "rtidp/bench.h"
#include "rtidp/config.h"
#include "rtidp/contract.h"
#include "rtidp/dataset.h"
#include "rtidp/envs.h"
#include "rtidp/policy.h"
#include "rtidp/sampler.h"

namespace {

using namespace rtidp;

struct CommonArgs {
  std::string config_path;
  std::optional<uint64_t> seed;
  std::string out = "out";
  std::string env;
  std::string steps;
  std::vector<std::string> sets;
};

struct PathArgs {
  std::string data;
  std::string checkpoint;
  std::string variant = "rti";
  std::optional<int> episodes;
  std::string checkpoints;
  std::string scaled_checkpoints;
};

void AddCommon(CLI::App* cmd, CommonArgs& a) {
  cmd->add_option("--config", a.config_path, "Run configuration file")
      ->check(CLI::ExistingFile);
  cmd->add_option("--seed", a.seed, "Master seed (default: config seed, 0)");
  cmd->add_option("--out", a.out, "Output directory")->capture_default_str();
  cmd->add_option("--env", a.env, "Environment name (default: env.name, reach2d_bimodal)");
  cmd->add_option("--steps", a.steps,
                  "Comma-separated descending RTI step indices "
                  "(default: sampler.rti_steps, 3,2,1)");
  cmd->add_option("--set", a.sets, "Override any key: section.key=value (repeatable)");
}

RunConfig MergeConfig(const CommonArgs& a) {
  RunConfig c;
  if (!a.config_path.empty()) c = LoadRunConfig(a.config_path, c);
  for (const std::string& s : a.sets) {
    const size_t eq = s.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("--set expects section.key=value, got '" + s + "'");
    }
    SetConfigValue(c, s.substr(0, eq), s.substr(eq + 1));
  }
  if (a.seed) c.seed = *a.seed;
  if (!a.env.empty()) SetConfigValue(c, "env.name", a.env);
  if (!a.steps.empty()) SetConfigValue(c, "sampler.rti_steps", a.steps);
  ValidateRunConfig(c);
  return c;
}

std::string OutPath(const CommonArgs& a, const std::string& name) {
  return (std::filesystem::path(a.out) / name).string();
}

void WriteText(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw std::runtime_error("cannot write " + path);
}

// Creates the output directory and echoes the merged configuration.
void PrepareOut(const CommonArgs& a, const RunConfig& c) {
  std::filesystem::create_directories(a.out);
  WriteText(OutPath(a, "config.ini"), FormatRunConfig(c));
}

void RequireFile(const std::string& path, const char* what) {
  if (!std::filesystem::exists(path)) {
    throw std::runtime_error(std::string("missing ") + what + ": " + path);
  }
}

std::string Fmt(const char* format, double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), format, v);
  return buf;
}

void CmdGenData(const CommonArgs& a) {
  const RunConfig c = MergeConfig(a);
  PrepareOut(a, c);
  Dataset data = GenerateDemos(c.env, c.n_demos, c.seed, ToDemoOptions(c));
  if (c.discrete_scale != 1.0) {
    data = ScaleDatasetDiscrete(data, c.discrete_scale);
  }
  const std::string path = OutPath(a, "dataset.bin");
  SaveDataset(data, path);
  WriteText(OutPath(a, "dataset.csv"), DatasetToCsv(data));
  const ConsistencyReport r = DatasetConsistencyReport(data);
  std::string report = "transitions " + std::to_string(r.transitions) + "\n";
  report += "continuous_max " + Fmt("%.9g", r.continuous_max) + "\n";
  report += "continuous_mean " + Fmt("%.9g", r.continuous_mean) + "\n";
  for (size_t d = 0; d < r.max_jump.size(); ++d) {
    report += "dim " + std::to_string(d) + " max_jump " +
              Fmt("%.9g", r.max_jump[d]) + " mean_jump " +
              Fmt("%.9g", r.mean_jump[d]) +
              (r.discrete_exceeds[d] ? " exceeds_continuous" : "") + "\n";
  }
  WriteText(OutPath(a, "consistency.txt"), report);
  std::cout << "wrote " << path << ": " << data.episodes.size()
            << " episodes, " << data.NumPairs() << " pairs, " << data.discarded
            << " discarded\n";
}

void CmdTrain(const CommonArgs& a, const PathArgs& p) {
  const RunConfig c = MergeConfig(a);
  const std::string data_path =
      p.data.empty() ? OutPath(a, "dataset.bin") : p.data;
  RequireFile(data_path, "dataset");
  PrepareOut(a, c);
  const Dataset data = LoadDataset(data_path);
  std::vector<double> losses;
  const Policy policy =
      TrainPolicy(data, ToModelConfig(c), c.schedule, c.total_steps,
                  ToTrainConfig(c), &losses);
  const std::string bytes = SerializeCheckpoint(policy);
  const std::string path = OutPath(a, "policy.ckpt");
  WriteText(path, bytes);
  std::string csv = "epoch,loss\n";
  for (size_t i = 0; i < losses.size(); ++i) {
    csv += std::to_string(i) + "," + Fmt("%.9g", losses[i]) + "\n";
  }
  WriteText(OutPath(a, "loss.csv"), csv);
  WriteText(OutPath(a, "schedule.csv"), policy.schedule.ToCsv());
  std::cout << "wrote " << path << " (" << GitBlobHash(bytes)
            << "), final loss " << Fmt("%.6g", losses.back()) << "\n";
}

void CmdRollout(const CommonArgs& a, const PathArgs& p) {
  const RunConfig c = MergeConfig(a);
  const std::string ckpt =
      p.checkpoint.empty() ? OutPath(a, "policy.ckpt") : p.checkpoint;
  RequireFile(ckpt, "checkpoint");
  const Policy policy = LoadCheckpoint(ckpt);
  if (!a.env.empty() && a.env != policy.env_name) {
    throw std::invalid_argument("checkpoint was trained on " +
                                policy.env_name + ", not " + a.env);
  }
  const Variant variant = ParseVariant(p.variant);
  const int n = p.episodes.value_or(c.n_episodes);
  if (n < 1) throw std::invalid_argument("--episodes must be >= 1");
  PrepareOut(a, c);
  std::unique_ptr<Env> env = MakeEnv(policy.env_name, 0);
  std::string csv = EpisodeCsvHeader();
  double total = 0.0;
  for (int i = 0; i < n; ++i) {
    env->Reset(c.env_seed_base + static_cast<uint64_t>(i));
    const uint64_t seed = c.seed * 1000003ull + static_cast<uint64_t>(i);
    EpisodeResult r;
    switch (variant) {
      case Variant::kDpChunked:
        r = DpRollout(*env, policy, c.dp_executed, c.episode_cap, seed,
                      c.sampler.deterministic_final);
        break;
      case Variant::kDpPerStep:
        r = DpRollout(*env, policy, 1, c.episode_cap, seed,
                      c.sampler.deterministic_final);
        break;
      case Variant::kRtiClip: {
        SamplerConfig s = c.sampler;
        s.discrete_guess_factor = c.scale_variant_factor;
        r = RtiRollout(*env, policy, s, c.episode_cap, seed);
        break;
      }
      case Variant::kRti:
      case Variant::kRtiScale:
        r = RtiRollout(*env, policy, c.sampler, c.episode_cap, seed);
        break;
    }
    r.episode_id = i;
    if (!c.record_timing) r.latencies_us.assign(r.latencies_us.size(), 0.0);
    csv += EpisodeCsvRow(r);
    total += r.score;
  }
  const std::string path = OutPath(a, "episodes.csv");
  WriteText(path, csv);
  std::cout << "wrote " << path << ": " << ToString(variant) << " mean score "
            << Fmt("%.4f", total / n) << " over " << n << " episodes\n";
}

std::vector<std::string> SplitPaths(const std::string& s) {
  std::vector<std::string> out;
  if (s.empty()) return out;
  size_t start = 0;
  while (true) {
    const size_t comma = s.find(',', start);
    out.push_back(s.substr(start, comma - start));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

void CmdBench(const CommonArgs& a, const PathArgs& p,
              const std::string& variants) {
  RunConfig c = MergeConfig(a);
  if (!variants.empty()) {
    SetConfigValue(c, "bench.variants", variants);
    ValidateRunConfig(c);
  }
  BenchConfig b = ToBenchConfig(c);
  b.checkpoints = SplitPaths(p.checkpoints);
  b.scaled_checkpoints = SplitPaths(p.scaled_checkpoints);
  if (!b.checkpoints.empty()) {
    b.seeds.clear();
    for (size_t i = 0; i < b.checkpoints.size(); ++i) {
      b.seeds.push_back(c.seed + i);
    }
  }
  PrepareOut(a, c);
  const BenchResult r = RunBench(b);
  const std::string path = OutPath(a, "bench.csv");
  WriteText(path, BenchCsv(r.rows));
  const std::string table = BenchTable(r);
  WriteText(OutPath(a, "bench.txt"), table);
  std::cout << table << "wrote " << path << "\n";
}

void CmdContract(const CommonArgs& a, const PathArgs& p) {
  const RunConfig c = MergeConfig(a);
  const std::string ckpt =
      p.checkpoint.empty() ? OutPath(a, "policy.ckpt") : p.checkpoint;
  const std::string data_path =
      p.data.empty() ? OutPath(a, "dataset.bin") : p.data;
  RequireFile(ckpt, "checkpoint");
  RequireFile(data_path, "dataset");
  const Policy policy = LoadCheckpoint(ckpt);
  const Dataset data = LoadDataset(data_path);
  PrepareOut(a, c);
  const ContractivityReport r =
      BuildContractivityReport(policy, data, ToContractOptions(c));
  WriteText(OutPath(a, "constants.csv"), ConstantsCsv(r));
  WriteText(OutPath(a, "lipschitz.csv"), LipschitzCsv(r.lipschitz));
  WriteText(OutPath(a, "decay.csv"), DecayCsv(r));
  WriteText(OutPath(a, "kprime.csv"), KprimeCsv(policy.schedule, r.kprime));
  const std::string summary = ReportSummary(r);
  WriteText(OutPath(a, "summary.txt"), summary);
  std::cout << summary;
}

void CmdEstimateKprime(const CommonArgs& a, const PathArgs& p) {
  const RunConfig c = MergeConfig(a);
  const std::string ckpt =
      p.checkpoint.empty() ? OutPath(a, "policy.ckpt") : p.checkpoint;
  const std::string data_path =
      p.data.empty() ? OutPath(a, "dataset.bin") : p.data;
  RequireFile(ckpt, "checkpoint");
  RequireFile(data_path, "dataset");
  const Policy policy = LoadCheckpoint(ckpt);
  const Dataset data = LoadDataset(data_path);
  PrepareOut(a, c);
  const KprimeEstimate est =
      EstimateKprime(policy, data, ToContractOptions(c).kprime);
  const std::string path = OutPath(a, "kprime.csv");
  WriteText(path, KprimeCsv(policy.schedule, est));
  std::cout << "chosen K' = " << est.chosen << " (deviation curve in " << path
            << ")\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Diffusion policy inference with real-time iteration warm "
               "starts"};
  app.require_subcommand(1);
  app.option_defaults()->always_capture_default();

  CommonArgs common;
  PathArgs paths;
  std::string variants;

  CLI::App* gen = app.add_subcommand("gen-data", "Generate expert demos");
  AddCommon(gen, common);

  CLI::App* train = app.add_subcommand("train", "Train a noise predictor");
  AddCommon(train, common);
  train->add_option("--data", paths.data, "Dataset (default OUT/dataset.bin)");

  CLI::App* rollout =
      app.add_subcommand("rollout", "Evaluate one policy variant");
  AddCommon(rollout, common);
  rollout->add_option("--checkpoint", paths.checkpoint,
                      "Checkpoint (default OUT/policy.ckpt)");
  rollout->add_option("--variant", paths.variant,
                      "dp-chunked, dp-per-step, rti, rti-clip or rti-scale")
      ->capture_default_str();
  rollout->add_option("--episodes", paths.episodes,
                      "Episodes (default bench.n_episodes)");

  CLI::App* bench = app.add_subcommand("bench", "Paired variant benchmark");
  AddCommon(bench, common);
  bench->add_option("--variant", variants,
                    "Comma-separated variants (default: all valid for env)");
  bench->add_option("--checkpoints", paths.checkpoints,
                    "Comma-separated checkpoints, one per seed (default: "
                    "train or load from bench.checkpoint_dir)");
  bench->add_option("--scaled-checkpoints", paths.scaled_checkpoints,
                    "Comma-separated rti-scale checkpoints");

  CLI::App* contract =
      app.add_subcommand("contract", "Contractivity report");
  AddCommon(contract, common);
  contract->add_option("--checkpoint", paths.checkpoint,
                       "Checkpoint (default OUT/policy.ckpt)");
  contract->add_option("--data", paths.data,
                       "Dataset (default OUT/dataset.bin)");

  CLI::App* kprime =
      app.add_subcommand("estimate-kprime", "Choose K' from demonstrations");
  AddCommon(kprime, common);
  kprime->add_option("--checkpoint", paths.checkpoint,
                     "Checkpoint (default OUT/policy.ckpt)");
  kprime->add_option("--data", paths.data, "Dataset (default OUT/dataset.bin)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.get_exit_code() != 0 ? e.get_exit_code() : 2;
  }

  try {
    if (gen->parsed()) CmdGenData(common);
    if (train->parsed()) CmdTrain(common, paths);
    if (rollout->parsed()) CmdRollout(common, paths);
    if (bench->parsed()) CmdBench(common, paths, variants);
    if (contract->parsed()) CmdContract(common, paths);
    if (kprime->parsed()) CmdEstimateKprime(common, paths);
  } catch (const std::exception& e) {
    std::string msg = e.what();
    for (char& ch : msg) {
      if (ch == '\n') ch = ' ';
    }
    std::cerr << "error: " << msg << "\n";
    return 1;
  }
  return 0;
}

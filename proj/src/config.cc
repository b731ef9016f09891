#include "rtidp/config.h"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <functional>
#include <sstream>

#include "rtidp/binary_io.h"
#include "rtidp/envs.h"

namespace rtidp {
namespace {

std::string_view Trim(std::string_view s) {
  const size_t b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const size_t e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string_view> SplitList(std::string_view s) {
  std::vector<std::string_view> out;
  size_t start = 0;
  while (true) {
    const size_t comma = s.find(',', start);
    out.push_back(Trim(s.substr(start, comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

template <class T>
T ParseNumber(std::string_view s) {
  s = Trim(s);
  T v{};
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc() || ptr != s.data() + s.size()) {
    throw std::invalid_argument("not a number: '" + std::string(s) + "'");
  }
  if constexpr (std::is_floating_point_v<T>) {
    if (!std::isfinite(v)) throw std::invalid_argument("non-finite value");
  }
  return v;
}

bool ParseBool(std::string_view s) {
  s = Trim(s);
  if (s == "true" || s == "1" || s == "yes") return true;
  if (s == "false" || s == "0" || s == "no") return false;
  throw std::invalid_argument("not a boolean: '" + std::string(s) + "'");
}

std::string Num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

template <class T>
std::string JoinList(const std::vector<T>& v) {
  std::string out;
  for (size_t i = 0; i < v.size(); ++i) {
    if (i) out += ",";
    if constexpr (std::is_floating_point_v<T>) {
      out += Num(v[i]);
    } else {
      out += std::to_string(v[i]);
    }
  }
  return out;
}

std::vector<double> ParseDoubleList(std::string_view s) {
  std::vector<double> out;
  for (std::string_view item : SplitList(s)) {
    out.push_back(ParseNumber<double>(item));
  }
  return out;
}

struct Field {
  const char* key;  // "section.key" or "seed"
  std::function<void(RunConfig&, std::string_view)> set;
  std::function<std::string(const RunConfig&)> get;
};

#define RTIDP_INT(name, member)                                         \
  Field {                                                               \
    name, [](RunConfig& c, std::string_view v) {                        \
      c.member = ParseNumber<decltype(c.member)>(v);                    \
    },                                                                  \
        [](const RunConfig& c) { return std::to_string(c.member); }     \
  }
#define RTIDP_REAL(name, member)                                        \
  Field {                                                               \
    name, [](RunConfig& c, std::string_view v) {                        \
      c.member = ParseNumber<double>(v);                                \
    },                                                                  \
        [](const RunConfig& c) { return Num(c.member); }                \
  }
#define RTIDP_BOOL(name, member)                                        \
  Field {                                                               \
    name, [](RunConfig& c, std::string_view v) {                        \
      c.member = ParseBool(v);                                          \
    },                                                                  \
        [](const RunConfig& c) {                                        \
          return std::string(c.member ? "true" : "false");              \
        }                                                               \
  }
#define RTIDP_STR(name, member)                                         \
  Field {                                                               \
    name, [](RunConfig& c, std::string_view v) {                        \
      c.member = std::string(Trim(v));                                  \
    },                                                                  \
        [](const RunConfig& c) { return c.member; }                     \
  }
#define RTIDP_INTS(name, member)                                        \
  Field {                                                               \
    name, [](RunConfig& c, std::string_view v) {                        \
      c.member = ParseIntList(v);                                       \
    },                                                                  \
        [](const RunConfig& c) { return JoinList(c.member); }           \
  }

const std::vector<Field>& Fields() {
  static const std::vector<Field> fields = {
      RTIDP_INT("seed", seed),
      RTIDP_STR("env.name", env),
      RTIDP_INT("env.n_demos", n_demos),
      RTIDP_INT("env.horizon", horizon),
      RTIDP_INT("env.obs_history", obs_history),
      RTIDP_REAL("env.min_expert_score", min_expert_score),
      RTIDP_REAL("env.discrete_scale", discrete_scale),
      RTIDP_INTS("model.hidden", hidden),
      Field{"model.activation",
            [](RunConfig& c, std::string_view v) {
              c.activation = ParseActivation(Trim(v));
            },
            [](const RunConfig& c) {
              return std::string(ToString(c.activation));
            }},
      RTIDP_INT("model.step_embed_dim", step_embed_dim),
      Field{"schedule.kind",
            [](RunConfig& c, std::string_view v) {
              c.schedule = ParseScheduleKind(Trim(v));
            },
            [](const RunConfig& c) {
              return std::string(ToString(c.schedule));
            }},
      RTIDP_INT("schedule.total_steps", total_steps),
      RTIDP_INTS("sampler.rti_steps", sampler.rti_steps),
      RTIDP_BOOL("sampler.deterministic_final", sampler.deterministic_final),
      RTIDP_BOOL("sampler.renoise", sampler.renoise),
      RTIDP_REAL("sampler.discrete_guess_factor",
                 sampler.discrete_guess_factor),
      RTIDP_INT("train.epochs", train.epochs),
      RTIDP_INT("train.batch_size", train.batch_size),
      RTIDP_REAL("train.learning_rate", train.learning_rate),
      RTIDP_REAL("train.momentum", train.momentum),
      RTIDP_REAL("train.grad_clip", train.grad_clip),
      RTIDP_BOOL("train.cosine_decay", train.cosine_decay),
      Field{"bench.variants",
            [](RunConfig& c, std::string_view v) {
              c.variants.clear();
              if (Trim(v).empty()) return;
              for (std::string_view item : SplitList(v)) {
                c.variants.push_back(ParseVariant(item));
              }
            },
            [](const RunConfig& c) {
              std::string out;
              for (size_t i = 0; i < c.variants.size(); ++i) {
                if (i) out += ",";
                out += ToString(c.variants[i]);
              }
              return out;
            }},
      RTIDP_INT("bench.n_episodes", n_episodes),
      RTIDP_INT("bench.n_checkpoints", n_checkpoints),
      RTIDP_INT("bench.dp_executed", dp_executed),
      RTIDP_INT("bench.episode_cap", episode_cap),
      RTIDP_INT("bench.env_seed_base", env_seed_base),
      RTIDP_STR("bench.checkpoint_dir", checkpoint_dir),
      RTIDP_BOOL("bench.train_missing", train_missing),
      RTIDP_BOOL("bench.record_timing", record_timing),
      RTIDP_INT("bench.threads", threads),
      RTIDP_REAL("bench.scale_factor", scale_variant_factor),
      RTIDP_INT("contract.n_pairs", n_pairs),
      RTIDP_REAL("contract.perturbation_scale", perturbation_scale),
      RTIDP_INT("contract.power_iterations", power_iterations),
      RTIDP_INTS("contract.kprimes", kprimes),
      Field{"contract.delta_norms",
            [](RunConfig& c, std::string_view v) {
              c.delta_norms = ParseDoubleList(v);
            },
            [](const RunConfig& c) { return JoinList(c.delta_norms); }},
      RTIDP_INT("contract.n_trials", n_trials),
      RTIDP_INT("contract.n_conditions", n_conditions),
      RTIDP_INTS("contract.kprime_candidates", kprime_candidates),
      RTIDP_REAL("contract.kprime_tolerance", kprime_tolerance),
      RTIDP_INT("contract.n_transitions", n_transitions),
  };
  return fields;
}

#undef RTIDP_INT
#undef RTIDP_REAL
#undef RTIDP_BOOL
#undef RTIDP_STR
#undef RTIDP_INTS

const Field* FindField(std::string_view key) {
  for (const Field& f : Fields()) {
    if (key == f.key) return &f;
  }
  return nullptr;
}

}  // namespace

std::vector<int> ParseIntList(std::string_view text) {
  std::vector<int> out;
  if (Trim(text).empty()) return out;
  for (std::string_view item : SplitList(text)) {
    out.push_back(ParseNumber<int>(item));
  }
  return out;
}

void SetConfigValue(RunConfig& config, std::string_view dotted_key,
                    std::string_view value) {
  const Field* f = FindField(dotted_key);
  if (f == nullptr) {
    throw ConfigError("unknown config key '" + std::string(dotted_key) + "'");
  }
  try {
    f->set(config, value);
  } catch (const std::invalid_argument& e) {
    throw ConfigError("invalid value for '" + std::string(dotted_key) +
                      "': " + e.what());
  }
}

RunConfig ParseRunConfig(std::string_view text, RunConfig config) {
  static const char* kSections[] = {"env",   "model", "schedule", "sampler",
                                    "train", "bench", "contract"};
  std::string section;
  int line_no = 0;
  size_t pos = 0;
  while (pos <= text.size()) {
    const size_t nl = text.find('\n', pos);
    std::string_view raw = text.substr(
        pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++line_no;
    const std::string where = "config line " + std::to_string(line_no);
    const size_t hash = raw.find('#');
    std::string_view line = Trim(raw.substr(0, hash));
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError(where + ": unterminated section");
      section = std::string(Trim(line.substr(1, line.size() - 2)));
      if (std::find(std::begin(kSections), std::end(kSections), section) ==
          std::end(kSections)) {
        throw ConfigError(where + ": unknown section '" + section + "'");
      }
      continue;
    }
    const size_t eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError(where + ": expected 'key = value'");
    }
    const std::string key(Trim(line.substr(0, eq)));
    const std::string_view value = Trim(line.substr(eq + 1));
    if (key.empty()) throw ConfigError(where + ": empty key");
    const std::string dotted = section.empty() ? key : section + "." + key;
    try {
      SetConfigValue(config, dotted, value);
    } catch (const ConfigError& e) {
      throw ConfigError(where + ": " + e.what());
    }
  }
  return config;
}

RunConfig LoadRunConfig(const std::string& path, RunConfig base) {
  std::string text;
  try {
    text = ReadFileBytes(path);
  } catch (const std::exception&) {
    throw ConfigError("cannot read config file: " + path);
  }
  try {
    return ParseRunConfig(text, std::move(base));
  } catch (const ConfigError& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

void ValidateRunConfig(const RunConfig& c) {
  auto fail = [](const std::string& key, const std::string& why) {
    throw ConfigError("invalid value for '" + key + "': " + why);
  };
  const auto& names = EnvNames();
  if (std::find(names.begin(), names.end(), c.env) == names.end()) {
    fail("env.name", "unknown environment '" + c.env + "'");
  }
  if (c.n_demos < 1) fail("env.n_demos", "must be >= 1");
  if (c.horizon < 1) fail("env.horizon", "must be >= 1");
  if (c.obs_history < 1) fail("env.obs_history", "must be >= 1");
  if (!(c.discrete_scale > 0.0)) fail("env.discrete_scale", "must be > 0");
  for (int h : c.hidden) {
    if (h < 1) fail("model.hidden", "sizes must be positive");
  }
  if (c.step_embed_dim < 2 || c.step_embed_dim % 2) {
    fail("model.step_embed_dim", "must be even and >= 2");
  }
  if (c.total_steps < 2) fail("schedule.total_steps", "must be >= 2");
  try {
    ValidateSteps(c.sampler.rti_steps, c.total_steps);
  } catch (const std::invalid_argument& e) {
    fail("sampler.rti_steps", e.what());
  }
  if (!(c.sampler.discrete_guess_factor > 0.0)) {
    fail("sampler.discrete_guess_factor", "must be > 0");
  }
  if (c.train.epochs < 1) fail("train.epochs", "must be >= 1");
  if (c.train.batch_size < 1) fail("train.batch_size", "must be >= 1");
  if (c.train.learning_rate < 0.0) fail("train.learning_rate", "must be >= 0");
  if (c.train.momentum < 0.0 || c.train.momentum >= 1.0) {
    fail("train.momentum", "must lie in [0, 1)");
  }
  if (!(c.train.grad_clip > 0.0)) fail("train.grad_clip", "must be > 0");
  if (c.n_episodes < 1) fail("bench.n_episodes", "must be >= 1");
  if (c.n_checkpoints < 1) fail("bench.n_checkpoints", "must be >= 1");
  if (c.dp_executed < 1 || c.dp_executed > c.horizon) {
    fail("bench.dp_executed", "must lie in [1, env.horizon]");
  }
  if (c.threads < 0) fail("bench.threads", "must be >= 0");
  if (!(c.scale_variant_factor > 0.0)) fail("bench.scale_factor", "must be > 0");
  if (c.n_pairs < 1) fail("contract.n_pairs", "must be >= 1");
  if (c.perturbation_scale < 0.0) {
    fail("contract.perturbation_scale", "must be >= 0");
  }
  if (c.power_iterations < 0) fail("contract.power_iterations", "must be >= 0");
  if (c.kprimes.empty()) fail("contract.kprimes", "must not be empty");
  for (int k : c.kprimes) {
    if (k < 1 || k > c.total_steps) fail("contract.kprimes", "outside [1, K]");
  }
  for (double d : c.delta_norms) {
    if (d < 0.0) fail("contract.delta_norms", "must be >= 0");
  }
  if (c.delta_norms.empty()) fail("contract.delta_norms", "must not be empty");
  if (c.n_trials < 1) fail("contract.n_trials", "must be >= 1");
  if (c.n_conditions < 1) fail("contract.n_conditions", "must be >= 1");
  if (c.kprime_candidates.empty()) {
    fail("contract.kprime_candidates", "must not be empty");
  }
  for (int k : c.kprime_candidates) {
    if (k < 1 || k > c.total_steps) {
      fail("contract.kprime_candidates", "outside [1, K]");
    }
  }
  if (c.kprime_tolerance < 0.0) fail("contract.kprime_tolerance", "must be >= 0");
  if (c.n_transitions < 1) fail("contract.n_transitions", "must be >= 1");
  const std::vector<bool> mask = MakeEnv(c.env, 0)->spec().discrete_mask;
  const bool discrete = std::find(mask.begin(), mask.end(), true) != mask.end();
  for (Variant v : c.variants) {
    if ((v == Variant::kRtiClip || v == Variant::kRtiScale) && !discrete) {
      fail("bench.variants", std::string(ToString(v)) +
                                 " requires discrete action dimensions");
    }
  }
}

std::string FormatRunConfig(const RunConfig& config) {
  std::ostringstream out;
  std::string section;
  for (const Field& f : Fields()) {
    const std::string_view key = f.key;
    const size_t dot = key.find('.');
    const std::string sec =
        dot == std::string_view::npos ? "" : std::string(key.substr(0, dot));
    if (sec != section) {
      out << "\n[" << sec << "]\n";
      section = sec;
    }
    out << (dot == std::string_view::npos ? key : key.substr(dot + 1)) << " = "
        << f.get(config) << "\n";
  }
  return out.str();
}

std::vector<std::string> ConfigKeys() {
  std::vector<std::string> keys;
  for (const Field& f : Fields()) keys.emplace_back(f.key);
  return keys;
}

DemoOptions ToDemoOptions(const RunConfig& c) {
  DemoOptions d;
  d.horizon = c.horizon;
  d.obs_history = c.obs_history;
  d.min_expert_score = c.min_expert_score;
  return d;
}

ModelConfig ToModelConfig(const RunConfig& c) {
  ModelConfig m;
  m.horizon = c.horizon;
  m.obs_history = c.obs_history;
  m.step_embed_dim = c.step_embed_dim;
  m.total_steps = c.total_steps;
  m.hidden = c.hidden;
  m.activation = c.activation;
  return m;
}

TrainConfig ToTrainConfig(const RunConfig& c) {
  TrainConfig t = c.train;
  t.seed = c.seed;
  return t;
}

BenchConfig ToBenchConfig(const RunConfig& c) {
  BenchConfig b;
  b.env = c.env;
  b.variants = c.variants;
  b.n_episodes = c.n_episodes;
  b.seeds.clear();
  for (int i = 0; i < c.n_checkpoints; ++i) b.seeds.push_back(c.seed + i);
  b.sampler = c.sampler;
  b.dp_executed = c.dp_executed;
  b.episode_cap = c.episode_cap;
  b.env_seed_base = c.env_seed_base;
  b.checkpoint_dir = c.checkpoint_dir;
  b.train_missing = c.train_missing;
  b.record_timing = c.record_timing;
  b.threads = c.threads;
  b.recipe.n_demos = c.n_demos;
  b.recipe.data_seed = c.seed;
  b.recipe.demos = ToDemoOptions(c);
  b.recipe.model = ToModelConfig(c);
  b.recipe.schedule = c.schedule;
  b.recipe.total_steps = c.total_steps;
  b.recipe.train = c.train;
  b.recipe.discrete_scale = c.scale_variant_factor;
  return b;
}

ContractOptions ToContractOptions(const RunConfig& c) {
  ContractOptions o;
  o.lipschitz.n_pairs = c.n_pairs;
  o.lipschitz.perturbation_scale = c.perturbation_scale;
  o.lipschitz.power_iterations = c.power_iterations;
  o.lipschitz.seed = c.seed;
  o.contraction.kprimes = c.kprimes;
  o.contraction.delta_norms = c.delta_norms;
  o.contraction.n_trials = c.n_trials;
  o.contraction.deterministic_final = c.sampler.deterministic_final;
  o.contraction.seed = c.seed;
  o.kprime.candidates = c.kprime_candidates;
  o.kprime.tolerance = c.kprime_tolerance;
  o.kprime.n_transitions = c.n_transitions;
  o.kprime.seed = c.seed;
  o.n_conditions = c.n_conditions;
  return o;
}

}  // namespace rtidp

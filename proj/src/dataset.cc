#include "rtidp/dataset.h"

#include <cmath>
#include <fstream>
#include <iostream>
#include <sstream>
#include <stdexcept>

#include "rtidp/binary_io.h"

namespace rtidp {
namespace {

constexpr char kDataMagic[] = "RTIDPDATA";
constexpr uint32_t kDataVersion = 1;

Vec RoundToFloat(const Vec& v) {
  return v.cast<float>().cast<double>();
}

double Affine(double x, double lo, double hi) {
  return 2.0 * (x - lo) / (hi - lo) - 1.0;
}

}  // namespace

void WriteNormalizerStats(BinaryWriter& w, const Normalizer& n) {
  w.F32s(n.action_min.data(), n.action_min.size());
  w.F32s(n.action_max.data(), n.action_max.size());
  w.F32s(n.obs_min.data(), n.obs_min.size());
  w.F32s(n.obs_max.data(), n.obs_max.size());
}

Normalizer ReadNormalizerStats(BinaryReader& r, int action_dim, int obs_dim,
                               const std::vector<bool>& mask,
                               double discrete_scale) {
  Normalizer n;
  n.action_min.resize(action_dim);
  n.action_max.resize(action_dim);
  n.obs_min.resize(obs_dim);
  n.obs_max.resize(obs_dim);
  r.F32s(n.action_min.data(), action_dim);
  r.F32s(n.action_max.data(), action_dim);
  r.F32s(n.obs_min.data(), obs_dim);
  r.F32s(n.obs_max.data(), obs_dim);
  n.discrete_mask = mask;
  n.discrete_scale = discrete_scale;
  n.action_zero_range.resize(action_dim);
  n.obs_zero_range.resize(obs_dim);
  for (int d = 0; d < action_dim; ++d) {
    n.action_zero_range[d] = !mask[d] && !(n.action_max[d] > n.action_min[d]);
  }
  for (int d = 0; d < obs_dim; ++d) {
    n.obs_zero_range[d] = !(n.obs_max[d] > n.obs_min[d]);
  }
  return n;
}

Vec Normalizer::NormalizeAction(const Vec& a) const {
  Vec out(a.size());
  for (Eigen::Index d = 0; d < a.size(); ++d) {
    if (discrete_mask[d]) {
      out[d] = a[d];
    } else if (action_zero_range[d]) {
      out[d] = 0.0;
    } else {
      out[d] = Affine(a[d], action_min[d], action_max[d]);
    }
  }
  return out;
}

Vec Normalizer::DenormalizeAction(const Vec& a) const {
  Vec out(a.size());
  for (Eigen::Index d = 0; d < a.size(); ++d) {
    if (discrete_mask[d]) {
      out[d] = a[d];
    } else if (action_zero_range[d]) {
      out[d] = action_min[d];
    } else {
      out[d] = (a[d] + 1.0) * 0.5 * (action_max[d] - action_min[d]) +
               action_min[d];
    }
  }
  return out;
}

Vec Normalizer::NormalizeObs(const Vec& o) const {
  Vec out(o.size());
  for (Eigen::Index d = 0; d < o.size(); ++d) {
    out[d] = obs_zero_range[d] ? 0.0 : Affine(o[d], obs_min[d], obs_max[d]);
  }
  return out;
}

Vec Normalizer::DenormalizeObs(const Vec& o) const {
  Vec out(o.size());
  for (Eigen::Index d = 0; d < o.size(); ++d) {
    out[d] = obs_zero_range[d]
                 ? obs_min[d]
                 : (o[d] + 1.0) * 0.5 * (obs_max[d] - obs_min[d]) + obs_min[d];
  }
  return out;
}

Chunk Normalizer::NormalizeChunk(const Chunk& c) const {
  Chunk out(c.rows(), c.cols());
  for (Eigen::Index t = 0; t < c.rows(); ++t) {
    out.row(t) = NormalizeAction(c.row(t).transpose()).transpose();
  }
  return out;
}

Chunk Normalizer::DenormalizeChunk(const Chunk& c) const {
  Chunk out(c.rows(), c.cols());
  for (Eigen::Index t = 0; t < c.rows(); ++t) {
    out.row(t) = DenormalizeAction(c.row(t).transpose()).transpose();
  }
  return out;
}

Vec Normalizer::ToEnvAction(const Vec& normalized) const {
  Vec out = DenormalizeAction(normalized);
  for (Eigen::Index d = 0; d < out.size(); ++d) {
    if (discrete_mask[d]) out[d] *= discrete_scale;
  }
  return out;
}

Chunk Normalizer::ToEnvChunk(const Chunk& normalized) const {
  Chunk out(normalized.rows(), normalized.cols());
  for (Eigen::Index t = 0; t < normalized.rows(); ++t) {
    out.row(t) = ToEnvAction(normalized.row(t).transpose()).transpose();
  }
  return out;
}

size_t Dataset::NumPairs() const {
  size_t n = 0;
  for (const Episode& e : episodes) n += e.actions.size();
  return n;
}

Dataset GenerateDemos(std::string_view env_name, int n_episodes, uint64_t seed,
                      const DemoOptions& options) {
  if (n_episodes < 1) throw std::invalid_argument("n_episodes must be >= 1");
  if (options.horizon < 1 || options.obs_history < 1) {
    throw std::invalid_argument("horizon and obs_history must be >= 1");
  }
  std::unique_ptr<Env> env = MakeEnv(env_name, seed);
  const EnvSpec& spec = env->spec();
  Dataset data;
  data.env_name = spec.name;
  data.horizon = options.horizon;
  data.obs_history = options.obs_history;
  data.obs_dim = spec.obs_dim;
  data.action_dim = spec.action_dim;
  data.discrete_mask = spec.discrete_mask;

  std::seed_seq seq{seed, static_cast<uint64_t>(0x5eed)};
  std::mt19937_64 seeds(seq);
  for (int i = 0; i < n_episodes; ++i) {
    env->Reset(seeds());
    Episode ep;
    for (int t = 0; t < spec.episode_cap; ++t) {
      ep.observations.push_back(RoundToFloat(env->Observe()));
      Vec a = RoundToFloat(env->ExpertAction());
      ep.actions.push_back(a);
      env->Step(a);
    }
    if (env->Score() < options.min_expert_score) {
      ++data.discarded;
      continue;
    }
    data.episodes.push_back(std::move(ep));
  }
  if (data.discarded > 0) {
    std::cerr << "warning: " << data.discarded << " of " << n_episodes
              << " expert episodes discarded on " << spec.name << "\n";
  }
  if (data.episodes.empty()) {
    throw std::runtime_error("expert failed on every episode of " + spec.name);
  }
  data.normalizer = FitNormalizer(data);
  return data;
}

Normalizer FitNormalizer(const Dataset& data) {
  if (data.episodes.empty()) throw std::invalid_argument("empty dataset");
  Normalizer n;
  const double inf = std::numeric_limits<double>::infinity();
  n.action_min = Vec::Constant(data.action_dim, inf);
  n.action_max = Vec::Constant(data.action_dim, -inf);
  n.obs_min = Vec::Constant(data.obs_dim, inf);
  n.obs_max = Vec::Constant(data.obs_dim, -inf);
  for (const Episode& e : data.episodes) {
    for (const Vec& a : e.actions) {
      n.action_min = n.action_min.cwiseMin(a);
      n.action_max = n.action_max.cwiseMax(a);
    }
    for (const Vec& o : e.observations) {
      n.obs_min = n.obs_min.cwiseMin(o);
      n.obs_max = n.obs_max.cwiseMax(o);
    }
  }
  n.discrete_mask = data.discrete_mask;
  n.discrete_scale = data.discrete_scale;
  n.action_zero_range.resize(data.action_dim);
  n.obs_zero_range.resize(data.obs_dim);
  for (int d = 0; d < data.action_dim; ++d) {
    n.action_zero_range[d] =
        !data.discrete_mask[d] && !(n.action_max[d] > n.action_min[d]);
  }
  for (int d = 0; d < data.obs_dim; ++d) {
    n.obs_zero_range[d] = !(n.obs_max[d] > n.obs_min[d]);
  }
  return n;
}

std::vector<TrainPair> MakeTrainPairs(const Dataset& data) {
  const Normalizer& norm = data.normalizer;
  std::vector<TrainPair> pairs;
  pairs.reserve(data.NumPairs());
  for (const Episode& e : data.episodes) {
    const int n = e.size();
    std::vector<Vec> obs, act;
    for (const Vec& o : e.observations) obs.push_back(norm.NormalizeObs(o));
    for (const Vec& a : e.actions) act.push_back(norm.NormalizeAction(a));
    for (int t = 0; t < n; ++t) {
      TrainPair p;
      p.cond.resize(data.obs_history * data.obs_dim);
      for (int h = 0; h < data.obs_history; ++h) {
        const int src = std::max(0, t - (data.obs_history - 1) + h);
        p.cond.segment(h * data.obs_dim, data.obs_dim) = obs[src];
      }
      p.actions.resize(data.horizon, data.action_dim);
      for (int i = 0; i < data.horizon; ++i) {
        p.actions.row(i) = act[std::min(n - 1, t + i)].transpose();
      }
      pairs.push_back(std::move(p));
    }
  }
  return pairs;
}

namespace {

Dataset ApplyDiscreteFactor(const Dataset& data, double divide_by) {
  Dataset out = data;
  for (Episode& e : out.episodes) {
    for (Vec& a : e.actions) {
      for (int d = 0; d < out.action_dim; ++d) {
        if (out.discrete_mask[d]) a[d] /= divide_by;
      }
    }
  }
  out.discrete_scale = data.discrete_scale * divide_by;
  out.normalizer = FitNormalizer(out);
  return out;
}

bool AnyDiscrete(const Dataset& data) {
  for (bool b : data.discrete_mask) {
    if (b) return true;
  }
  return false;
}

}  // namespace

Dataset ScaleDatasetDiscrete(const Dataset& data, double factor) {
  if (!(factor > 0.0)) {
    throw std::invalid_argument("discrete scaling factor must be > 0");
  }
  if (!AnyDiscrete(data)) {
    throw std::invalid_argument("dataset has no discrete action dimension");
  }
  return ApplyDiscreteFactor(data, factor);
}

Dataset UnscaleDatasetDiscrete(const Dataset& data) {
  if (!AnyDiscrete(data)) {
    throw std::invalid_argument("dataset has no discrete action dimension");
  }
  return ApplyDiscreteFactor(data, 1.0 / data.discrete_scale);
}

ConsistencyReport DatasetConsistencyReport(const Dataset& data) {
  if (data.episodes.empty()) throw std::invalid_argument("empty dataset");
  const int dims = data.action_dim;
  ConsistencyReport r;
  r.max_jump.assign(dims, 0.0);
  r.mean_jump.assign(dims, 0.0);
  double cont_sum = 0.0;
  for (const Episode& e : data.episodes) {
    for (size_t t = 1; t < e.actions.size(); ++t) {
      const Vec diff = e.actions[t] - e.actions[t - 1];
      double cont2 = 0.0;
      for (int d = 0; d < dims; ++d) {
        const double j = std::abs(diff[d]);
        r.max_jump[d] = std::max(r.max_jump[d], j);
        r.mean_jump[d] += j;
        if (!data.discrete_mask[d]) cont2 += j * j;
      }
      const double cont = std::sqrt(cont2);
      r.continuous_max = std::max(r.continuous_max, cont);
      cont_sum += cont;
      ++r.transitions;
    }
  }
  if (r.transitions > 0) {
    for (double& m : r.mean_jump) m /= static_cast<double>(r.transitions);
    r.continuous_mean = cont_sum / static_cast<double>(r.transitions);
  }
  r.discrete_exceeds.assign(dims, false);
  for (int d = 0; d < dims; ++d) {
    r.discrete_exceeds[d] =
        data.discrete_mask[d] && r.max_jump[d] > r.continuous_max;
  }
  return r;
}

std::string SerializeDataset(const Dataset& data) {
  BinaryWriter w;
  w.Bytes(std::string_view(kDataMagic, sizeof(kDataMagic) - 1));
  w.U32(kDataVersion);
  w.String(data.env_name);
  w.U32(data.horizon);
  w.U32(data.obs_history);
  w.U32(data.action_dim);
  w.U32(data.obs_dim);
  for (bool b : data.discrete_mask) w.U32(b ? 1 : 0);
  w.F32(data.discrete_scale);
  WriteNormalizerStats(w, data.normalizer);
  w.U32(data.discarded);
  w.U32(static_cast<uint32_t>(data.episodes.size()));
  for (const Episode& e : data.episodes) {
    w.U32(e.size());
    for (const Vec& o : e.observations) w.F32s(o.data(), o.size());
    for (const Vec& a : e.actions) w.F32s(a.data(), a.size());
  }
  return w.buffer();
}

Dataset DeserializeDataset(const std::string& bytes) {
  BinaryReader r(bytes);
  r.ExpectMagic(std::string_view(kDataMagic, sizeof(kDataMagic) - 1));
  const size_t version_at = r.offset();
  const uint32_t version = r.U32();
  if (version != kDataVersion) {
    throw FormatError("unsupported dataset version " + std::to_string(version) +
                      " at offset " + std::to_string(version_at));
  }
  Dataset d;
  d.env_name = r.String();
  d.horizon = static_cast<int>(r.U32());
  d.obs_history = static_cast<int>(r.U32());
  d.action_dim = static_cast<int>(r.U32());
  d.obs_dim = static_cast<int>(r.U32());
  if (d.horizon < 1 || d.obs_history < 1 || d.action_dim < 1 ||
      d.obs_dim < 1 || d.action_dim > 1024 || d.obs_dim > 1024) {
    throw FormatError("implausible dataset header before offset " +
                      std::to_string(r.offset()));
  }
  for (int i = 0; i < d.action_dim; ++i) d.discrete_mask.push_back(r.U32() != 0);
  d.discrete_scale = r.F32();
  d.normalizer = ReadNormalizerStats(r, d.action_dim, d.obs_dim,
                                     d.discrete_mask, d.discrete_scale);
  d.discarded = static_cast<int>(r.U32());
  const uint32_t n_ep = r.U32();
  for (uint32_t i = 0; i < n_ep; ++i) {
    Episode e;
    const uint32_t len = r.U32();
    if (static_cast<size_t>(len) * (d.obs_dim + d.action_dim) * 4 >
        bytes.size()) {
      throw FormatError("episode length exceeds file size at offset " +
                        std::to_string(r.offset()));
    }
    for (uint32_t t = 0; t < len; ++t) {
      Vec o(d.obs_dim);
      r.F32s(o.data(), d.obs_dim);
      e.observations.push_back(std::move(o));
    }
    for (uint32_t t = 0; t < len; ++t) {
      Vec a(d.action_dim);
      r.F32s(a.data(), d.action_dim);
      e.actions.push_back(std::move(a));
    }
    d.episodes.push_back(std::move(e));
  }
  r.ExpectEnd();
  return d;
}

void SaveDataset(const Dataset& data, const std::string& path) {
  BinaryWriter w;
  w.Bytes(SerializeDataset(data));
  w.WriteFile(path);
}

Dataset LoadDataset(const std::string& path) {
  return DeserializeDataset(ReadFileBytes(path));
}

std::string DatasetToCsv(const Dataset& data) {
  std::ostringstream out;
  out.precision(9);
  out << "episode,t";
  for (int d = 0; d < data.obs_dim; ++d) out << ",o" << d;
  for (int d = 0; d < data.action_dim; ++d) out << ",a" << d;
  out << '\n';
  for (size_t i = 0; i < data.episodes.size(); ++i) {
    const Episode& e = data.episodes[i];
    for (int t = 0; t < e.size(); ++t) {
      out << i << ',' << t;
      for (int d = 0; d < data.obs_dim; ++d) out << ',' << e.observations[t][d];
      for (int d = 0; d < data.action_dim; ++d) out << ',' << e.actions[t][d];
      out << '\n';
    }
  }
  return out.str();
}

}  // namespace rtidp

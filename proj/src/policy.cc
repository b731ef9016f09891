#include "rtidp/policy.h"

#include <openssl/evp.h>

#include <cstdio>
#include <stdexcept>

#include "rtidp/binary_io.h"

namespace rtidp {
namespace {

constexpr char kCkptMagic[] = "RTIDPCKPT";
constexpr uint32_t kCkptVersion = 1;

std::string_view Magic() {
  return std::string_view(kCkptMagic, sizeof(kCkptMagic) - 1);
}

void CheckArray(BinaryReader& r, const std::vector<double>& expected,
                const char* name) {
  for (size_t k = 1; k < expected.size(); ++k) {
    const size_t at = r.offset();
    const double v = r.F32();
    if (v != static_cast<double>(static_cast<float>(expected[k]))) {
      throw FormatError(std::string("stored schedule ") + name +
                        " disagrees with its kind at offset " +
                        std::to_string(at));
    }
  }
}

}  // namespace

std::string SerializeCheckpoint(const Policy& p) {
  const ModelConfig& c = p.model.config();
  const NoiseSchedule& s = p.schedule;
  const Normalizer& n = p.normalizer;
  if (s.total_steps() != c.total_steps) {
    throw std::invalid_argument("schedule K does not match the model");
  }
  BinaryWriter w;
  w.Bytes(Magic());
  w.U32(kCkptVersion);
  w.String(p.env_name);
  w.U32(static_cast<uint32_t>(s.kind()));
  w.U32(s.total_steps());
  w.F32s(s.betas().data() + 1, s.total_steps());
  w.F32s(s.alphas().data() + 1, s.total_steps());
  w.F32s(s.alpha_bars().data() + 1, s.total_steps());
  w.F32s(s.sigmas().data() + 1, s.total_steps());
  w.U32(c.action_dim);
  w.U32(c.obs_dim);
  for (bool b : n.discrete_mask) w.U32(b ? 1 : 0);
  w.F32(n.discrete_scale);
  WriteNormalizerStats(w, n);
  w.U32(c.horizon);
  w.U32(c.obs_history);
  w.U32(c.step_embed_dim);
  w.U32(static_cast<uint32_t>(c.activation));
  const Parameters& params = p.model.params();
  w.U32(static_cast<uint32_t>(params.weights.size()));
  for (const auto& wm : params.weights) {
    w.U32(static_cast<uint32_t>(wm.rows()));
    w.U32(static_cast<uint32_t>(wm.cols()));
  }
  for (size_t l = 0; l < params.weights.size(); ++l) {
    const auto& wm = params.weights[l];
    for (Eigen::Index i = 0; i < wm.rows(); ++i) {
      for (Eigen::Index j = 0; j < wm.cols(); ++j) w.F32(wm(i, j));
    }
    w.F32s(params.biases[l].data(), params.biases[l].size());
  }
  return w.buffer();
}

Policy DeserializeCheckpoint(const std::string& bytes) {
  BinaryReader r(bytes);
  r.ExpectMagic(Magic());
  size_t at = r.offset();
  const uint32_t version = r.U32();
  if (version != kCkptVersion) {
    throw FormatError("unsupported checkpoint version " +
                      std::to_string(version) + " at offset " +
                      std::to_string(at));
  }
  Policy p;
  p.env_name = r.String();
  at = r.offset();
  const uint32_t kind = r.U32();
  if (kind > static_cast<uint32_t>(ScheduleKind::kSquaredCosine)) {
    throw FormatError("unknown schedule kind at offset " + std::to_string(at));
  }
  at = r.offset();
  const uint32_t total = r.U32();
  if (total < 2 || total > 100000) {
    throw FormatError("implausible K at offset " + std::to_string(at));
  }
  p.schedule = MakeSchedule(static_cast<ScheduleKind>(kind),
                            static_cast<int>(total));
  CheckArray(r, p.schedule.betas(), "beta");
  CheckArray(r, p.schedule.alphas(), "alpha");
  CheckArray(r, p.schedule.alpha_bars(), "alpha_bar");
  CheckArray(r, p.schedule.sigmas(), "sigma");

  ModelConfig c;
  c.total_steps = static_cast<int>(total);
  at = r.offset();
  c.action_dim = static_cast<int>(r.U32());
  c.obs_dim = static_cast<int>(r.U32());
  if (c.action_dim < 1 || c.obs_dim < 1 || c.action_dim > 1024 ||
      c.obs_dim > 1024) {
    throw FormatError("implausible dimensions at offset " + std::to_string(at));
  }
  std::vector<bool> mask;
  for (int d = 0; d < c.action_dim; ++d) mask.push_back(r.U32() != 0);
  const double discrete_scale = r.F32();
  p.normalizer =
      ReadNormalizerStats(r, c.action_dim, c.obs_dim, mask, discrete_scale);
  c.horizon = static_cast<int>(r.U32());
  c.obs_history = static_cast<int>(r.U32());
  c.step_embed_dim = static_cast<int>(r.U32());
  at = r.offset();
  const uint32_t act = r.U32();
  if (act > static_cast<uint32_t>(Activation::kRelu)) {
    throw FormatError("unknown activation at offset " + std::to_string(at));
  }
  c.activation = static_cast<Activation>(act);
  at = r.offset();
  const uint32_t n_layers = r.U32();
  if (n_layers < 1 || n_layers > 64) {
    throw FormatError("implausible layer count at offset " +
                      std::to_string(at));
  }
  std::vector<std::pair<uint32_t, uint32_t>> shapes;
  for (uint32_t l = 0; l < n_layers; ++l) {
    const uint32_t rows = r.U32();
    const uint32_t cols = r.U32();
    shapes.emplace_back(rows, cols);
  }
  c.hidden.clear();
  for (uint32_t l = 0; l + 1 < n_layers; ++l) {
    c.hidden.push_back(static_cast<int>(shapes[l].first));
  }
  if (static_cast<int>(shapes.front().second) != c.input_dim() ||
      static_cast<int>(shapes.back().first) != c.chunk_size()) {
    throw FormatError("layer shapes inconsistent with the model header at "
                      "offset " + std::to_string(r.offset()));
  }
  for (uint32_t l = 1; l < n_layers; ++l) {
    if (shapes[l].second != shapes[l - 1].first) {
      throw FormatError("layer shapes do not chain");
    }
  }
  DenoiserModel model = DenoiserModel::Zero(c);
  Parameters& params = model.mutable_params();
  for (uint32_t l = 0; l < n_layers; ++l) {
    auto& wm = params.weights[l];
    for (Eigen::Index i = 0; i < wm.rows(); ++i) {
      for (Eigen::Index j = 0; j < wm.cols(); ++j) wm(i, j) = r.F32();
    }
    r.F32s(params.biases[l].data(), params.biases[l].size());
  }
  r.ExpectEnd();
  p.model = std::move(model);
  return p;
}

void SaveCheckpoint(const Policy& policy, const std::string& path) {
  BinaryWriter w;
  w.Bytes(SerializeCheckpoint(policy));
  w.WriteFile(path);
}

Policy LoadCheckpoint(const std::string& path) {
  return DeserializeCheckpoint(ReadFileBytes(path));
}

Policy TrainPolicy(const Dataset& data, ModelConfig model, ScheduleKind kind,
                   int total_steps, const TrainConfig& train,
                   std::vector<double>* loss_curve) {
  model.horizon = data.horizon;
  model.action_dim = data.action_dim;
  model.obs_dim = data.obs_dim;
  model.obs_history = data.obs_history;
  model.total_steps = total_steps;
  Policy p;
  p.env_name = data.env_name;
  p.schedule = MakeSchedule(kind, total_steps);
  p.normalizer = data.normalizer;
  const std::vector<TrainPair> pairs = MakeTrainPairs(data);
  TrainResult r = Train(DenoiserModel(model, train.seed), pairs, p.schedule,
                        train);
  p.model = std::move(r.model);
  if (loss_curve != nullptr) {
    loss_curve->insert(loss_curve->end(), r.loss_curve.begin(),
                       r.loss_curve.end());
  }
  return p;
}

std::string GitBlobHash(const std::string& bytes) {
  const std::string header = "blob " + std::to_string(bytes.size());
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  EVP_DigestInit_ex(ctx, EVP_sha1(), nullptr);
  EVP_DigestUpdate(ctx, header.data(), header.size() + 1);  // includes '\0'
  EVP_DigestUpdate(ctx, bytes.data(), bytes.size());
  EVP_DigestFinal_ex(ctx, digest, &len);
  EVP_MD_CTX_free(ctx);
  std::string hex;
  char buf[3];
  for (unsigned int i = 0; i < len; ++i) {
    std::snprintf(buf, sizeof(buf), "%02x", digest[i]);
    hex += buf;
  }
  return hex;
}

}  // namespace rtidp

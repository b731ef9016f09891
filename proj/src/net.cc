#include "rtidp/net.h"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace rtidp {
namespace {

template <class S>
using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;
template <class S>
using Col = Eigen::Matrix<S, Eigen::Dynamic, 1>;

template <class S>
struct Layers {
  std::vector<Mat<S>> w;
  std::vector<Col<S>> b;
};

template <class S>
void Activate(Activation act, Mat<S>& z) {
  if (act == Activation::kTanh) {
    z = z.array().tanh();
  } else {
    z = z.cwiseMax(S(0));
  }
}

// Mean squared error over the batch (sum over output entries, mean over
// columns) with gradients written into `grad`, which must be pre-sized.
template <class S>
S BatchLossGrad(const std::vector<Mat<S>>& w, const std::vector<Col<S>>& b,
                Activation act, const Mat<S>& x, const Mat<S>& target,
                std::vector<Mat<S>>& gw, std::vector<Col<S>>& gb) {
  const size_t n_layers = w.size();
  const S batch = static_cast<S>(x.cols());
  std::vector<Mat<S>> out(n_layers);
  for (size_t l = 0; l < n_layers; ++l) {
    const Mat<S>& in = l == 0 ? x : out[l - 1];
    out[l].noalias() = w[l] * in;
    out[l].colwise() += b[l];
    if (l + 1 < n_layers) Activate(act, out[l]);
  }
  Mat<S> delta = out.back() - target;
  const S loss = delta.squaredNorm() / batch;
  delta *= S(2) / batch;
  for (size_t l = n_layers; l-- > 0;) {
    const Mat<S>& in = l == 0 ? x : out[l - 1];
    gw[l].noalias() = delta * in.transpose();
    gb[l] = delta.rowwise().sum();
    if (l == 0) break;
    Mat<S> back = w[l].transpose() * delta;
    if (act == Activation::kTanh) {
      back.array() *= S(1) - in.array().square();
    } else {
      back.array() *= (in.array() > S(0)).template cast<S>();
    }
    delta = std::move(back);
  }
  return loss;
}

std::vector<int> LayerSizes(const ModelConfig& c) {
  std::vector<int> sizes;
  sizes.push_back(c.input_dim());
  for (int h : c.hidden) sizes.push_back(h);
  sizes.push_back(c.chunk_size());
  return sizes;
}

void ValidateConfig(const ModelConfig& c) {
  if (c.horizon < 1 || c.action_dim < 1 || c.obs_dim < 1 ||
      c.obs_history < 1 || c.step_embed_dim < 2 || c.step_embed_dim % 2 ||
      c.total_steps < 2) {
    throw std::invalid_argument("invalid model configuration");
  }
  for (int h : c.hidden) {
    if (h < 1) throw std::invalid_argument("hidden sizes must be positive");
  }
}

// Fills the input columns for a batch: noisy chunk, step embedding, cond.
template <class S>
Mat<S> AssembleBatch(const DenoiserModel& model,
                     std::span<const TrainPair> batch,
                     std::span<const NoiseDraw> draws,
                     const NoiseSchedule& schedule, Mat<S>* target) {
  const ModelConfig& c = model.config();
  const int n = static_cast<int>(batch.size());
  Mat<S> x(c.input_dim(), n);
  target->resize(c.chunk_size(), n);
  std::vector<double> column(c.input_dim());
  for (int i = 0; i < n; ++i) {
    const NoiseDraw& d = draws[i];
    const double sa = std::sqrt(schedule.alpha_bar(d.k));
    const double sn = std::sqrt(1.0 - schedule.alpha_bar(d.k));
    Chunk noisy = sa * batch[i].actions + sn * d.eps;
    model.AssembleInput(noisy, d.k, batch[i].cond, column);
    for (int r = 0; r < c.input_dim(); ++r) x(r, i) = static_cast<S>(column[r]);
    for (int r = 0; r < c.chunk_size(); ++r) {
      (*target)(r, i) = static_cast<S>(d.eps.data()[r]);
    }
  }
  return x;
}

NoiseDraw DrawNoise(const ModelConfig& c, int total_steps,
                    std::mt19937_64& rng) {
  std::uniform_int_distribution<int> pick_k(1, total_steps);
  std::normal_distribution<double> normal;
  NoiseDraw d;
  d.k = pick_k(rng);
  d.eps.resize(c.horizon, c.action_dim);
  for (Eigen::Index i = 0; i < d.eps.size(); ++i) d.eps.data()[i] = normal(rng);
  return d;
}

}  // namespace

std::string_view ToString(Activation a) {
  return a == Activation::kTanh ? "tanh" : "relu";
}

Activation ParseActivation(std::string_view name) {
  if (name == "tanh") return Activation::kTanh;
  if (name == "relu") return Activation::kRelu;
  throw std::invalid_argument("unknown activation: " + std::string(name));
}

void StepEmbedding(int k, int total_steps, std::span<double> out) {
  const double t = static_cast<double>(k) / total_steps;
  const size_t half = out.size() / 2;
  for (size_t i = 0; i < half; ++i) {
    const double angle = std::numbers::pi * std::ldexp(1.0, static_cast<int>(i)) * t;
    out[2 * i] = std::sin(angle);
    out[2 * i + 1] = std::cos(angle);
  }
}

size_t Parameters::Count() const {
  size_t n = 0;
  for (size_t l = 0; l < weights.size(); ++l) {
    n += weights[l].size() + biases[l].size();
  }
  return n;
}

double& Parameters::At(size_t i) {
  for (size_t l = 0; l < weights.size(); ++l) {
    const size_t nw = weights[l].size();
    if (i < nw) return weights[l].data()[i];
    i -= nw;
    const size_t nb = biases[l].size();
    if (i < nb) return biases[l].data()[i];
    i -= nb;
  }
  throw std::out_of_range("parameter index out of range");
}

double Parameters::At(size_t i) const {
  return const_cast<Parameters*>(this)->At(i);
}

void Parameters::SetZero() {
  for (auto& w : weights) w.setZero();
  for (auto& b : biases) b.setZero();
}

double Parameters::SquaredNorm() const {
  double s = 0.0;
  for (size_t l = 0; l < weights.size(); ++l) {
    s += weights[l].squaredNorm() + biases[l].squaredNorm();
  }
  return s;
}

DenoiserModel::DenoiserModel(const ModelConfig& config, uint64_t seed)
    : config_(config) {
  ValidateConfig(config);
  const std::vector<int> sizes = LayerSizes(config);
  std::mt19937_64 rng(seed);
  for (size_t l = 0; l + 1 < sizes.size(); ++l) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(sizes[l]));
    std::uniform_real_distribution<double> u(-bound, bound);
    Eigen::MatrixXd w(sizes[l + 1], sizes[l]);
    for (Eigen::Index i = 0; i < w.size(); ++i) {
      w.data()[i] = static_cast<float>(u(rng));
    }
    Eigen::VectorXd b(sizes[l + 1]);
    for (Eigen::Index i = 0; i < b.size(); ++i) {
      b.data()[i] = static_cast<float>(u(rng));
    }
    params_.weights.push_back(std::move(w));
    params_.biases.push_back(std::move(b));
  }
}

DenoiserModel DenoiserModel::Zero(const ModelConfig& config) {
  DenoiserModel m(config, 0);
  m.params_.SetZero();
  return m;
}

void DenoiserModel::AssembleInput(const Chunk& noisy, int k, const Vec& cond,
                                  std::span<double> out) const {
  const ModelConfig& c = config_;
  if (noisy.rows() != c.horizon || noisy.cols() != c.action_dim) {
    std::ostringstream msg;
    msg << "action chunk shape " << noisy.rows() << "x" << noisy.cols()
        << " does not match model " << c.horizon << "x" << c.action_dim;
    throw std::invalid_argument(msg.str());
  }
  if (cond.size() != c.cond_dim()) {
    throw std::invalid_argument("conditioning size " +
                                std::to_string(cond.size()) +
                                " does not match model " +
                                std::to_string(c.cond_dim()));
  }
  if (k < 1 || k > c.total_steps) {
    throw std::invalid_argument("step index " + std::to_string(k) +
                                " outside [1, " +
                                std::to_string(c.total_steps) + "]");
  }
  if (out.size() != static_cast<size_t>(c.input_dim())) {
    throw std::invalid_argument("input buffer has wrong size");
  }
  const int n_chunk = c.chunk_size();
  std::copy_n(noisy.data(), n_chunk, out.begin());
  StepEmbedding(k, c.total_steps, out.subspan(n_chunk, c.step_embed_dim));
  std::copy_n(cond.data(), c.cond_dim(),
              out.begin() + n_chunk + c.step_embed_dim);
}

Chunk DenoiserModel::Forward(const Chunk& noisy, int k, const Vec& cond) const {
  Eigen::VectorXd h(config_.input_dim());
  AssembleInput(noisy, k, cond, std::span<double>(h.data(), h.size()));
  const size_t n_layers = params_.weights.size();
  for (size_t l = 0; l < n_layers; ++l) {
    Eigen::VectorXd z = params_.biases[l];
    z.noalias() += params_.weights[l] * h;
    if (l + 1 < n_layers) {
      if (config_.activation == Activation::kTanh) {
        z = z.array().tanh();
      } else {
        z = z.cwiseMax(0.0);
      }
    }
    h = std::move(z);
  }
  return Eigen::Map<const Chunk>(h.data(), config_.horizon, config_.action_dim);
}

Chunk DenoiserModel::InputVjp(const Chunk& noisy, int k, const Vec& cond,
                              const Chunk& cotangent) const {
  if (cotangent.rows() != config_.horizon ||
      cotangent.cols() != config_.action_dim) {
    throw std::invalid_argument("cotangent shape does not match model");
  }
  const size_t n_layers = params_.weights.size();
  std::vector<Eigen::VectorXd> acts(n_layers);
  Eigen::VectorXd x(config_.input_dim());
  AssembleInput(noisy, k, cond, std::span<double>(x.data(), x.size()));
  for (size_t l = 0; l + 1 < n_layers; ++l) {
    const Eigen::VectorXd& in = l == 0 ? x : acts[l - 1];
    Eigen::VectorXd z = params_.biases[l];
    z.noalias() += params_.weights[l] * in;
    if (config_.activation == Activation::kTanh) {
      acts[l] = z.array().tanh();
    } else {
      acts[l] = z.cwiseMax(0.0);
    }
  }
  Eigen::VectorXd delta =
      Eigen::Map<const Eigen::VectorXd>(cotangent.data(), cotangent.size());
  for (size_t l = n_layers; l-- > 0;) {
    Eigen::VectorXd back = params_.weights[l].transpose() * delta;
    if (l == 0) {
      delta = std::move(back);
      break;
    }
    const Eigen::VectorXd& in = acts[l - 1];
    if (config_.activation == Activation::kTanh) {
      back.array() *= 1.0 - in.array().square();
    } else {
      back.array() *= (in.array() > 0.0).cast<double>();
    }
    delta = std::move(back);
  }
  return Eigen::Map<const Chunk>(delta.data(), config_.horizon,
                                 config_.action_dim);
}

LossGrad LossAndGrad(const DenoiserModel& model,
                     std::span<const TrainPair> batch,
                     std::span<const NoiseDraw> draws,
                     const NoiseSchedule& schedule) {
  if (batch.empty()) throw std::invalid_argument("empty batch");
  if (draws.size() != batch.size()) {
    throw std::invalid_argument("one noise draw per sample required");
  }
  Mat<double> target;
  Mat<double> x = AssembleBatch<double>(model, batch, draws, schedule, &target);
  LossGrad out;
  out.grad = model.params();
  out.loss = BatchLossGrad<double>(model.params().weights,
                                   model.params().biases,
                                   model.config().activation, x, target,
                                   out.grad.weights, out.grad.biases);
  return out;
}

LossGrad LossAndGrad(const DenoiserModel& model,
                     std::span<const TrainPair> batch,
                     const NoiseSchedule& schedule, std::mt19937_64& rng) {
  if (batch.empty()) throw std::invalid_argument("empty batch");
  std::vector<NoiseDraw> draws;
  draws.reserve(batch.size());
  for (size_t i = 0; i < batch.size(); ++i) {
    draws.push_back(DrawNoise(model.config(), schedule.total_steps(), rng));
  }
  return LossAndGrad(model, batch, draws, schedule);
}

TrainResult Train(const DenoiserModel& init, std::span<const TrainPair> data,
                  const NoiseSchedule& schedule, const TrainConfig& config) {
  if (data.empty()) throw std::invalid_argument("empty training set");
  if (config.epochs < 1 || config.batch_size < 1 ||
      config.learning_rate < 0.0 || config.grad_clip <= 0.0 ||
      config.momentum < 0.0 || config.momentum >= 1.0) {
    throw std::invalid_argument("invalid training configuration");
  }
  if (schedule.total_steps() != init.config().total_steps) {
    throw std::invalid_argument("schedule K does not match model K");
  }
  const Parameters& p0 = init.params();
  const size_t n_layers = p0.weights.size();
  std::vector<Mat<float>> w(n_layers), gw(n_layers), vw(n_layers);
  std::vector<Col<float>> b(n_layers), gb(n_layers), vb(n_layers);
  for (size_t l = 0; l < n_layers; ++l) {
    w[l] = p0.weights[l].cast<float>();
    b[l] = p0.biases[l].cast<float>();
    gw[l] = Mat<float>::Zero(w[l].rows(), w[l].cols());
    vw[l] = gw[l];
    gb[l] = Col<float>::Zero(b[l].size());
    vb[l] = gb[l];
  }

  std::mt19937_64 rng(config.seed);
  std::vector<size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  const size_t batches_per_epoch =
      (data.size() + config.batch_size - 1) / config.batch_size;
  const double total_updates =
      static_cast<double>(batches_per_epoch) * config.epochs;
  size_t update = 0;

  TrainResult result;
  std::vector<TrainPair> batch;
  std::vector<NoiseDraw> draws;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_loss = 0.0;
    for (size_t start = 0; start < data.size(); start += config.batch_size) {
      const size_t stop = std::min(data.size(), start + config.batch_size);
      batch.clear();
      draws.clear();
      for (size_t i = start; i < stop; ++i) {
        batch.push_back(data[order[i]]);
        draws.push_back(DrawNoise(init.config(), schedule.total_steps(), rng));
      }
      Mat<float> target;
      Mat<float> x = AssembleBatch<float>(init, batch, draws, schedule, &target);
      const float loss = BatchLossGrad<float>(w, b, init.config().activation, x,
                                              target, gw, gb);
      if (!std::isfinite(loss)) {
        std::ostringstream msg;
        msg << "non-finite training loss at epoch " << epoch << ", update "
            << update;
        throw NumericalError(msg.str());
      }
      epoch_loss += static_cast<double>(loss) * (stop - start);

      double norm2 = 0.0;
      for (size_t l = 0; l < n_layers; ++l) {
        norm2 += gw[l].cast<double>().squaredNorm() +
                 gb[l].cast<double>().squaredNorm();
      }
      const double norm = std::sqrt(norm2);
      const float clip =
          norm > config.grad_clip ? static_cast<float>(config.grad_clip / norm)
                                  : 1.0f;
      double lr = config.learning_rate;
      if (config.cosine_decay) {
        lr *= 0.5 * (1.0 + std::cos(std::numbers::pi * update / total_updates));
      }
      const float mu = static_cast<float>(config.momentum);
      const float step = static_cast<float>(lr);
      for (size_t l = 0; l < n_layers; ++l) {
        vw[l] = mu * vw[l] + clip * gw[l];
        vb[l] = mu * vb[l] + clip * gb[l];
        w[l] -= step * vw[l];
        b[l] -= step * vb[l];
      }
      ++update;
    }
    result.loss_curve.push_back(epoch_loss / static_cast<double>(data.size()));
  }

  result.model = init;
  Parameters& out = result.model.mutable_params();
  for (size_t l = 0; l < n_layers; ++l) {
    out.weights[l] = w[l].cast<double>();
    out.biases[l] = b[l].cast<double>();
  }
  return result;
}

}  // namespace rtidp

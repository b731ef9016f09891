#ifndef RTIDP_NET_H_
#define RTIDP_NET_H_

#include <cstdint>
#include <random>
#include <span>
#include <string_view>
#include <vector>

#include "rtidp/schedule.h"
#include "rtidp/types.h"

namespace rtidp {

enum class Activation { kTanh, kRelu };
std::string_view ToString(Activation a);
Activation ParseActivation(std::string_view name);

struct ModelConfig {
  int horizon = 8;      // T
  int action_dim = 2;   // D
  int obs_dim = 2;      // per frame
  int obs_history = 2;  // frames concatenated into the conditioning
  int step_embed_dim = 16;
  int total_steps = 100;  // K, used to normalise the step index
  std::vector<int> hidden = {256, 256, 256};
  Activation activation = Activation::kRelu;

  int chunk_size() const { return horizon * action_dim; }
  int cond_dim() const { return obs_history * obs_dim; }
  int input_dim() const { return chunk_size() + step_embed_dim + cond_dim(); }
};

// Sinusoidal features of k / K: pairs (sin, cos) at frequencies pi * 2^i.
void StepEmbedding(int k, int total_steps, std::span<double> out);

// Weights and biases of a fully connected network. Layer l maps
// sizes[l] -> sizes[l + 1]; hidden layers use the activation, the output
// layer is linear.
struct Parameters {
  std::vector<Eigen::MatrixXd> weights;
  std::vector<Eigen::VectorXd> biases;

  size_t Count() const;
  // Flat view over all entries: layer by layer, weights (column-major)
  // then biases.
  double& At(size_t i);
  double At(size_t i) const;
  void SetZero();
  double SquaredNorm() const;
};

// Noise predictor eps_theta(A_k, k, O).
class DenoiserModel {
 public:
  DenoiserModel() = default;
  // Initialises weights uniformly in +-1/sqrt(fan_in) from `seed`.
  DenoiserModel(const ModelConfig& config, uint64_t seed);
  // All parameters zero.
  static DenoiserModel Zero(const ModelConfig& config);

  const ModelConfig& config() const { return config_; }
  const Parameters& params() const { return params_; }
  Parameters& mutable_params() { return params_; }

  // `cond` is the flattened observation history (obs_history * obs_dim).
  // Throws std::invalid_argument on shape mismatch or k outside [1, K].
  Chunk Forward(const Chunk& noisy, int k, const Vec& cond) const;

  // Gradient of <cotangent, Forward(noisy, k, cond)> with respect to the
  // noisy chunk.
  Chunk InputVjp(const Chunk& noisy, int k, const Vec& cond,
                 const Chunk& cotangent) const;

  // Writes the network input for one sample into `out`.
  void AssembleInput(const Chunk& noisy, int k, const Vec& cond,
                     std::span<double> out) const;

 private:
  ModelConfig config_;
  Parameters params_;
};

// One training pair in normalised units.
struct TrainPair {
  Vec cond;      // flattened observation history
  Chunk actions; // clean chunk A_0
};

// Noise level and noise draw attached to a pair for a loss evaluation.
struct NoiseDraw {
  int k = 1;
  Chunk eps;
};

struct LossGrad {
  double loss = 0.0;
  Parameters grad;
};

// Mean over the batch of ||eps - eps_theta(A_k, k, O)||^2 with
// A_k = sqrt(abar_k) A_0 + sqrt(1 - abar_k) eps, and its exact gradient.
LossGrad LossAndGrad(const DenoiserModel& model,
                     std::span<const TrainPair> batch,
                     std::span<const NoiseDraw> draws,
                     const NoiseSchedule& schedule);

// Draws k ~ U{1..K} and eps ~ N(0, I) per sample from `rng`, then
// evaluates the loss above. Throws std::invalid_argument on empty batch.
LossGrad LossAndGrad(const DenoiserModel& model,
                     std::span<const TrainPair> batch,
                     const NoiseSchedule& schedule, std::mt19937_64& rng);

struct TrainConfig {
  int epochs = 150;
  int batch_size = 256;
  double learning_rate = 0.2;
  double momentum = 0.9;
  double grad_clip = 1.0;
  bool cosine_decay = true;
  uint64_t seed = 0;
};

struct TrainResult {
  DenoiserModel model;
  std::vector<double> loss_curve;  // mean loss per epoch
};

// Minibatch SGD with global-norm clipping. Arithmetic runs in single
// precision; the returned parameters are exactly representable as float.
// Throws NumericalError if the loss becomes non-finite.
TrainResult Train(const DenoiserModel& init, std::span<const TrainPair> data,
                  const NoiseSchedule& schedule, const TrainConfig& config);

}  // namespace rtidp

#endif  // RTIDP_NET_H_

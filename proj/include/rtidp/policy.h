#ifndef RTIDP_POLICY_H_
#define RTIDP_POLICY_H_

#include <string>
#include <vector>

#include "rtidp/dataset.h"
#include "rtidp/net.h"
#include "rtidp/schedule.h"

namespace rtidp {

// Everything needed to act in an environment: the trained noise predictor,
// the schedule it was trained with and the data normaliser.
struct Policy {
  std::string env_name;
  DenoiserModel model;
  NoiseSchedule schedule;
  Normalizer normalizer;
};

// Binary layout ("RTIDPCKPT", version 1), all little-endian:
//   magic[9] u32:version str:env_name
//   u32:schedule_kind u32:K f32[K]:beta f32[K]:alpha f32[K]:alpha_bar
//   f32[K]:sigma
//   u32:D u32:obs_dim u32[D]:discrete_mask f32:discrete_scale
//   f32[D]:action_min f32[D]:action_max f32[obs]:obs_min f32[obs]:obs_max
//   u32:T u32:obs_history u32:step_embed_dim u32:activation
//   u32:n_layers {u32:rows u32:cols}*n_layers
//   {f32[rows*cols]:weights (row-major) f32[rows]:bias}*n_layers
// where str is u32 length + bytes. The schedule is rebuilt from kind and K
// on load and checked against the stored arrays.
std::string SerializeCheckpoint(const Policy& policy);
Policy DeserializeCheckpoint(const std::string& bytes);
void SaveCheckpoint(const Policy& policy, const std::string& path);
Policy LoadCheckpoint(const std::string& path);

// Trains a noise predictor on `data`. Data-dependent fields of `model`
// (horizon, dims, history, K) are taken from `data` and `total_steps`.
// The per-epoch loss is appended to `loss_curve` when non-null.
Policy TrainPolicy(const Dataset& data, ModelConfig model, ScheduleKind kind,
                   int total_steps, const TrainConfig& train,
                   std::vector<double>* loss_curve = nullptr);

// Hex SHA-1 of "blob <size>\0<bytes>", as git computes object ids.
std::string GitBlobHash(const std::string& bytes);

}  // namespace rtidp

#endif  // RTIDP_POLICY_H_

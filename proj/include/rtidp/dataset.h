#ifndef RTIDP_DATASET_H_
#define RTIDP_DATASET_H_

#include <cstdint>
#include <string>
#include <vector>

#include "rtidp/envs.h"
#include "rtidp/net.h"
#include "rtidp/types.h"

namespace rtidp {

class BinaryWriter;
class BinaryReader;

// Per-dimension affine maps to [-1, 1] for actions and observations.
// Discrete action dimensions pass through unchanged; `discrete_scale`
// records the factor they were divided by so that executed actions can be
// rescaled before stepping the environment.
struct Normalizer {
  Vec action_min, action_max;
  Vec obs_min, obs_max;
  std::vector<bool> discrete_mask;
  double discrete_scale = 1.0;
  // Dimensions whose range was zero; they normalise to 0.
  std::vector<bool> action_zero_range, obs_zero_range;

  Vec NormalizeAction(const Vec& a) const;
  Vec DenormalizeAction(const Vec& a) const;
  Vec NormalizeObs(const Vec& o) const;
  Vec DenormalizeObs(const Vec& o) const;
  Chunk NormalizeChunk(const Chunk& c) const;
  Chunk DenormalizeChunk(const Chunk& c) const;
  // Normalised model output -> world-unit command for Env::Step.
  Vec ToEnvAction(const Vec& normalized) const;
  Chunk ToEnvChunk(const Chunk& normalized) const;
};

struct Episode {
  std::vector<Vec> observations;  // o_t
  std::vector<Vec> actions;       // a_t, executed after observing o_t
  int size() const { return static_cast<int>(actions.size()); }
};

struct Dataset {
  std::string env_name;
  int horizon = 8;       // T
  int obs_history = 2;
  int obs_dim = 0;
  int action_dim = 0;
  std::vector<bool> discrete_mask;
  double discrete_scale = 1.0;
  Normalizer normalizer;
  std::vector<Episode> episodes;
  int discarded = 0;  // expert episodes that failed and were dropped

  size_t NumPairs() const;
};

struct DemoOptions {
  int horizon = 8;
  int obs_history = 2;
  // Expert episodes scoring below this are discarded.
  double min_expert_score = 0.95;
};

// Rolls out the scripted expert for `n_episodes` seeded episodes. Stored
// values are rounded to single precision so that file round trips are
// exact. Throws std::invalid_argument if n_episodes < 1.
Dataset GenerateDemos(std::string_view env_name, int n_episodes, uint64_t seed,
                      const DemoOptions& options = {});

// Min/max statistics over all stored observations and actions.
Normalizer FitNormalizer(const Dataset& data);

// Training pairs in normalised units: conditioning = observation history
// (oldest first, padded with o_0), chunk = a_t..a_{t+T-1} padded with the
// final action.
std::vector<TrainPair> MakeTrainPairs(const Dataset& data);

// Divides the discrete action dimensions by `factor` and records it.
// Throws std::invalid_argument if factor <= 0 or no dimension is discrete.
Dataset ScaleDatasetDiscrete(const Dataset& data, double factor);
// Inverse of ScaleDatasetDiscrete, undoing the recorded factor.
Dataset UnscaleDatasetDiscrete(const Dataset& data);

struct ConsistencyReport {
  // Per action dimension: max and mean |a_{t+1,d} - a_{t,d}|.
  std::vector<double> max_jump, mean_jump;
  // Euclidean norm over the continuous dimensions.
  double continuous_max = 0.0, continuous_mean = 0.0;
  // Discrete dimensions whose max jump exceeds continuous_max.
  std::vector<bool> discrete_exceeds;
  size_t transitions = 0;
};

// Scans consecutive actions within every episode, in stored units.
// Throws std::invalid_argument on an empty dataset.
ConsistencyReport DatasetConsistencyReport(const Dataset& data);

// Normaliser statistics as stored in dataset and checkpoint files.
void WriteNormalizerStats(BinaryWriter& w, const Normalizer& n);
Normalizer ReadNormalizerStats(BinaryReader& r, int action_dim, int obs_dim,
                               const std::vector<bool>& mask,
                               double discrete_scale);

// Binary layout documented in README ("RTIDPDATA", version 1).
std::string SerializeDataset(const Dataset& data);
Dataset DeserializeDataset(const std::string& bytes);
void SaveDataset(const Dataset& data, const std::string& path);
Dataset LoadDataset(const std::string& path);
// One row per step: episode, t, o_0..o_{n-1}, a_0..a_{D-1}.
std::string DatasetToCsv(const Dataset& data);

}  // namespace rtidp

#endif  // RTIDP_DATASET_H_

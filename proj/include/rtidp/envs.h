#ifndef RTIDP_ENVS_H_
#define RTIDP_ENVS_H_

#include <array>
#include <cstdint>
#include <memory>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "rtidp/types.h"

namespace rtidp {

struct EnvSpec {
  std::string name;
  int obs_dim = 0;
  int action_dim = 0;
  std::vector<bool> discrete_mask;  // one flag per action dimension
  int episode_cap = 0;
  // Bound on ||a_{t+1} - a_t|| over the continuous action dimensions of
  // expert data, in world units.
  double data_lipschitz = 0.0;
};

// A 2D kinematic task with a scripted expert. Positions live in roughly
// [-1, 1]^2 and actions are commanded agent positions; the agent moves
// toward the command by at most kAgentMaxStep per step.
class Env {
 public:
  virtual ~Env() = default;

  virtual const EnvSpec& spec() const = 0;
  // Resets the state and the expert from `seed`; returns the first
  // observation.
  virtual Vec Reset(uint64_t seed) = 0;
  virtual Vec Step(const Vec& action) = 0;
  virtual Vec Observe() const = 0;
  // Task score in [0, 1] for the current state.
  virtual double Score() const = 0;
  // Next action of the scripted expert for the current state.
  virtual Vec ExpertAction() = 0;
  // Behaviour mode of a chunk of world-unit actions (0 when the task has a
  // single mode).
  virtual int ModeOf(const Chunk& /*actions*/) const { return 0; }
  virtual std::unique_ptr<Env> Clone() const = 0;

  int t() const { return t_; }

 protected:
  int t_ = 0;
};

inline constexpr double kAgentMaxStep = 0.08;
inline constexpr double kExpertMaxSpeed = 0.05;
inline constexpr double kExpertAccel = 0.005;

// Names: reach2d_bimodal, pushL, pick_discrete. Throws
// std::invalid_argument for anything else.
std::unique_ptr<Env> MakeEnv(std::string_view name, uint64_t seed);
const std::vector<std::string>& EnvNames();

// Point agent that must reach one of two goals mirrored about x = 0.
class Reach2dBimodal final : public Env {
 public:
  static constexpr std::array<double, 2> kGoalLeft = {-0.6, 0.5};
  static constexpr std::array<double, 2> kGoalRight = {0.6, 0.5};
  static constexpr double kSuccessRadius = 0.1;

  Reach2dBimodal();
  const EnvSpec& spec() const override { return spec_; }
  Vec Reset(uint64_t seed) override;
  Vec Step(const Vec& action) override;
  Vec Observe() const override;
  double Score() const override;
  Vec ExpertAction() override;
  // Sign of the final waypoint's x coordinate.
  int ModeOf(const Chunk& actions) const override;
  std::unique_ptr<Env> Clone() const override;

  int expert_goal() const { return expert_goal_; }

 private:
  EnvSpec spec_;
  Eigen::Vector2d agent_, prev_agent_;
  int expert_goal_ = 1;  // -1 left, +1 right
};

// Disk agent pushing an L-shaped block (translation only, sticking contact
// inside the friction cone) onto a fixed target footprint.
class PushL final : public Env {
 public:
  static constexpr double kAgentRadius = 0.05;
  static constexpr double kFrictionCoeff = 0.6;
  static constexpr double kHalfExtent = 0.18;
  static constexpr double kBarWidth = 0.12;
  static constexpr double kCoverageForFullScore = 0.9;
  static constexpr std::array<double, 2> kTarget = {0.35, 0.0};

  PushL();
  const EnvSpec& spec() const override { return spec_; }
  Vec Reset(uint64_t seed) override;
  Vec Step(const Vec& action) override;
  Vec Observe() const override;
  // min(1, coverage / kCoverageForFullScore) with coverage the fraction of
  // the target footprint covered by the block.
  double Score() const override;
  Vec ExpertAction() override;
  std::unique_ptr<Env> Clone() const override;

  double Coverage() const;
  const Eigen::Vector2d& block() const { return block_; }
  const Eigen::Vector2d& agent() const { return agent_; }
  // Test hook.
  void SetState(const Eigen::Vector2d& agent, const Eigen::Vector2d& block);

 private:
  void ResolveContact(const Eigen::Vector2d& motion);

  EnvSpec spec_;
  Eigen::Vector2d agent_, prev_agent_, block_;
};

// Agent with a binary gripper (action dimension 2, encoded -1 open,
// +1 closed) that must carry an object to a goal and release it.
class PickDiscrete final : public Env {
 public:
  static constexpr double kGraspRadius = 0.05;
  static constexpr double kGoalRadius = 0.1;
  static constexpr std::array<double, 2> kGoal = {0.0, 0.6};

  PickDiscrete();
  const EnvSpec& spec() const override { return spec_; }
  Vec Reset(uint64_t seed) override;
  Vec Step(const Vec& action) override;
  Vec Observe() const override;
  // 1 when the object rests inside the goal region with the gripper open.
  double Score() const override;
  Vec ExpertAction() override;
  std::unique_ptr<Env> Clone() const override;

  bool holding() const { return holding_; }

 private:
  EnvSpec spec_;
  Eigen::Vector2d agent_, prev_agent_, object_;
  double gripper_ = -1.0;
  bool holding_ = false;
};

}  // namespace rtidp

#endif  // RTIDP_ENVS_H_

#include "rtidp/envs.h"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace rtidp {
namespace {

using Eigen::Vector2d;

Vector2d MoveToward(const Vector2d& from, const Vector2d& command) {
  Vector2d d = command - from;
  const double n = d.norm();
  if (n > kAgentMaxStep) d *= kAgentMaxStep / n;
  return from + d;
}

// One step of a smooth point-to-point motion: speed ramps up by at most
// kExpertAccel per step, is capped at kExpertMaxSpeed and decays as
// sqrt(2 a d) near the target so the agent stops on it.
Vector2d ApproachStep(const Vector2d& pos, const Vector2d& vel,
                      const Vector2d& target) {
  const Vector2d d = target - pos;
  const double dist = d.norm();
  if (dist < 1e-12) return target;
  const Vector2d dir = d / dist;
  const double along = std::max(0.0, vel.dot(dir));
  const double speed =
      std::min({kExpertMaxSpeed, along + kExpertAccel,
                std::sqrt(2.0 * kExpertAccel * dist), dist});
  return pos + speed * dir;
}

struct Rect {
  double x0, x1, y0, y1;
  double Area() const { return (x1 - x0) * (y1 - y0); }
};

double Overlap(const Rect& a, const Rect& b) {
  const double w = std::min(a.x1, b.x1) - std::max(a.x0, b.x0);
  const double h = std::min(a.y1, b.y1) - std::max(a.y0, b.y0);
  return w > 0.0 && h > 0.0 ? w * h : 0.0;
}

std::array<Rect, 2> LRects(const Vector2d& c) {
  const double h = PushL::kHalfExtent;
  const double w = PushL::kBarWidth;
  return {Rect{c.x() - h, c.x() - h + w, c.y() - h, c.y() + h},
          Rect{c.x() - h + w, c.x() + h, c.y() - h, c.y() - h + w}};
}

// Closest point of the L footprint to p; returns the distance.
double ClosestOnL(const Vector2d& block, const Vector2d& p, Vector2d* closest) {
  double best = std::numeric_limits<double>::infinity();
  for (const Rect& r : LRects(block)) {
    const Vector2d q(std::clamp(p.x(), r.x0, r.x1),
                     std::clamp(p.y(), r.y0, r.y1));
    const double d = (q - p).norm();
    if (d < best) {
      best = d;
      *closest = q;
    }
  }
  return best;
}

Vector2d Uniform2(std::mt19937_64& rng, double x0, double x1, double y0,
                  double y1) {
  std::uniform_real_distribution<double> ux(x0, x1);
  std::uniform_real_distribution<double> uy(y0, y1);
  const double x = ux(rng);
  return {x, uy(rng)};
}

Vector2d ToVec2(const std::array<double, 2>& a) { return {a[0], a[1]}; }

void CheckAction(const Vec& action, int dim) {
  if (action.size() != dim) {
    throw std::invalid_argument("action has dimension " +
                                std::to_string(action.size()) + ", expected " +
                                std::to_string(dim));
  }
  if (!action.allFinite()) throw std::invalid_argument("non-finite action");
}

}  // namespace

const std::vector<std::string>& EnvNames() {
  static const std::vector<std::string> names = {"reach2d_bimodal", "pushL",
                                                 "pick_discrete"};
  return names;
}

std::unique_ptr<Env> MakeEnv(std::string_view name, uint64_t seed) {
  std::unique_ptr<Env> env;
  if (name == "reach2d_bimodal") {
    env = std::make_unique<Reach2dBimodal>();
  } else if (name == "pushL") {
    env = std::make_unique<PushL>();
  } else if (name == "pick_discrete") {
    env = std::make_unique<PickDiscrete>();
  } else {
    throw std::invalid_argument("unknown environment: " + std::string(name));
  }
  env->Reset(seed);
  return env;
}

// --- reach2d_bimodal -------------------------------------------------------

Reach2dBimodal::Reach2dBimodal() {
  spec_ = {"reach2d_bimodal", 2, 2, {false, false}, 60, kExpertMaxSpeed};
}

Vec Reach2dBimodal::Reset(uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uy(-0.8, -0.6);
  agent_ = {0.0, uy(rng)};
  prev_agent_ = agent_;
  expert_goal_ = std::bernoulli_distribution(0.5)(rng) ? 1 : -1;
  t_ = 0;
  return Observe();
}

Vec Reach2dBimodal::Step(const Vec& action) {
  CheckAction(action, 2);
  prev_agent_ = agent_;
  agent_ = MoveToward(agent_, action.head<2>());
  ++t_;
  return Observe();
}

Vec Reach2dBimodal::Observe() const { return agent_; }

double Reach2dBimodal::Score() const {
  const double d = std::min((agent_ - ToVec2(kGoalLeft)).norm(),
                            (agent_ - ToVec2(kGoalRight)).norm());
  return d < kSuccessRadius ? 1.0 : 0.0;
}

Vec Reach2dBimodal::ExpertAction() {
  const Vector2d goal = ToVec2(expert_goal_ > 0 ? kGoalRight : kGoalLeft);
  return ApproachStep(agent_, agent_ - prev_agent_, goal);
}

int Reach2dBimodal::ModeOf(const Chunk& actions) const {
  const double x = actions(actions.rows() - 1, 0);
  return x > 0.0 ? 1 : (x < 0.0 ? -1 : 0);
}

std::unique_ptr<Env> Reach2dBimodal::Clone() const {
  return std::make_unique<Reach2dBimodal>(*this);
}

// --- pushL -------------------------------------------------------------------

PushL::PushL() {
  spec_ = {"pushL", 4, 2, {false, false}, 150, kExpertMaxSpeed};
}

Vec PushL::Reset(uint64_t seed) {
  std::mt19937_64 rng(seed);
  block_ = Uniform2(rng, -0.35, -0.15, -0.15, 0.15);
  agent_ = Uniform2(rng, -0.95, -0.85, -0.5, 0.5);
  prev_agent_ = agent_;
  t_ = 0;
  return Observe();
}

void PushL::SetState(const Vector2d& agent, const Vector2d& block) {
  agent_ = agent;
  prev_agent_ = agent;
  block_ = block;
}

void PushL::ResolveContact(const Vector2d& motion) {
  const double cone_cos = 1.0 / std::sqrt(1.0 + kFrictionCoeff * kFrictionCoeff);
  for (int iter = 0; iter < 3; ++iter) {
    Vector2d closest;
    const double dist = ClosestOnL(block_, agent_, &closest);
    if (dist >= kAgentRadius) return;
    const double m = motion.norm();
    if (dist < 1e-12) {
      // Centre inside the footprint: the block is carried along.
      block_ += m > 1e-12 ? Vector2d(motion * (1.0 + kAgentRadius / m))
                          : Vector2d(kAgentRadius, 0.0);
      continue;
    }
    const Vector2d normal = (closest - agent_) / dist;
    const double depth = kAgentRadius - dist;
    const double along = m > 1e-12 ? motion.dot(normal) / m : 0.0;
    if (along >= cone_cos) {
      block_ += motion / m * (depth / along);
    } else {
      block_ += normal * depth;
    }
  }
}

Vec PushL::Step(const Vec& action) {
  CheckAction(action, 2);
  prev_agent_ = agent_;
  agent_ = MoveToward(agent_, action.head<2>());
  ResolveContact(agent_ - prev_agent_);
  ++t_;
  return Observe();
}

Vec PushL::Observe() const {
  Vec o(4);
  o << agent_, block_;
  return o;
}

double PushL::Coverage() const {
  const auto b = LRects(block_);
  const auto g = LRects(ToVec2(kTarget));
  double inter = 0.0;
  for (const Rect& x : b) {
    for (const Rect& y : g) inter += Overlap(x, y);
  }
  return inter / (g[0].Area() + g[1].Area());
}

double PushL::Score() const {
  return std::min(1.0, Coverage() / kCoverageForFullScore);
}

Vec PushL::ExpertAction() {
  const Vector2d to_target = ToVec2(kTarget) - block_;
  const double remaining = to_target.norm();
  if (remaining < 0.003) return agent_;
  const Vector2d dir = to_target / remaining;
  const Vector2d contact(block_.x() - kHalfExtent - kAgentRadius, block_.y());
  const Vector2d vel = agent_ - prev_agent_;
  Vector2d closest;
  const bool touching =
      ClosestOnL(block_, agent_, &closest) <= kAgentRadius + 2e-3 &&
      agent_.x() < block_.x() - kHalfExtent;
  if (touching || (agent_ - contact).norm() < 0.015) {
    const double along = std::max(0.0, vel.dot(dir));
    const double speed =
        std::min({kExpertMaxSpeed, along + kExpertAccel,
                  std::sqrt(2.0 * kExpertAccel * remaining), remaining});
    return agent_ + speed * dir;
  }
  if (agent_.x() > contact.x() - 0.005) {
    // Behind the block on the wrong side: back off to the left first.
    return ApproachStep(agent_, vel, Vector2d(contact.x() - 0.1, agent_.y()));
  }
  return ApproachStep(agent_, vel, contact);
}

std::unique_ptr<Env> PushL::Clone() const {
  return std::make_unique<PushL>(*this);
}

// --- pick_discrete -----------------------------------------------------------

PickDiscrete::PickDiscrete() {
  spec_ = {"pick_discrete", 5, 3, {false, false, true}, 100, kExpertMaxSpeed};
}

Vec PickDiscrete::Reset(uint64_t seed) {
  std::mt19937_64 rng(seed);
  agent_ = Uniform2(rng, -0.2, 0.2, -0.9, -0.8);
  object_ = Uniform2(rng, -0.5, 0.5, -0.3, 0.1);
  prev_agent_ = agent_;
  gripper_ = -1.0;
  holding_ = false;
  t_ = 0;
  return Observe();
}

Vec PickDiscrete::Step(const Vec& action) {
  CheckAction(action, 3);
  if (action[2] > 0.0) {
    gripper_ = 1.0;
    if (!holding_ && (agent_ - object_).norm() < kGraspRadius) holding_ = true;
  } else {
    gripper_ = -1.0;
    holding_ = false;
  }
  prev_agent_ = agent_;
  agent_ = MoveToward(agent_, action.head<2>());
  if (holding_) object_ = agent_;
  ++t_;
  return Observe();
}

Vec PickDiscrete::Observe() const {
  Vec o(5);
  o << agent_, object_, gripper_;
  return o;
}

double PickDiscrete::Score() const {
  return !holding_ && (object_ - ToVec2(kGoal)).norm() < kGoalRadius ? 1.0
                                                                      : 0.0;
}

Vec PickDiscrete::ExpertAction() {
  const Vector2d goal = ToVec2(kGoal);
  const Vector2d vel = agent_ - prev_agent_;
  Vector2d target = agent_;
  double grip = -1.0;
  if (holding_) {
    if ((agent_ - goal).norm() < 0.005) {
      grip = -1.0;
    } else {
      target = ApproachStep(agent_, vel, goal);
      grip = 1.0;
    }
  } else if ((object_ - goal).norm() < kGoalRadius) {
    grip = -1.0;
  } else if ((agent_ - object_).norm() < 0.005) {
    grip = 1.0;
  } else {
    target = ApproachStep(agent_, vel, object_);
  }
  Vec a(3);
  a << target, grip;
  return a;
}

std::unique_ptr<Env> PickDiscrete::Clone() const {
  return std::make_unique<PickDiscrete>(*this);
}

}  // namespace rtidp

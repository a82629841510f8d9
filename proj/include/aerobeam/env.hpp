#pragma once

#include <span>
#include <vector>

#include <Eigen/Core>

#include "aerobeam/config.hpp"
#include "aerobeam/rng.hpp"

// The swarm MDP: observation, action decoding, physics stepping and reward.
namespace aerobeam::env {

struct SwarmState {
  std::vector<Vec3> uav_positions;
  mobility::MoverState eve_true;
  Vec2 eve_estimate{0.0, 0.0};
  Vec3 bs_position{0.0, 0.0, 0.0};
  int step_index = 0;

  bool operator==(const SwarmState& o) const;
};

struct Violations {
  int speed_count = 0;
  int collision_count = 0;
  int boundary_count = 0;

  bool operator==(const Violations&) const = default;
};

struct DecodedAction {
  std::vector<double> weights;       // K values in [0, 1]
  std::vector<Vec2> displacements;   // K horizontal moves in m, before clipping
};

struct StepOutcome {
  SwarmState next_state;
  double reward = 0.0;
  double secrecy = 0.0;  // bits/s/Hz
  double energy = 0.0;   // J
  Violations violations;
  bool done = false;
  std::vector<double> applied_speeds;  // m/s per UAV
};

// Uniform swarm placement with rejection against d_min, eavesdropper in its
// spawn region. Deterministic in `seed`.
SwarmState reset(const RunConfig& config, std::uint64_t seed);

// [UAV xy (2K), eavesdropper estimate xy (2)], mapped affinely to [-1, 1]
// by the UAV deployment area and the eavesdropper area respectively.
Eigen::VectorXd observe(const SwarmState& state, const RunConfig& config);

// weight_k = (raw_k + 1) / 2; move_k = v_max dt (raw[K+2k], raw[K+2k+1]).
DecodedAction decode_action(std::span<const double> raw, const RunConfig& config);

double reward_fn(double secrecy, double energy, const Violations& v,
                 const RunConfig& config);

// Advances the state by one decision. The generator drives the eavesdropper
// motion and its position estimate; secrecy is evaluated against the true
// eavesdropper position before it moves.
StepOutcome step(const SwarmState& state, std::span<const double> raw_action,
                 const RunConfig& config, Rng& rng);

// Stateful wrapper owning its generator.
class SwarmEnv {
 public:
  explicit SwarmEnv(RunConfig config);

  const SwarmState& reset(std::uint64_t seed);
  StepOutcome step(std::span<const double> raw_action);
  Eigen::VectorXd observation() const { return observe(state_, config_); }
  const SwarmState& state() const { return state_; }
  const RunConfig& config() const { return config_; }

 private:
  RunConfig config_;
  SwarmState state_;
  Rng rng_;
};

}  // namespace aerobeam::env

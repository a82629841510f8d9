#include "aerobeam/env.hpp"

#include <cmath>

#include "aerobeam/errors.hpp"

namespace aerobeam::env {

namespace {

constexpr int kPlacementAttempts = 100000;

// Stream identifiers for seed derivation.
constexpr std::uint64_t kResetStream = 0x5157;
constexpr std::uint64_t kStepStream = 0x57e9;

double normalise(double v, double lo, double hi) {
  return 2.0 * (v - lo) / (hi - lo) - 1.0;
}

}  // namespace

bool SwarmState::operator==(const SwarmState& o) const {
  return uav_positions == o.uav_positions && eve_true.position == o.eve_true.position &&
         eve_true.speed == o.eve_true.speed && eve_true.heading == o.eve_true.heading &&
         eve_true.mean_heading == o.eve_true.mean_heading && eve_estimate == o.eve_estimate &&
         bs_position == o.bs_position && step_index == o.step_index;
}

SwarmState reset(const RunConfig& config, std::uint64_t seed) {
  const auto& p = config.physics;
  Rng rng(derive_seed(seed, kResetStream));
  SwarmState s;
  s.bs_position = p.bs_position;

  const double d_min = config.mdp.d_min;
  s.uav_positions.reserve(p.num_uavs);
  for (int k = 0; k < p.num_uavs; ++k) {
    bool placed = false;
    for (int attempt = 0; attempt < kPlacementAttempts && !placed; ++attempt) {
      Vec3 c(uniform(rng, p.area.lo.x(), p.area.hi.x()),
             uniform(rng, p.area.lo.y(), p.area.hi.y()), p.altitude);
      placed = true;
      for (const auto& q : s.uav_positions) {
        if ((c - q).norm() < d_min) {
          placed = false;
          break;
        }
      }
      if (placed) s.uav_positions.push_back(c);
    }
    if (!placed) {
      throw ConfigError("mdp.d_min", "could not place " + std::to_string(p.num_uavs) +
                                         " UAVs with the requested separation");
    }
  }

  s.eve_true.position = {uniform(rng, p.eve_spawn.lo.x(), p.eve_spawn.hi.x()),
                         uniform(rng, p.eve_spawn.lo.y(), p.eve_spawn.hi.y())};
  s.eve_true.speed = config.mobility.eavesdropper.mean_speed;
  s.eve_true.heading = wrap_angle(uniform(rng, -kPi, kPi));
  s.eve_true.mean_heading = s.eve_true.heading;
  const double sigma = p.eve_estimate_sigma;
  const double nx = standard_normal(rng);
  const double ny = standard_normal(rng);
  s.eve_estimate = s.eve_true.position + sigma * Vec2(nx, ny);
  s.step_index = 0;
  return s;
}

Eigen::VectorXd observe(const SwarmState& state, const RunConfig& config) {
  const auto& p = config.physics;
  const int k = static_cast<int>(state.uav_positions.size());
  Eigen::VectorXd obs(2 * k + 2);
  for (int i = 0; i < k; ++i) {
    obs[2 * i] = normalise(state.uav_positions[i].x(), p.area.lo.x(), p.area.hi.x());
    obs[2 * i + 1] = normalise(state.uav_positions[i].y(), p.area.lo.y(), p.area.hi.y());
  }
  obs[2 * k] = normalise(state.eve_estimate.x(), p.eve_area.lo.x(), p.eve_area.hi.x());
  obs[2 * k + 1] = normalise(state.eve_estimate.y(), p.eve_area.lo.y(), p.eve_area.hi.y());
  return obs;
}

DecodedAction decode_action(std::span<const double> raw, const RunConfig& config) {
  const int k = config.physics.num_uavs;
  if (static_cast<int>(raw.size()) != 3 * k) {
    throw ShapeError("action has dimension " + std::to_string(raw.size()) + ", expected " +
                     std::to_string(3 * k));
  }
  for (double v : raw) {
    if (!(v >= -1.0 && v <= 1.0)) throw DomainError("action component outside [-1, 1]");
  }
  const double reach = config.mobility.v_max * config.mobility.dt;
  DecodedAction out;
  out.weights.resize(k);
  out.displacements.resize(k);
  for (int i = 0; i < k; ++i) {
    out.weights[i] = (raw[i] + 1.0) / 2.0;
    out.displacements[i] = reach * Vec2(raw[k + 2 * i], raw[k + 2 * i + 1]);
  }
  return out;
}

double reward_fn(double secrecy, double energy, const Violations& v,
                 const RunConfig& config) {
  const auto& m = config.mdp;
  return m.w_secrecy * (secrecy / m.rate_ref) - m.w_energy * (energy / config.energy_ref()) -
         m.c_violation * (v.speed_count + v.boundary_count) - m.c_collision * v.collision_count;
}

StepOutcome step(const SwarmState& state, std::span<const double> raw_action,
                 const RunConfig& config, Rng& rng) {
  if (state.step_index >= config.mdp.episode_length) {
    throw DomainError("step called on a finished episode");
  }
  const auto& p = config.physics;
  const int k = p.num_uavs;
  if (static_cast<int>(state.uav_positions.size()) != k) {
    throw ShapeError("state holds a different number of UAVs than the config");
  }
  const DecodedAction act = decode_action(raw_action, config);
  const Box3 bounds = config.uav_bounds();
  const double dt = config.mobility.dt;

  StepOutcome out;
  out.next_state = state;
  std::vector<Vec3> moved(k);
  out.applied_speeds.assign(k, 0.0);
  for (int i = 0; i < k; ++i) {
    const Vec3 disp(act.displacements[i].x(), act.displacements[i].y(), 0.0);
    auto r = mobility::move_uav(state.uav_positions[i], disp, bounds, config.mobility.v_max, dt);
    moved[i] = r.position;
    out.applied_speeds[i] = r.speed;
    out.violations.speed_count += r.speed_violation ? 1 : 0;
    out.violations.boundary_count += r.boundary_violation ? 1 : 0;
  }
  for (int i = 0; i < k; ++i) {
    for (int j = i + 1; j < k; ++j) {
      if ((moved[i] - moved[j]).norm() < config.mdp.d_min) ++out.violations.collision_count;
    }
  }
  if (out.violations.collision_count > 0) {
    // Joint move rejected: the swarm holds its previous formation.
    moved = state.uav_positions;
    out.applied_speeds.assign(k, 0.0);
  }
  out.next_state.uav_positions = moved;

  beam::ElementLayout layout{moved, p.wavelength()};
  beam::BeamConfig bc{act.weights, beam::steering_phases(layout, state.bs_position)};
  const Vec3 eve3(state.eve_true.position.x(), state.eve_true.position.y(), 0.0);
  out.secrecy =
      channel::evaluate_secrecy(p.channel_params(), layout, bc, state.bs_position, eve3).secrecy;

  out.energy = mobility::step_energy(out.applied_speeds, config.energy, dt);
  if (p.include_comm_energy) out.energy += k * p.element_tx_power * dt;

  const double n_speed = standard_normal(rng);
  const double n_heading = standard_normal(rng);
  out.next_state.eve_true = mobility::gauss_markov_step(
      state.eve_true, config.mobility.eavesdropper, dt, {n_speed, n_heading}, p.eve_area);
  const double ex = standard_normal(rng);
  const double ey = standard_normal(rng);
  out.next_state.eve_estimate =
      out.next_state.eve_true.position + p.eve_estimate_sigma * Vec2(ex, ey);

  out.next_state.step_index = state.step_index + 1;
  out.done = out.next_state.step_index >= config.mdp.episode_length;
  out.reward = reward_fn(out.secrecy, out.energy, out.violations, config);
  return out;
}

SwarmEnv::SwarmEnv(RunConfig config) : config_(std::move(config)) {
  config_.validate();
}

const SwarmState& SwarmEnv::reset(std::uint64_t seed) {
  state_ = env::reset(config_, seed);
  rng_.seed(derive_seed(seed, kStepStream));
  return state_;
}

StepOutcome SwarmEnv::step(std::span<const double> raw_action) {
  StepOutcome out = env::step(state_, raw_action, config_, rng_);
  state_ = out.next_state;
  return out;
}

}  // namespace aerobeam::env

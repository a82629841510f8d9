#pragma once

// Exhaustive single-step search for a K = 2 swarm with a frozen
// eavesdropper, evaluated twice: through env::step and through an
// independent long-double re-derivation of the step physics.

#include <algorithm>
#include <cmath>
#include <vector>

#include "aerobeam/env.hpp"
#include "oracles.hpp"

namespace brute {

inline aerobeam::RunConfig small_config() {
  aerobeam::RunConfig c;
  c.physics.num_uavs = 2;
  c.mobility.eavesdropper.mean_speed = 0.0;
  c.mobility.eavesdropper.sigma = 0.0;
  c.mobility.eavesdropper.alpha = 1.0;
  c.physics.eve_estimate_sigma = 0.0;
  return c;
}

inline constexpr double kLevels[5] = {-1.0, -0.5, 0.0, 0.5, 1.0};

// Raw action for grid index: weights (5^2) x displacement per UAV (5^2 each).
inline std::vector<double> grid_action(int index) {
  int i = index;
  const int w0 = i % 5; i /= 5;
  const int w1 = i % 5; i /= 5;
  const int dx0 = i % 5; i /= 5;
  const int dy0 = i % 5; i /= 5;
  const int dx1 = i % 5; i /= 5;
  const int dy1 = i % 5;
  return {kLevels[w0], kLevels[w1], kLevels[dx0], kLevels[dy0], kLevels[dx1], kLevels[dy1]};
}

inline constexpr int kGridSize = 5 * 5 * 25 * 25;

// Agreement tolerance between env and oracle rewards. Distances near 1 km
// carry about 1e-13 m of rounding, i.e. ~6e-12 rad of phase per element;
// near an eavesdropper null this reaches the rate at the 1e-10 level.
inline constexpr double kRewardTol = 1e-9;

// Independent reward of one grid action from the pre-step state.
inline oracle::Real oracle_reward(const aerobeam::env::SwarmState& s, const std::vector<double>& raw,
                                  const aerobeam::RunConfig& c) {
  using oracle::Real;
  const Real vmax = c.mobility.v_max, dt = c.mobility.dt;
  const Real lo_x = c.physics.area.lo.x(), hi_x = c.physics.area.hi.x();
  const Real lo_y = c.physics.area.lo.y(), hi_y = c.physics.area.hi.y();
  std::vector<oracle::P3> before, after;
  std::vector<Real> speeds;
  int speed_v = 0, bound_v = 0, coll = 0;
  for (int k = 0; k < 2; ++k) {
    const auto& p = s.uav_positions[k];
    before.push_back({p.x(), p.y(), p.z()});
    Real dx = vmax * dt * raw[2 + 2 * k], dy = vmax * dt * raw[3 + 2 * k];
    const Real n = std::sqrt(dx * dx + dy * dy);
    if (n > vmax * dt) {
      ++speed_v;
      dx *= vmax * dt / n;
      dy *= vmax * dt / n;
    }
    Real x = before[k][0] + dx, y = before[k][1] + dy;
    const Real cx = std::clamp(x, lo_x, hi_x), cy = std::clamp(y, lo_y, hi_y);
    if (cx != x || cy != y) ++bound_v;
    after.push_back({cx, cy, before[k][2]});
  }
  if (oracle::dist(after[0], after[1]) < c.mdp.d_min) {
    ++coll;
    after = before;
  }
  for (int k = 0; k < 2; ++k) speeds.push_back(coll ? 0 : oracle::dist(after[k], before[k]) / dt);
  const std::vector<Real> w{(raw[0] + 1) / 2, (raw[1] + 1) / 2};
  const auto& bs = s.bs_position;
  const auto& e = s.eve_true.position;
  const Real sec = oracle::secrecy(after, w, {bs.x(), bs.y(), bs.z()}, {e.x(), e.y(), 0.0L},
                                   c.physics.element_tx_power, c.physics.noise_power,
                                   c.physics.wavelength());
  Real energy = 0;
  for (Real v : speeds) energy += oracle::propulsion(v) * dt;
  const Real e_ref = 2 * (79.86L + 88.63L) * dt;
  return c.mdp.w_secrecy * sec / c.mdp.rate_ref - c.mdp.w_energy * energy / e_ref -
         c.mdp.c_violation * (speed_v + bound_v) - c.mdp.c_collision * coll;
}

struct Search {
  std::vector<double> env_rewards;
  std::vector<oracle::Real> oracle_rewards;
  int env_argmax = 0;
  int oracle_argmax = 0;
};

inline Search run(const aerobeam::env::SwarmState& s, const aerobeam::RunConfig& c) {
  Search out;
  for (int i = 0; i < kGridSize; ++i) {
    const auto raw = grid_action(i);
    aerobeam::Rng rng(0);
    out.env_rewards.push_back(aerobeam::env::step(s, raw, c, rng).reward);
    out.oracle_rewards.push_back(oracle_reward(s, raw, c));
  }
  out.env_argmax = static_cast<int>(
      std::max_element(out.env_rewards.begin(), out.env_rewards.end()) - out.env_rewards.begin());
  out.oracle_argmax = static_cast<int>(
      std::max_element(out.oracle_rewards.begin(), out.oracle_rewards.end()) -
      out.oracle_rewards.begin());
  return out;
}

}  // namespace brute

#pragma once

#include <array>
#include <span>

#include "aerobeam/geometry.hpp"

// Eavesdropper Gauss-Markov motion, bounded UAV kinematics and the
// rotary-wing propulsion power curve.
namespace aerobeam::mobility {

struct GaussMarkovParams {
  double mean_speed = 5.0;  // m/s
  double alpha = 0.1;       // memory, in [0, 1]
  double sigma = 1.0;       // asymptotic speed std, m/s

  void validate() const;
  bool operator==(const GaussMarkovParams&) const = default;
};

// Heading noise scale: pi/8 rad per m/s of sigma.
inline constexpr double kHeadingNoisePerSigma = kPi / 8.0;

struct MoverState {
  Vec2 position{0.0, 0.0};
  double speed = 0.0;
  double heading = 0.0;       // [-pi, pi)
  double mean_heading = 0.0;  // per-episode drift direction, mirrored on reflection
};

// One Gauss-Markov update on (speed, heading) followed by a position
// advance that reflects off the edges of `area`. `noise` holds two
// standard-normal draws (speed, heading).
MoverState gauss_markov_step(const MoverState& state,
                             const GaussMarkovParams& params, double dt,
                             std::array<double, 2> noise, const Box2& area);

struct MoveResult {
  Vec3 position;
  Vec3 applied;  // displacement after speed clipping, before clamping
  bool speed_violation = false;
  bool boundary_violation = false;
  double speed = 0.0;  // |actual displacement| / dt
};

// Limits |displacement| to v_max * dt and clamps the result into bounds.
MoveResult move_uav(const Vec3& position, const Vec3& displacement,
                    const Box3& bounds, double v_max, double dt);

struct EnergyModel {
  double p0 = 79.86;     // blade profile power, W
  double pi = 88.63;     // induced power in hover, W
  double u_tip = 120.0;  // m/s
  double v0 = 4.03;      // mean induced velocity in hover, m/s
  double d0 = 0.6;       // fuselage drag ratio
  double rho = 1.225;    // kg/m^3
  double s = 0.05;       // rotor solidity
  double a_disc = 0.503; // m^2

  void validate() const;
  double hover_power() const { return p0 + pi; }
  bool operator==(const EnergyModel&) const = default;
};

// P(v) = p0 (1 + 3 v^2 / u_tip^2)
//      + pi (sqrt(1 + v^4 / (4 v0^4)) - v^2 / (2 v0^2))^(1/2)
//      + 0.5 d0 rho s A v^3
double propulsion_power(double speed, const EnergyModel& model);

// Sum over UAVs of P(v_k) * dt.
double step_energy(std::span<const double> speeds, const EnergyModel& model,
                   double dt);

}  // namespace aerobeam::mobility

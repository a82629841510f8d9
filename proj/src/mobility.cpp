#include "aerobeam/mobility.hpp"

#include <algorithm>
#include <cmath>

#include "aerobeam/errors.hpp"

namespace aerobeam::mobility {

void GaussMarkovParams::validate() const {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw DomainError("gauss-markov alpha outside [0, 1]");
  if (!(mean_speed >= 0.0)) throw DomainError("gauss-markov mean_speed must be >= 0");
  if (!(sigma >= 0.0)) throw DomainError("gauss-markov sigma must be >= 0");
}

namespace {

// Folds a coordinate back into [lo, hi]; returns true when it bounced an odd
// number of times (the velocity component is reversed).
bool reflect(double& x, double lo, double hi) {
  const double width = hi - lo;
  if (!(width > 0.0)) {
    x = lo;
    return false;
  }
  double u = std::fmod(x - lo, 2.0 * width);
  if (u < 0.0) u += 2.0 * width;
  bool flipped = u > width;
  x = flipped ? hi - (u - width) : lo + u;
  // A coordinate exactly inside never flips; the fmod may bounce it once when
  // it sits on hi exactly, which is harmless.
  return flipped;
}

}  // namespace

MoverState gauss_markov_step(const MoverState& state,
                             const GaussMarkovParams& params, double dt,
                             std::array<double, 2> noise, const Box2& area) {
  if (!(dt > 0.0)) throw DomainError("gauss_markov_step: dt must be positive");
  params.validate();

  const double a = params.alpha;
  const double innovation = std::sqrt(std::max(0.0, 1.0 - a * a));
  const double sigma_heading = params.sigma * kHeadingNoisePerSigma;

  MoverState next = state;
  next.speed = a * state.speed + (1.0 - a) * params.mean_speed +
               params.sigma * innovation * noise[0];
  next.speed = std::max(0.0, next.speed);

  // Blend on the circle: the deviation from the mean is taken in [-pi, pi).
  const double deviation = wrap_angle(state.heading - state.mean_heading);
  next.heading = wrap_angle(state.mean_heading + a * deviation +
                            sigma_heading * innovation * noise[1]);
  if (a == 1.0) {
    next.speed = state.speed;
    next.heading = state.heading;
  }

  Vec2 pos = state.position +
             next.speed * dt * Vec2(std::cos(next.heading), std::sin(next.heading));
  bool flip_x = reflect(pos.x(), area.lo.x(), area.hi.x());
  bool flip_y = reflect(pos.y(), area.lo.y(), area.hi.y());
  next.position = pos;
  if (flip_x) {
    next.heading = wrap_angle(kPi - next.heading);
    next.mean_heading = wrap_angle(kPi - next.mean_heading);
  }
  if (flip_y) {
    next.heading = wrap_angle(-next.heading);
    next.mean_heading = wrap_angle(-next.mean_heading);
  }
  return next;
}

MoveResult move_uav(const Vec3& position, const Vec3& displacement,
                    const Box3& bounds, double v_max, double dt) {
  if (!(dt > 0.0)) throw DomainError("move_uav: dt must be positive");
  if (!(v_max > 0.0)) throw DomainError("move_uav: v_max must be positive");
  if (!displacement.allFinite()) throw DomainError("move_uav: non-finite displacement");

  MoveResult out;
  const double limit = v_max * dt;
  const double norm = displacement.norm();
  out.applied = displacement;
  if (norm > limit) {
    out.speed_violation = true;
    out.applied = displacement * (limit / norm);
  }
  Vec3 target = position + out.applied;
  out.position = target.cwiseMax(bounds.lo).cwiseMin(bounds.hi);
  out.boundary_violation = (out.position.array() != target.array()).any();
  out.speed = std::min((out.position - position).norm() / dt, v_max);
  return out;
}

void EnergyModel::validate() const {
  for (double v : {p0, pi, u_tip, v0, d0, rho, s, a_disc}) {
    if (!(v > 0.0) || !std::isfinite(v)) {
      throw DomainError("energy model constants must be strictly positive");
    }
  }
}

double propulsion_power(double speed, const EnergyModel& m) {
  if (!(speed >= 0.0)) throw DomainError("propulsion_power: negative speed");
  const double v2 = speed * speed;
  const double profile = m.p0 * (1.0 + 3.0 * v2 / (m.u_tip * m.u_tip));
  // sqrt(1 + x^2) - x == 1 / (sqrt(1 + x^2) + x), stable for large x.
  const double x = v2 / (2.0 * m.v0 * m.v0);
  const double induced = m.pi * std::sqrt(1.0 / (std::sqrt(1.0 + x * x) + x));
  const double parasite = 0.5 * m.d0 * m.rho * m.s * m.a_disc * v2 * speed;
  return profile + induced + parasite;
}

double step_energy(std::span<const double> speeds, const EnergyModel& model,
                   double dt) {
  if (!(dt > 0.0)) throw DomainError("step_energy: dt must be positive");
  double total = 0.0;
  for (double v : speeds) total += propulsion_power(v, model) * dt;
  return total;
}

}  // namespace aerobeam::mobility

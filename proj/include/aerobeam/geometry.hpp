#pragma once

#include <cmath>
#include <numbers>

#include <Eigen/Core>

namespace aerobeam {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kTwoPi = 2.0 * std::numbers::pi;
inline constexpr double kSpeedOfLight = 2.99792458e8;

struct Box2 {
  Vec2 lo{0.0, 0.0};
  Vec2 hi{0.0, 0.0};

  bool contains(const Vec2& p) const {
    return (p.array() >= lo.array()).all() && (p.array() <= hi.array()).all();
  }
  Vec2 center() const { return 0.5 * (lo + hi); }
  Vec2 extent() const { return hi - lo; }
  bool operator==(const Box2& o) const { return lo == o.lo && hi == o.hi; }
};

struct Box3 {
  Vec3 lo{0.0, 0.0, 0.0};
  Vec3 hi{0.0, 0.0, 0.0};

  bool contains(const Vec3& p) const {
    return (p.array() >= lo.array()).all() && (p.array() <= hi.array()).all();
  }
  bool operator==(const Box3& o) const { return lo == o.lo && hi == o.hi; }
};

// Maps an angle onto [-pi, pi).
inline double wrap_angle(double a) {
  double r = std::fmod(a + kPi, kTwoPi);
  if (r < 0.0) r += kTwoPi;
  double out = r - kPi;
  // fmod can land exactly on 2*pi after the correction above.
  return out >= kPi ? out - kTwoPi : out;
}

}  // namespace aerobeam

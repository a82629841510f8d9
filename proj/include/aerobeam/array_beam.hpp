#pragma once

#include <complex>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "aerobeam/geometry.hpp"

// Virtual antenna array formed by the swarm: element geometry, conjugate
// phase steering and the spherical-wave array factor.
namespace aerobeam::beam {

struct ElementLayout {
  std::vector<Vec3> positions;
  double wavelength = kSpeedOfLight / 2.4e9;

  std::size_t size() const { return positions.size(); }
  Vec3 centroid() const;
  // Throws DomainError when empty, non-finite, or wavelength <= 0.
  void validate() const;
};

struct BeamConfig {
  std::vector<double> weights;  // excitation amplitudes in [0, 1]
  std::vector<double> phases;   // radians, canonical range [-pi, pi)

  void validate(std::size_t num_elements) const;
};

// psi_k = (2 pi / lambda) * |p_k - target|, wrapped to [-pi, pi). With these
// phases every element's propagation phase cancels at the target.
std::vector<double> steering_phases(const ElementLayout& layout,
                                    const Vec3& target);

// AF(rx) = sum_k w_k exp(j (psi_k - (2 pi / lambda) |p_k - rx|)).
// Pure phasor sum; no amplitude path loss.
std::complex<double> array_factor(const ElementLayout& layout,
                                  const BeamConfig& beam, const Vec3& rx);

struct BeamPattern {
  std::vector<double> azimuth;    // radians
  std::vector<double> elevation;  // radians
  double radius = 0.0;
  // |AF|^2, azimuth-major: value(i_az, i_el) = af_sq[i_az * n_el + i_el].
  std::vector<double> af_sq;

  double value(std::size_t i_az, std::size_t i_el) const {
    return af_sq[i_az * elevation.size() + i_el];
  }
};

// Point on the sphere of the given radius around the layout centroid.
Vec3 pattern_point(const Vec3& centroid, double radius, double azimuth,
                   double elevation);

// Samples |AF|^2 on a spherical grid centred on the swarm centroid.
BeamPattern beam_pattern(const ElementLayout& layout, const BeamConfig& beam,
                         std::span<const double> azimuth,
                         std::span<const double> elevation, double radius);

// CSV with header `az_rad,el_rad,af_sq`, one row per grid point.
void write_pattern_csv(std::ostream& os, const BeamPattern& pattern);
BeamPattern read_pattern_csv(std::istream& is);

// Polar cut of the pattern at the elevation row closest to `elevation`,
// 600x600 viewport, log-power radius with a -40 dB floor.
std::string render_polar_svg(const BeamPattern& pattern, double elevation);

}  // namespace aerobeam::beam

#include "aerobeam/array_beam.hpp"

#include <algorithm>
#include <array>
#include <cstdio>
#include <cmath>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <string>

#include "aerobeam/errors.hpp"
#include "aerobeam/numfmt.hpp"

namespace aerobeam::beam {

namespace {

double element_distance(const Vec3& element, const Vec3& point) {
  double d = (element - point).norm();
  if (!(d > 0.0)) {
    throw GeometryError("receiver coincides with an array element");
  }
  return d;
}

}  // namespace

Vec3 ElementLayout::centroid() const {
  Vec3 c = Vec3::Zero();
  for (const auto& p : positions) c += p;
  return c / static_cast<double>(positions.size());
}

void ElementLayout::validate() const {
  if (positions.empty()) throw DomainError("layout needs at least one element");
  if (!(wavelength > 0.0) || !std::isfinite(wavelength)) {
    throw DomainError("wavelength must be positive and finite");
  }
  for (const auto& p : positions) {
    if (!p.allFinite()) throw DomainError("element position is not finite");
  }
}

void BeamConfig::validate(std::size_t num_elements) const {
  if (weights.size() != num_elements || phases.size() != num_elements) {
    throw ShapeError("beam config size does not match the layout");
  }
  for (double w : weights) {
    if (!(w >= 0.0 && w <= 1.0)) throw DomainError("weight outside [0, 1]");
  }
  for (double p : phases) {
    if (!std::isfinite(p)) throw DomainError("phase is not finite");
  }
}

std::vector<double> steering_phases(const ElementLayout& layout,
                                    const Vec3& target) {
  layout.validate();
  const double k = kTwoPi / layout.wavelength;
  std::vector<double> phases;
  phases.reserve(layout.size());
  for (const auto& p : layout.positions) {
    phases.push_back(wrap_angle(k * element_distance(p, target)));
  }
  return phases;
}

std::complex<double> array_factor(const ElementLayout& layout,
                                  const BeamConfig& beam, const Vec3& rx) {
  layout.validate();
  beam.validate(layout.size());
  const double k = kTwoPi / layout.wavelength;
  std::complex<double> af{0.0, 0.0};
  for (std::size_t i = 0; i < layout.size(); ++i) {
    // Reduce the propagation phase first so that the difference stays small.
    double phase = beam.phases[i] - wrap_angle(k * element_distance(layout.positions[i], rx));
    af += beam.weights[i] * std::polar(1.0, phase);
  }
  return af;
}

Vec3 pattern_point(const Vec3& centroid, double radius, double azimuth,
                   double elevation) {
  const double ce = std::cos(elevation);
  return centroid + radius * Vec3(ce * std::cos(azimuth), ce * std::sin(azimuth),
                                  std::sin(elevation));
}

BeamPattern beam_pattern(const ElementLayout& layout, const BeamConfig& beam,
                         std::span<const double> azimuth,
                         std::span<const double> elevation, double radius) {
  layout.validate();
  if (azimuth.empty() || elevation.empty()) {
    throw DomainError("beam_pattern: empty angular grid");
  }
  const Vec3 c = layout.centroid();
  double max_extent = 0.0;
  for (const auto& p : layout.positions) max_extent = std::max(max_extent, (p - c).norm());
  if (!(radius > max_extent)) {
    throw DomainError("beam_pattern: radius must exceed the array extent");
  }

  BeamPattern out;
  out.azimuth.assign(azimuth.begin(), azimuth.end());
  out.elevation.assign(elevation.begin(), elevation.end());
  out.radius = radius;
  out.af_sq.reserve(azimuth.size() * elevation.size());
  for (double az : azimuth) {
    for (double el : elevation) {
      out.af_sq.push_back(std::norm(array_factor(layout, beam, pattern_point(c, radius, az, el))));
    }
  }
  return out;
}

void write_pattern_csv(std::ostream& os, const BeamPattern& pattern) {
  os << "az_rad,el_rad,af_sq\n";
  for (std::size_t i = 0; i < pattern.azimuth.size(); ++i) {
    for (std::size_t j = 0; j < pattern.elevation.size(); ++j) {
      os << format_double(pattern.azimuth[i]) << ',' << format_double(pattern.elevation[j])
         << ',' << format_double(pattern.value(i, j)) << '\n';
    }
  }
}

BeamPattern read_pattern_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw IoError("pattern csv: missing header");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "az_rad,el_rad,af_sq") throw IoError("pattern csv: unexpected header '" + line + "'");

  BeamPattern out;
  std::vector<std::array<double, 3>> rows;
  std::size_t lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    std::array<double, 3> row{};
    std::stringstream ss(line);
    std::string cell;
    for (int c = 0; c < 3; ++c) {
      if (!std::getline(ss, cell, ',')) {
        throw IoError("pattern csv: short row at line " + std::to_string(lineno));
      }
      try {
        row[c] = parse_double(cell);
      } catch (const DomainError&) {
        throw IoError("pattern csv: bad number at line " + std::to_string(lineno));
      }
    }
    rows.push_back(row);
  }
  if (rows.empty()) throw IoError("pattern csv: no data rows");

  // Azimuth-major: the elevation grid is the run of rows sharing the first azimuth.
  std::size_t n_el = 0;
  while (n_el < rows.size() && rows[n_el][0] == rows[0][0]) ++n_el;
  if (rows.size() % n_el != 0) throw IoError("pattern csv: ragged grid");
  for (std::size_t j = 0; j < n_el; ++j) out.elevation.push_back(rows[j][1]);
  for (std::size_t i = 0; i < rows.size(); i += n_el) out.azimuth.push_back(rows[i][0]);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r][0] != out.azimuth[r / n_el] || rows[r][1] != out.elevation[r % n_el]) {
      throw IoError("pattern csv: rows are not an azimuth-major grid");
    }
    out.af_sq.push_back(rows[r][2]);
  }
  return out;
}

std::string render_polar_svg(const BeamPattern& pattern, double elevation) {
  if (pattern.azimuth.empty() || pattern.elevation.empty()) {
    throw DomainError("render_polar_svg: empty pattern");
  }
  std::size_t el_idx = 0;
  for (std::size_t j = 1; j < pattern.elevation.size(); ++j) {
    if (std::abs(pattern.elevation[j] - elevation) <
        std::abs(pattern.elevation[el_idx] - elevation)) {
      el_idx = j;
    }
  }

  constexpr double kSize = 600.0;
  constexpr double kCentre = kSize / 2.0;
  constexpr double kOuter = 260.0;
  constexpr double kFloorDb = -40.0;

  double peak = 0.0;
  std::size_t peak_idx = 0;
  for (std::size_t i = 0; i < pattern.azimuth.size(); ++i) {
    if (pattern.value(i, el_idx) > peak) {
      peak = pattern.value(i, el_idx);
      peak_idx = i;
    }
  }

  auto radius_of = [&](double v) {
    if (!(peak > 0.0) || !(v > 0.0)) return 0.0;
    double db = std::max(10.0 * std::log10(v / peak), kFloorDb);
    return kOuter * (db - kFloorDb) / -kFloorDb;
  };
  auto fmt = [](double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.3f", v);
    return std::string(buf);
  };

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"600\" height=\"600\" "
         "viewBox=\"0 0 600 600\">\n";
  svg << "<rect width=\"600\" height=\"600\" fill=\"white\"/>\n";
  for (int ring = 1; ring <= 4; ++ring) {
    double r = kOuter * ring / 4.0;
    svg << "<circle cx=\"300\" cy=\"300\" r=\"" << fmt(r)
        << "\" fill=\"none\" stroke=\"#cccccc\"/>\n";
    svg << "<text x=\"" << fmt(kCentre + 4.0) << "\" y=\"" << fmt(kCentre - r - 2.0)
        << "\" font-size=\"10\" fill=\"#888888\">" << (ring - 4) * 10 << " dB</text>\n";
  }
  svg << "<path id=\"pattern\" d=\"";
  for (std::size_t i = 0; i < pattern.azimuth.size(); ++i) {
    double r = radius_of(pattern.value(i, el_idx));
    double x = kCentre + r * std::cos(pattern.azimuth[i]);
    double y = kCentre - r * std::sin(pattern.azimuth[i]);
    svg << (i == 0 ? "M" : " L") << fmt(x) << ',' << fmt(y);
  }
  svg << " Z\" fill=\"none\" stroke=\"#1f77b4\" stroke-width=\"2\"/>\n";

  double pr = radius_of(peak);
  double px = kCentre + pr * std::cos(pattern.azimuth[peak_idx]);
  double py = kCentre - pr * std::sin(pattern.azimuth[peak_idx]);
  svg << "<circle cx=\"" << fmt(px) << "\" cy=\"" << fmt(py) << "\" r=\"4\" fill=\"#d62728\"/>\n";
  svg << "<text x=\"" << fmt(px + 6.0) << "\" y=\"" << fmt(py - 6.0)
      << "\" font-size=\"12\" fill=\"#d62728\">peak |AF|^2=" << format_double(peak)
      << " az=" << fmt(pattern.azimuth[peak_idx] * 180.0 / kPi) << " deg</text>\n";
  svg << "<text x=\"10\" y=\"20\" font-size=\"12\">elevation "
      << fmt(pattern.elevation[el_idx] * 180.0 / kPi) << " deg</text>\n";
  svg << "</svg>\n";
  return svg.str();
}

}  // namespace aerobeam::beam

#include "aerobeam/channel.hpp"

#include <algorithm>
#include <cmath>

#include "aerobeam/errors.hpp"

namespace aerobeam::channel {

void ChannelParams::validate() const {
  auto positive = [](double v) { return v > 0.0 && std::isfinite(v); };
  if (!positive(element_tx_power)) throw DomainError("element_tx_power must be > 0");
  if (!positive(noise_power)) throw DomainError("noise_power must be > 0");
  if (!positive(wavelength)) throw DomainError("wavelength must be > 0");
}

double received_power(const ChannelParams& params, double af_mag,
                      double centroid_distance) {
  if (!(centroid_distance > 0.0)) {
    throw DomainError("received_power: distance must be positive");
  }
  if (!(af_mag >= 0.0)) throw DomainError("received_power: negative |AF|");
  const double path = params.wavelength / (4.0 * kPi * centroid_distance);
  return params.element_tx_power * af_mag * af_mag * path * path;
}

double achievable_rate(double snr) {
  if (!(snr >= 0.0)) throw DomainError("achievable_rate: negative snr");
  return std::log2(1.0 + snr);
}

double secrecy_rate(double rate_bs, double rate_eve) {
  return std::max(0.0, rate_bs - rate_eve);
}

LinkBudget link_budget(const ChannelParams& params,
                       const beam::ElementLayout& layout,
                       const beam::BeamConfig& beam, const Vec3& rx) {
  LinkBudget lb;
  lb.af_magnitude = std::abs(beam::array_factor(layout, beam, rx));
  lb.distance = (layout.centroid() - rx).norm();
  lb.rx_power = received_power(params, lb.af_magnitude, lb.distance);
  lb.snr = lb.rx_power / params.noise_power;
  lb.rate = achievable_rate(lb.snr);
  return lb;
}

SecrecyEvaluation evaluate_secrecy(const ChannelParams& params,
                                   const beam::ElementLayout& layout,
                                   const beam::BeamConfig& beam,
                                   const Vec3& bs_position,
                                   const Vec3& eve_position) {
  SecrecyEvaluation out;
  out.bs = link_budget(params, layout, beam, bs_position);
  out.eve = link_budget(params, layout, beam, eve_position);
  out.secrecy = secrecy_rate(out.bs.rate, out.eve.rate);
  return out;
}

}  // namespace aerobeam::channel

#pragma once

#include "aerobeam/array_beam.hpp"

// Free-space link budget, Shannon rate and wiretap secrecy rate.
namespace aerobeam::channel {

struct ChannelParams {
  double element_tx_power = 0.1;  // W per UAV
  double noise_power = 1e-12;     // W (-90 dBm)
  double wavelength = kSpeedOfLight / 2.4e9;

  void validate() const;
};

struct LinkBudget {
  double af_magnitude = 0.0;
  double distance = 0.0;  // centroid to receiver, m
  double rx_power = 0.0;  // W
  double snr = 0.0;
  double rate = 0.0;  // bits/s/Hz
};

// P_rx = P_t |AF|^2 (lambda / (4 pi d))^2.
double received_power(const ChannelParams& params, double af_mag,
                      double centroid_distance);

// log2(1 + snr).
double achievable_rate(double snr);

// [rate_bs - rate_eve]^+.
double secrecy_rate(double rate_bs, double rate_eve);

// Amplitude from the centroid distance, phase from per-element distances.
LinkBudget link_budget(const ChannelParams& params,
                       const beam::ElementLayout& layout,
                       const beam::BeamConfig& beam, const Vec3& rx);

struct SecrecyEvaluation {
  LinkBudget bs;
  LinkBudget eve;
  double secrecy = 0.0;
};

SecrecyEvaluation evaluate_secrecy(const ChannelParams& params,
                                   const beam::ElementLayout& layout,
                                   const beam::BeamConfig& beam,
                                   const Vec3& bs_position,
                                   const Vec3& eve_position);

}  // namespace aerobeam::channel

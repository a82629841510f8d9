#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "aerobeam/channel.hpp"
#include "aerobeam/mobility.hpp"

namespace aerobeam {

enum class Algorithm { GDMTD3, TD3, DDPG, SAC };

std::string to_string(Algorithm a);
Algorithm algorithm_from_string(const std::string& name);
inline constexpr Algorithm kAllAlgorithms[] = {Algorithm::GDMTD3, Algorithm::TD3,
                                               Algorithm::DDPG, Algorithm::SAC};

struct PhysicsConfig {
  int num_uavs = 4;
  double element_tx_power = 0.1;   // W
  double carrier_frequency = 2.4e9;  // Hz
  double noise_power = 1e-12;      // W
  Box2 area{{0.0, 0.0}, {40.0, 40.0}};
  double altitude = 100.0;
  Vec3 bs_position{1000.0, 0.0, 0.0};
  Box2 eve_spawn{{100.0, -100.0}, {300.0, 100.0}};
  Box2 eve_area{{100.0, -100.0}, {300.0, 100.0}};
  double eve_estimate_sigma = 5.0;  // m
  bool include_comm_energy = false;

  double wavelength() const { return kSpeedOfLight / carrier_frequency; }
  channel::ChannelParams channel_params() const;
  bool operator==(const PhysicsConfig&) const = default;
};

struct MobilityConfig {
  mobility::GaussMarkovParams eavesdropper;
  double v_max = 10.0;  // m/s
  double dt = 1.0;      // s

  bool operator==(const MobilityConfig&) const = default;
};

struct MdpConfig {
  int episode_length = 300;
  double d_min = 1.0;
  double w_secrecy = 1.0;
  double w_energy = 1.0;
  double rate_ref = 1.0;  // bits/s/Hz
  // Energy normaliser in J; unset means K * hover power * dt.
  std::optional<double> energy_ref;
  double c_violation = 0.1;
  double c_collision = 1.0;

  bool operator==(const MdpConfig&) const = default;
};

struct DiffusionConfig {
  int steps = 5;
  double beta_min = 0.1;
  double beta_max = 0.5;
  int time_embed_dim = 16;
  // Weight of the denoising regulariser added to the critic-driven actor loss.
  double regularizer = 0.0;

  bool operator==(const DiffusionConfig&) const = default;
};

struct AgentConfig {
  Algorithm algorithm = Algorithm::GDMTD3;
  int episodes = 1000;
  double gamma = 0.95;
  double tau = 0.005;
  int policy_delay = 2;
  double target_noise = 0.2;
  double target_noise_clip = 0.5;
  bool twin_min = true;
  int batch_size = 256;
  int buffer_capacity = 100000;
  double critic_lr = 1e-3;
  double actor_lr = 1e-4;
  double exploration_noise = 0.1;
  double sac_alpha = 0.2;
  int warmup_factor = 10;  // warm-up lasts until the buffer holds batch * factor
  int updates_per_step = 1;
  std::vector<int> critic_hidden{256, 256};
  std::vector<int> actor_hidden{256, 256};
  std::vector<int> denoiser_hidden{256, 256, 256};
  int checkpoint_interval = 0;  // episodes; 0 writes only the final checkpoint

  bool operator==(const AgentConfig&) const = default;
};

struct RunConfig {
  PhysicsConfig physics;
  MobilityConfig mobility;
  mobility::EnergyModel energy;
  MdpConfig mdp;
  DiffusionConfig diffusion;
  AgentConfig agent;
  std::vector<std::uint64_t> seeds{0};
  std::string output_dir = "runs";

  double energy_ref() const;
  Box3 uav_bounds() const;
  int action_dim() const { return 3 * physics.num_uavs; }
  int observation_dim() const { return 2 * physics.num_uavs + 2; }

  // Throws ConfigError naming the first offending field.
  void validate() const;
  bool operator==(const RunConfig&) const = default;
};

RunConfig config_from_json(const nlohmann::json& doc);
nlohmann::json config_to_json(const RunConfig& cfg);
RunConfig load_config(const std::filesystem::path& path);
RunConfig parse_config(const std::string& text);
// Stable hash of the canonical JSON serialisation.
std::string config_hash(const RunConfig& cfg);

// DDPG runs the TD3 code path with twin-min, target smoothing and the policy
// delay switched off. Other algorithms are returned unchanged.
AgentConfig resolve_agent_flags(const AgentConfig& agent);

}  // namespace aerobeam

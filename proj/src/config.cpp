#include "aerobeam/config.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "aerobeam/errors.hpp"
#include "aerobeam/numfmt.hpp"

namespace aerobeam {

using nlohmann::json;

std::string to_string(Algorithm a) {
  switch (a) {
    case Algorithm::GDMTD3: return "GDMTD3";
    case Algorithm::TD3: return "TD3";
    case Algorithm::DDPG: return "DDPG";
    case Algorithm::SAC: return "SAC";
  }
  return "?";
}

Algorithm algorithm_from_string(const std::string& name) {
  std::string up;
  for (char c : name) up.push_back(static_cast<char>(std::toupper(static_cast<unsigned char>(c))));
  for (Algorithm a : kAllAlgorithms) {
    if (to_string(a) == up) return a;
  }
  throw ConfigError("agent.algorithm", "unknown algorithm '" + name + "'");
}

channel::ChannelParams PhysicsConfig::channel_params() const {
  return {element_tx_power, noise_power, wavelength()};
}

double RunConfig::energy_ref() const {
  if (mdp.energy_ref) return *mdp.energy_ref;
  return physics.num_uavs * energy.hover_power() * mobility.dt;
}

Box3 RunConfig::uav_bounds() const {
  return {{physics.area.lo.x(), physics.area.lo.y(), physics.altitude},
          {physics.area.hi.x(), physics.area.hi.y(), physics.altitude}};
}

AgentConfig resolve_agent_flags(const AgentConfig& agent) {
  AgentConfig out = agent;
  if (agent.algorithm == Algorithm::DDPG) {
    out.twin_min = false;
    out.target_noise = 0.0;
    out.policy_delay = 1;
  }
  return out;
}

namespace {

// Reads a JSON object, remembering which keys were consumed so that unknown
// keys can be rejected with their full dotted path.
class ObjectReader {
 public:
  ObjectReader(const json& obj, std::string path) : obj_(obj), path_(std::move(path)) {
    if (!obj_.is_object()) throw ConfigError(path_.empty() ? "<root>" : path_, "expected an object");
  }

  std::string field(const std::string& key) const {
    return path_.empty() ? key : path_ + "." + key;
  }

  const json* find(const std::string& key) {
    auto it = obj_.find(key);
    if (it == obj_.end()) return nullptr;
    seen_.insert(key);
    return &*it;
  }

  void read(const std::string& key, double& out) {
    if (const json* v = find(key)) {
      if (!v->is_number()) throw ConfigError(field(key), "expected a number");
      out = v->get<double>();
    }
  }

  void read(const std::string& key, int& out) {
    if (const json* v = find(key)) {
      if (!v->is_number_integer()) throw ConfigError(field(key), "expected an integer");
      out = v->get<int>();
    }
  }

  void read(const std::string& key, bool& out) {
    if (const json* v = find(key)) {
      if (!v->is_boolean()) throw ConfigError(field(key), "expected a boolean");
      out = v->get<bool>();
    }
  }

  void read(const std::string& key, std::string& out) {
    if (const json* v = find(key)) {
      if (!v->is_string()) throw ConfigError(field(key), "expected a string");
      out = v->get<std::string>();
    }
  }

  void read(const std::string& key, std::optional<double>& out) {
    if (const json* v = find(key)) {
      if (v->is_null()) {
        out.reset();
      } else if (v->is_number()) {
        out = v->get<double>();
      } else {
        throw ConfigError(field(key), "expected a number or null");
      }
    }
  }

  void read(const std::string& key, std::vector<int>& out) {
    if (const json* v = find(key)) {
      if (!v->is_array()) throw ConfigError(field(key), "expected an array of integers");
      out.clear();
      for (const auto& e : *v) {
        if (!e.is_number_integer()) throw ConfigError(field(key), "expected an array of integers");
        out.push_back(e.get<int>());
      }
    }
  }

  void read(const std::string& key, std::vector<std::uint64_t>& out) {
    if (const json* v = find(key)) {
      if (!v->is_array()) throw ConfigError(field(key), "expected an array of seeds");
      out.clear();
      for (const auto& e : *v) {
        if (!e.is_number_unsigned()) throw ConfigError(field(key), "seeds must be non-negative integers");
        out.push_back(e.get<std::uint64_t>());
      }
    }
  }

  template <int N>
  void read(const std::string& key, Eigen::Matrix<double, N, 1>& out) {
    if (const json* v = find(key)) {
      if (!v->is_array() || v->size() != static_cast<std::size_t>(N)) {
        throw ConfigError(field(key), "expected an array of " + std::to_string(N) + " numbers");
      }
      for (int i = 0; i < N; ++i) {
        if (!(*v)[i].is_number()) throw ConfigError(field(key), "expected numbers");
        out[i] = (*v)[i].get<double>();
      }
    }
  }

  void read(const std::string& key, Box2& out) {
    if (const json* v = find(key)) {
      ObjectReader box(*v, field(key));
      Vec2 xs(out.lo.x(), out.hi.x());
      Vec2 ys(out.lo.y(), out.hi.y());
      box.read("x", xs);
      box.read("y", ys);
      box.finish();
      out.lo = {xs[0], ys[0]};
      out.hi = {xs[1], ys[1]};
    }
  }

  template <typename Fn>
  void section(const std::string& key, Fn&& fn) {
    if (const json* v = find(key)) {
      ObjectReader child(*v, field(key));
      fn(child);
      child.finish();
    }
  }

  void finish() const {
    for (const auto& [key, value] : obj_.items()) {
      if (!seen_.contains(key)) throw ConfigError(field(key), "unknown key");
    }
  }

 private:
  const json& obj_;
  std::string path_;
  std::set<std::string> seen_;
};

json box_json(const Box2& b) {
  return {{"x", {b.lo.x(), b.hi.x()}}, {"y", {b.lo.y(), b.hi.y()}}};
}

void require(bool ok, const std::string& field, const std::string& what) {
  if (!ok) throw ConfigError(field, what);
}

bool finite_positive(double v) { return std::isfinite(v) && v > 0.0; }

void validate_box(const Box2& b, const std::string& field) {
  require(b.lo.allFinite() && b.hi.allFinite(), field, "bounds must be finite");
  require(b.hi.x() > b.lo.x() && b.hi.y() > b.lo.y(), field, "upper bound must exceed lower bound");
}

void validate_hidden(const std::vector<int>& widths, const std::string& field) {
  require(!widths.empty(), field, "needs at least one hidden layer");
  for (int w : widths) require(w >= 1, field, "widths must be >= 1");
}

}  // namespace

void RunConfig::validate() const {
  const auto& p = physics;
  require(p.num_uavs >= 1, "physics.num_uavs", "K (number of UAVs) must be >= 1");
  require(finite_positive(p.element_tx_power), "physics.element_tx_power", "must be > 0");
  require(finite_positive(p.carrier_frequency), "physics.carrier_frequency", "must be > 0");
  require(finite_positive(p.noise_power), "physics.noise_power", "must be > 0");
  validate_box(p.area, "physics.area");
  require(std::isfinite(p.altitude), "physics.altitude", "must be finite");
  require(p.bs_position.allFinite(), "physics.bs_position", "must be finite");
  require(!uav_bounds().contains(p.bs_position), "physics.bs_position",
          "base station lies inside the UAV deployment box");
  validate_box(p.eve_spawn, "physics.eve_spawn");
  validate_box(p.eve_area, "physics.eve_area");
  require(p.eve_area.contains(p.eve_spawn.lo) && p.eve_area.contains(p.eve_spawn.hi),
          "physics.eve_spawn", "must lie inside physics.eve_area");
  require(std::isfinite(p.eve_estimate_sigma) && p.eve_estimate_sigma >= 0.0,
          "physics.eve_estimate_sigma", "must be >= 0");

  const auto& gm = mobility.eavesdropper;
  require(gm.alpha >= 0.0 && gm.alpha <= 1.0, "mobility.alpha", "must be in [0, 1]");
  require(std::isfinite(gm.mean_speed) && gm.mean_speed >= 0.0, "mobility.mean_speed", "must be >= 0");
  require(std::isfinite(gm.sigma) && gm.sigma >= 0.0, "mobility.sigma", "must be >= 0");
  require(finite_positive(mobility.v_max), "mobility.v_max", "must be > 0");
  require(finite_positive(mobility.dt), "mobility.dt", "must be > 0");

  for (auto [name, v] : {std::pair{"p0", energy.p0}, {"pi", energy.pi}, {"u_tip", energy.u_tip},
                         {"v0", energy.v0}, {"d0", energy.d0}, {"rho", energy.rho},
                         {"s", energy.s}, {"a_disc", energy.a_disc}}) {
    require(finite_positive(v), std::string("energy.") + name, "must be > 0");
  }

  require(mdp.episode_length >= 1, "mdp.episode_length", "must be >= 1");
  require(std::isfinite(mdp.d_min) && mdp.d_min >= 0.0, "mdp.d_min", "must be >= 0");
  require(std::isfinite(mdp.w_secrecy) && mdp.w_secrecy >= 0.0, "mdp.w_secrecy", "must be >= 0");
  require(std::isfinite(mdp.w_energy) && mdp.w_energy >= 0.0, "mdp.w_energy", "must be >= 0");
  require(finite_positive(mdp.rate_ref), "mdp.rate_ref", "must be > 0");
  require(!mdp.energy_ref || finite_positive(*mdp.energy_ref), "mdp.energy_ref", "must be > 0 or null");
  require(std::isfinite(mdp.c_violation) && mdp.c_violation >= 0.0, "mdp.c_violation", "must be >= 0");
  require(std::isfinite(mdp.c_collision) && mdp.c_collision >= 0.0, "mdp.c_collision", "must be >= 0");
  {
    // Disc-packing bound: K discs of radius d_min/2 must fit in the inflated box.
    const double d = mdp.d_min;
    const double w = p.area.extent().x() + d;
    const double h = p.area.extent().y() + d;
    require(p.num_uavs * kPi * 0.25 * d * d <= w * h, "mdp.d_min",
            "cannot place K UAVs with this separation inside physics.area");
  }

  require(diffusion.steps >= 1, "diffusion.steps", "must be >= 1");
  require(diffusion.beta_min > 0.0 && diffusion.beta_min <= diffusion.beta_max &&
              diffusion.beta_max < 1.0,
          "diffusion.beta_min", "need 0 < beta_min <= beta_max < 1");
  require(diffusion.time_embed_dim >= 2 && diffusion.time_embed_dim % 2 == 0,
          "diffusion.time_embed_dim", "must be an even number >= 2");
  require(std::isfinite(diffusion.regularizer) && diffusion.regularizer >= 0.0,
          "diffusion.regularizer", "must be >= 0");

  const auto& a = agent;
  require(a.episodes >= 0, "agent.episodes", "must be >= 0");
  require(a.gamma > 0.0 && a.gamma <= 1.0, "agent.gamma", "must be in (0, 1]");
  require(a.tau > 0.0 && a.tau <= 1.0, "agent.tau", "must be in (0, 1]");
  require(a.policy_delay >= 1, "agent.policy_delay", "must be >= 1");
  require(std::isfinite(a.target_noise) && a.target_noise >= 0.0, "agent.target_noise", "must be >= 0");
  require(std::isfinite(a.target_noise_clip) && a.target_noise_clip >= 0.0, "agent.target_noise_clip",
          "must be >= 0");
  require(a.batch_size >= 1, "agent.batch_size", "must be >= 1");
  require(a.buffer_capacity >= a.batch_size, "agent.buffer_capacity", "must be >= agent.batch_size");
  require(finite_positive(a.critic_lr), "agent.critic_lr", "must be > 0");
  require(finite_positive(a.actor_lr), "agent.actor_lr", "must be > 0");
  require(std::isfinite(a.exploration_noise) && a.exploration_noise >= 0.0,
          "agent.exploration_noise", "must be >= 0");
  require(std::isfinite(a.sac_alpha) && a.sac_alpha >= 0.0, "agent.sac_alpha", "must be >= 0");
  require(a.warmup_factor >= 1, "agent.warmup_factor", "must be >= 1");
  require(a.updates_per_step >= 0, "agent.updates_per_step", "must be >= 0");
  require(a.checkpoint_interval >= 0, "agent.checkpoint_interval", "must be >= 0");
  validate_hidden(a.critic_hidden, "agent.critic_hidden");
  validate_hidden(a.actor_hidden, "agent.actor_hidden");
  validate_hidden(a.denoiser_hidden, "agent.denoiser_hidden");

  require(!seeds.empty(), "seeds", "at least one seed is required");
  require(!output_dir.empty(), "output_dir", "must not be empty");
}

RunConfig config_from_json(const json& doc) {
  RunConfig cfg;
  ObjectReader root(doc, "");
  root.section("physics", [&](ObjectReader& r) {
    auto& p = cfg.physics;
    r.read("num_uavs", p.num_uavs);
    r.read("element_tx_power", p.element_tx_power);
    r.read("carrier_frequency", p.carrier_frequency);
    r.read("noise_power", p.noise_power);
    r.read("area", p.area);
    r.read("altitude", p.altitude);
    r.read("bs_position", p.bs_position);
    r.read("eve_spawn", p.eve_spawn);
    r.read("eve_area", p.eve_area);
    r.read("eve_estimate_sigma", p.eve_estimate_sigma);
    r.read("include_comm_energy", p.include_comm_energy);
  });
  root.section("mobility", [&](ObjectReader& r) {
    auto& m = cfg.mobility;
    r.read("mean_speed", m.eavesdropper.mean_speed);
    r.read("alpha", m.eavesdropper.alpha);
    r.read("sigma", m.eavesdropper.sigma);
    r.read("v_max", m.v_max);
    r.read("dt", m.dt);
  });
  root.section("energy", [&](ObjectReader& r) {
    auto& e = cfg.energy;
    r.read("p0", e.p0);
    r.read("pi", e.pi);
    r.read("u_tip", e.u_tip);
    r.read("v0", e.v0);
    r.read("d0", e.d0);
    r.read("rho", e.rho);
    r.read("s", e.s);
    r.read("a_disc", e.a_disc);
  });
  root.section("mdp", [&](ObjectReader& r) {
    auto& m = cfg.mdp;
    r.read("episode_length", m.episode_length);
    r.read("d_min", m.d_min);
    r.read("w_secrecy", m.w_secrecy);
    r.read("w_energy", m.w_energy);
    r.read("rate_ref", m.rate_ref);
    r.read("energy_ref", m.energy_ref);
    r.read("c_violation", m.c_violation);
    r.read("c_collision", m.c_collision);
  });
  root.section("diffusion", [&](ObjectReader& r) {
    auto& d = cfg.diffusion;
    r.read("steps", d.steps);
    r.read("beta_min", d.beta_min);
    r.read("beta_max", d.beta_max);
    r.read("time_embed_dim", d.time_embed_dim);
    r.read("regularizer", d.regularizer);
  });
  root.section("agent", [&](ObjectReader& r) {
    auto& a = cfg.agent;
    std::string algo = to_string(a.algorithm);
    r.read("algorithm", algo);
    a.algorithm = algorithm_from_string(algo);
    r.read("episodes", a.episodes);
    r.read("gamma", a.gamma);
    r.read("tau", a.tau);
    r.read("policy_delay", a.policy_delay);
    r.read("target_noise", a.target_noise);
    r.read("target_noise_clip", a.target_noise_clip);
    r.read("twin_min", a.twin_min);
    r.read("batch_size", a.batch_size);
    r.read("buffer_capacity", a.buffer_capacity);
    r.read("critic_lr", a.critic_lr);
    r.read("actor_lr", a.actor_lr);
    r.read("exploration_noise", a.exploration_noise);
    r.read("sac_alpha", a.sac_alpha);
    r.read("warmup_factor", a.warmup_factor);
    r.read("updates_per_step", a.updates_per_step);
    r.read("critic_hidden", a.critic_hidden);
    r.read("actor_hidden", a.actor_hidden);
    r.read("denoiser_hidden", a.denoiser_hidden);
    r.read("checkpoint_interval", a.checkpoint_interval);
  });
  root.read("seeds", cfg.seeds);
  root.read("output_dir", cfg.output_dir);
  root.finish();
  cfg.validate();
  return cfg;
}

json config_to_json(const RunConfig& cfg) {
  const auto& p = cfg.physics;
  const auto& a = cfg.agent;
  json doc;
  doc["physics"] = {
      {"num_uavs", p.num_uavs},
      {"element_tx_power", p.element_tx_power},
      {"carrier_frequency", p.carrier_frequency},
      {"noise_power", p.noise_power},
      {"area", box_json(p.area)},
      {"altitude", p.altitude},
      {"bs_position", {p.bs_position.x(), p.bs_position.y(), p.bs_position.z()}},
      {"eve_spawn", box_json(p.eve_spawn)},
      {"eve_area", box_json(p.eve_area)},
      {"eve_estimate_sigma", p.eve_estimate_sigma},
      {"include_comm_energy", p.include_comm_energy},
  };
  doc["mobility"] = {
      {"mean_speed", cfg.mobility.eavesdropper.mean_speed},
      {"alpha", cfg.mobility.eavesdropper.alpha},
      {"sigma", cfg.mobility.eavesdropper.sigma},
      {"v_max", cfg.mobility.v_max},
      {"dt", cfg.mobility.dt},
  };
  const auto& e = cfg.energy;
  doc["energy"] = {{"p0", e.p0}, {"pi", e.pi},   {"u_tip", e.u_tip}, {"v0", e.v0},
                   {"d0", e.d0}, {"rho", e.rho}, {"s", e.s},         {"a_disc", e.a_disc}};
  const auto& m = cfg.mdp;
  doc["mdp"] = {
      {"episode_length", m.episode_length},
      {"d_min", m.d_min},
      {"w_secrecy", m.w_secrecy},
      {"w_energy", m.w_energy},
      {"rate_ref", m.rate_ref},
      {"energy_ref", m.energy_ref ? json(*m.energy_ref) : json(nullptr)},
      {"c_violation", m.c_violation},
      {"c_collision", m.c_collision},
  };
  const auto& d = cfg.diffusion;
  doc["diffusion"] = {{"steps", d.steps},
                      {"beta_min", d.beta_min},
                      {"beta_max", d.beta_max},
                      {"time_embed_dim", d.time_embed_dim},
                      {"regularizer", d.regularizer}};
  doc["agent"] = {
      {"algorithm", to_string(a.algorithm)},
      {"episodes", a.episodes},
      {"gamma", a.gamma},
      {"tau", a.tau},
      {"policy_delay", a.policy_delay},
      {"target_noise", a.target_noise},
      {"target_noise_clip", a.target_noise_clip},
      {"twin_min", a.twin_min},
      {"batch_size", a.batch_size},
      {"buffer_capacity", a.buffer_capacity},
      {"critic_lr", a.critic_lr},
      {"actor_lr", a.actor_lr},
      {"exploration_noise", a.exploration_noise},
      {"sac_alpha", a.sac_alpha},
      {"warmup_factor", a.warmup_factor},
      {"updates_per_step", a.updates_per_step},
      {"critic_hidden", a.critic_hidden},
      {"actor_hidden", a.actor_hidden},
      {"denoiser_hidden", a.denoiser_hidden},
      {"checkpoint_interval", a.checkpoint_interval},
  };
  doc["seeds"] = cfg.seeds;
  doc["output_dir"] = cfg.output_dir;
  return doc;
}

RunConfig parse_config(const std::string& text) {
  json doc;
  try {
    doc = text.find_first_not_of(" \t\r\n") == std::string::npos ? json::object()
                                                                 : json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError("<document>", std::string("parse error: ") + e.what());
  }
  return config_from_json(doc);
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string config_hash(const RunConfig& cfg) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", fnv1a64(config_to_json(cfg).dump()));
  return buf;
}

}  // namespace aerobeam

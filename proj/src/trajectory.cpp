#include "aerobeam/trajectory.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>

#include <nlohmann/json.hpp>

#include "aerobeam/channel.hpp"
#include "aerobeam/errors.hpp"
#include "aerobeam/mobility.hpp"

namespace aerobeam::traj {

using nlohmann::json;

namespace {

json vec(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }
json vec(const Vec2& v) { return json::array({v.x(), v.y()}); }

Vec3 vec3(const json& j) {
  if (!j.is_array() || j.size() != 3) throw IoError("expected a 3-vector");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}
Vec2 vec2(const json& j) {
  if (!j.is_array() || j.size() != 2) throw IoError("expected a 2-vector");
  return {j[0].get<double>(), j[1].get<double>()};
}

std::vector<Vec3> positions(const json& j) {
  std::vector<Vec3> out;
  for (const auto& p : j) out.push_back(vec3(p));
  return out;
}

}  // namespace

double ReplayStep::max_error() const {
  return std::max({reward_error, secrecy_error, energy_error, position_error});
}

json step_to_json(int episode, const env::SwarmState& state, std::span<const double> raw_action,
                  const env::DecodedAction& decoded, const env::StepOutcome& outcome) {
  json uavs = json::array();
  for (const auto& p : state.uav_positions) uavs.push_back(vec(p));
  json next = json::array();
  for (const auto& p : outcome.next_state.uav_positions) next.push_back(vec(p));
  json disp = json::array();
  for (const auto& d : decoded.displacements) disp.push_back(vec(d));
  const auto& e = state.eve_true;
  return {
      {"episode", episode},
      {"step", state.step_index},
      {"state",
       {{"uav_positions", uavs},
        {"eve", {{"position", vec(e.position)}, {"speed", e.speed}, {"heading", e.heading},
                 {"mean_heading", e.mean_heading}}},
        {"eve_estimate", vec(state.eve_estimate)},
        {"bs", vec(state.bs_position)}}},
      {"raw_action", std::vector<double>(raw_action.begin(), raw_action.end())},
      {"decoded", {{"weights", decoded.weights}, {"displacements", disp}}},
      {"outcome",
       {{"reward", outcome.reward},
        {"secrecy", outcome.secrecy},
        {"energy", outcome.energy},
        {"violations",
         {{"speed", outcome.violations.speed_count},
          {"collision", outcome.violations.collision_count},
          {"boundary", outcome.violations.boundary_count}}},
        {"done", outcome.done},
        {"uav_positions", next},
        {"applied_speeds", outcome.applied_speeds}}},
  };
}

void TrajectoryWriter::write(int episode, const env::SwarmState& state,
                             std::span<const double> raw_action, const env::StepOutcome& outcome,
                             const RunConfig& config) {
  const auto decoded = env::decode_action(raw_action, config);
  *out_ << step_to_json(episode, state, raw_action, decoded, outcome).dump() << '\n';
  if (!*out_) throw IoError("trajectory write failed");
  ++lines_;
}

namespace {

ReplayStep replay_line(const json& j, const RunConfig& config) {
  ReplayStep s;
  s.episode = j.at("episode").get<int>();
  s.step = j.at("step").get<int>();
  const json& st = j.at("state");
  const json& oc = j.at("outcome");
  const auto& p = config.physics;
  const int k = p.num_uavs;
  const double dt = config.mobility.dt;
  const double v_max = config.mobility.v_max;

  const std::vector<Vec3> before = positions(st.at("uav_positions"));
  const auto raw = j.at("raw_action").get<std::vector<double>>();
  if (static_cast<int>(before.size()) != k || static_cast<int>(raw.size()) != 3 * k) {
    throw IoError("dimensions do not match the configuration");
  }
  const auto weights = j.at("decoded").at("weights").get<std::vector<double>>();
  const json& disp = j.at("decoded").at("displacements");
  if (static_cast<int>(weights.size()) != k || static_cast<int>(disp.size()) != k) {
    throw IoError("decoded action has the wrong size");
  }

  // Decoding check folds into the position error.
  double decode_err = 0.0;
  const double reach = v_max * dt;
  for (int i = 0; i < k; ++i) {
    decode_err = std::max(decode_err, std::abs(weights[i] - 0.5 * (raw[i] + 1.0)));
    const Vec2 d = vec2(disp[i]);
    decode_err = std::max(decode_err, std::abs(d.x() - reach * raw[k + 2 * i]));
    decode_err = std::max(decode_err, std::abs(d.y() - reach * raw[k + 2 * i + 1]));
  }

  env::Violations v;
  std::vector<Vec3> after(k);
  std::vector<double> speeds(k);
  const Box3 bounds = config.uav_bounds();
  for (int i = 0; i < k; ++i) {
    const Vec2 d = vec2(disp[i]);
    const auto m = mobility::move_uav(before[i], Vec3(d.x(), d.y(), 0.0), bounds, v_max, dt);
    after[i] = m.position;
    speeds[i] = m.speed;
    v.speed_count += m.speed_violation;
    v.boundary_count += m.boundary_violation;
  }
  for (int a = 0; a < k; ++a) {
    for (int b = a + 1; b < k; ++b) v.collision_count += (after[a] - after[b]).norm() < config.mdp.d_min;
  }
  if (v.collision_count > 0) {
    after = before;
    std::fill(speeds.begin(), speeds.end(), 0.0);
  }

  const std::vector<Vec3> logged_after = positions(oc.at("uav_positions"));
  if (static_cast<int>(logged_after.size()) != k) throw IoError("outcome positions have the wrong size");
  s.position_error = decode_err;
  for (int i = 0; i < k; ++i) {
    s.position_error = std::max(s.position_error, (after[i] - logged_after[i]).cwiseAbs().maxCoeff());
  }

  const Vec3 bs = vec3(st.at("bs"));
  const Vec2 eve = vec2(st.at("eve").at("position"));
  beam::ElementLayout layout{after, p.wavelength()};
  beam::BeamConfig beam{weights, beam::steering_phases(layout, bs)};
  const auto ch = p.channel_params();
  const double r_bs = channel::link_budget(ch, layout, beam, bs).rate;
  const double r_eve = channel::link_budget(ch, layout, beam, Vec3(eve.x(), eve.y(), 0.0)).rate;
  const double secrecy = channel::secrecy_rate(r_bs, r_eve);

  double energy = mobility::step_energy(speeds, config.energy, dt);
  if (p.include_comm_energy) energy += k * p.element_tx_power * dt;
  const double reward = env::reward_fn(secrecy, energy, v, config);

  s.secrecy_error = std::abs(secrecy - oc.at("secrecy").get<double>());
  s.energy_error = std::abs(energy - oc.at("energy").get<double>());
  s.reward_error = std::abs(reward - oc.at("reward").get<double>());
  const json& lv = oc.at("violations");
  s.violations_match = lv.at("speed").get<int>() == v.speed_count &&
                       lv.at("collision").get<int>() == v.collision_count &&
                       lv.at("boundary").get<int>() == v.boundary_count;
  return s;
}

}  // namespace

ReplayReport replay(std::istream& in, const RunConfig& config, double tolerance) {
  config.validate();
  ReplayReport report;
  std::string line;
  long lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    ReplayStep s;
    try {
      s = replay_line(json::parse(line), config);
    } catch (const json::exception& e) {
      throw IoError("trajectory line " + std::to_string(lineno) + ": " + e.what());
    } catch (const Error& e) {
      throw IoError("trajectory line " + std::to_string(lineno) + ": " + e.what());
    }
    s.line = lineno;
    const double err = s.max_error();
    report.max_discrepancy = std::max(report.max_discrepancy, std::isnan(err) ? INFINITY : err);
    if (!(err <= tolerance) || !s.violations_match) report.flagged_lines.push_back(lineno);
    report.steps.push_back(s);
  }
  return report;
}

json report_to_json(const ReplayReport& report, double tolerance) {
  json flagged = json::array();
  for (const auto& s : report.steps) {
    if (!(s.max_error() <= tolerance) || !s.violations_match) {
      flagged.push_back({{"line", s.line},
                         {"episode", s.episode},
                         {"step", s.step},
                         {"reward_error", s.reward_error},
                         {"secrecy_error", s.secrecy_error},
                         {"energy_error", s.energy_error},
                         {"position_error", s.position_error},
                         {"violations_match", s.violations_match}});
    }
  }
  return {{"steps", report.steps.size()},
          {"max_discrepancy", report.max_discrepancy},
          {"tolerance", tolerance},
          {"flagged", flagged}};
}

}  // namespace aerobeam::traj

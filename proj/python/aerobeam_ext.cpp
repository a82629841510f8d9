#include <pybind11/complex.h>
#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <nlohmann/json.hpp>

#include "aerobeam/array_beam.hpp"
#include "aerobeam/channel.hpp"
#include "aerobeam/errors.hpp"
#include "aerobeam/harness.hpp"
#include "aerobeam/mobility.hpp"

namespace py = pybind11;
using namespace aerobeam;
using nlohmann::json;

namespace {

// Configurations cross the boundary as JSON text; the Python side converts dicts.
RunConfig config_of(const std::string& text) {
  RunConfig c = parse_config(text);
  c.validate();
  return c;
}

std::vector<Vec3> points(const std::vector<std::array<double, 3>>& v) {
  std::vector<Vec3> out;
  for (const auto& p : v) out.emplace_back(p[0], p[1], p[2]);
  return out;
}

Vec3 point(const std::array<double, 3>& p) { return {p[0], p[1], p[2]}; }

py::dict outcome_dict(const env::StepOutcome& o) {
  py::dict d;
  d["reward"] = o.reward;
  d["secrecy"] = o.secrecy;
  d["energy"] = o.energy;
  d["done"] = o.done;
  d["speed_violations"] = o.violations.speed_count;
  d["boundary_violations"] = o.violations.boundary_count;
  d["collisions"] = o.violations.collision_count;
  d["applied_speeds"] = o.applied_speeds;
  return d;
}

py::dict record_dict(const rl::LearningRecord& r) {
  py::dict d;
  d["episode"] = r.episode;
  d["total_reward"] = r.total_reward;
  d["mean_secrecy"] = r.mean_secrecy;
  d["mean_energy"] = r.mean_energy;
  d["speed_violations"] = r.speed_violations;
  d["collisions"] = r.collisions;
  return d;
}

}  // namespace

PYBIND11_MODULE(_aerobeam, m) {
  m.doc() = "Collaborative-beamforming UAV swarm: physics, environment and training";

  static py::exception<Error> error(m, "Error");
  py::register_exception<ConfigError>(m, "ConfigError", error.ptr());
  py::register_exception<DomainError>(m, "DomainError", error.ptr());
  py::register_exception<GeometryError>(m, "GeometryError", error.ptr());
  py::register_exception<ShapeError>(m, "ShapeError", error.ptr());
  py::register_exception<DivergenceError>(m, "DivergenceError", error.ptr());
  py::register_exception<IoError>(m, "IoError", error.ptr());

  m.def("default_config", [] { return config_to_json(RunConfig{}).dump(); });
  m.def("normalize_config", [](const std::string& text) { return config_to_json(config_of(text)).dump(); },
        py::arg("config"));
  m.def("config_hash", [](const std::string& text) { return config_hash(config_of(text)); },
        py::arg("config"));

  m.def("steering_phases",
        [](const std::vector<std::array<double, 3>>& positions, const std::array<double, 3>& target,
           double wavelength) {
          return beam::steering_phases({points(positions), wavelength}, point(target));
        },
        py::arg("positions"), py::arg("target"), py::arg("wavelength"));
  m.def("array_factor",
        [](const std::vector<std::array<double, 3>>& positions, const std::vector<double>& weights,
           const std::vector<double>& phases, const std::array<double, 3>& rx, double wavelength) {
          const beam::ElementLayout layout{points(positions), wavelength};
          return beam::array_factor(layout, {weights, phases}, point(rx));
        },
        py::arg("positions"), py::arg("weights"), py::arg("phases"), py::arg("rx"),
        py::arg("wavelength"));
  m.def("received_power",
        [](double af_mag, double distance, const std::string& config) {
          return channel::received_power(config_of(config).physics.channel_params(), af_mag, distance);
        },
        py::arg("af_mag"), py::arg("distance"), py::arg("config") = "{}");
  m.def("achievable_rate", &channel::achievable_rate, py::arg("snr"));
  m.def("secrecy_rate", &channel::secrecy_rate, py::arg("rate_bs"), py::arg("rate_eve"));
  m.def("propulsion_power",
        [](double speed, const std::string& config) {
          return mobility::propulsion_power(speed, config_of(config).energy);
        },
        py::arg("speed"), py::arg("config") = "{}");

  py::class_<env::SwarmEnv>(m, "SwarmEnv")
      .def(py::init([](const std::string& config) { return env::SwarmEnv(config_of(config)); }),
           py::arg("config") = "{}")
      .def("reset",
           [](env::SwarmEnv& e, std::uint64_t seed) {
             e.reset(seed);
             return e.observation();
           },
           py::arg("seed"))
      .def("step",
           [](env::SwarmEnv& e, const std::vector<double>& action) {
             return outcome_dict(e.step(action));
           },
           py::arg("action"))
      .def("observation", &env::SwarmEnv::observation)
      .def_property_readonly("uav_positions", [](const env::SwarmEnv& e) {
        std::vector<std::array<double, 3>> out;
        for (const auto& p : e.state().uav_positions) out.push_back({p.x(), p.y(), p.z()});
        return out;
      })
      .def_property_readonly("step_index", [](const env::SwarmEnv& e) { return e.state().step_index; });

  m.def("train",
        [](const std::string& algorithm, const std::string& config, std::uint64_t seed) {
          const RunConfig c = config_of(config);
          const Algorithm a = algorithm_from_string(algorithm);
          rl::TrainResult r = [&] {
            py::gil_scoped_release release;
            return rl::train(a, c, seed);
          }();
          py::list records;
          for (const auto& rec : r.records) records.append(record_dict(rec));
          py::dict d;
          d["records"] = records;
          d["env_steps"] = r.env_steps;
          d["updates"] = r.updates;
          d["diverged"] = r.diverged;
          d["diagnostic"] = r.diagnostic;
          d["agent"] = r.agent.to_json().dump();
          return d;
        },
        py::arg("algorithm"), py::arg("config") = "{}", py::arg("seed") = 0);
  m.def("evaluate",
        [](const std::string& agent, const std::string& config, int episodes, std::uint64_t seed) {
          const RunConfig c = config_of(config);
          const auto bundle = rl::AgentBundle::from_json(json::parse(agent), c);
          const rl::EvalMetrics e = rl::evaluate(bundle, c, episodes, seed);
          py::dict d;
          d["mean_secrecy"] = e.mean_secrecy;
          d["mean_energy"] = e.mean_energy;
          d["mean_reward"] = e.mean_reward;
          d["steps"] = e.steps;
          return d;
        },
        py::arg("agent"), py::arg("config") = "{}", py::arg("episodes") = 10, py::arg("seed") = 0);

  m.def("compare",
        [](const std::vector<std::string>& dirs, const std::string& baseline, int window) {
          std::vector<harness::fs::path> paths(dirs.begin(), dirs.end());
          const auto report = harness::cmd_compare(paths, baseline, window);
          return py::make_tuple(harness::comparison_to_json(report).dump(),
                                harness::format_comparison(report));
        },
        py::arg("runs"), py::arg("baseline") = "TD3", py::arg("window") = 100);
  m.def("replay",
        [](const std::string& path, const std::string& config, double tolerance) {
          return harness::cmd_replay(config_of(config), path, tolerance).dump();
        },
        py::arg("trajectory"), py::arg("config") = "{}", py::arg("tolerance") = 1e-10);
}

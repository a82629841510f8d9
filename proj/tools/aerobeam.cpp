// Command-line front end: train, evaluate, compare, beampattern, replay.
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "aerobeam/errors.hpp"
#include "aerobeam/harness.hpp"
#include "aerobeam/numfmt.hpp"

namespace {

using namespace aerobeam;
namespace fs = std::filesystem;

constexpr int kExitConfig = 2;
constexpr int kExitDivergence = 3;
constexpr int kExitIo = 4;

std::vector<double> parse_list(const std::string& s, const char* field) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      out.push_back(parse_double(item));
    } catch (const Error&) {
      throw ConfigError(field, "not a number: '" + item + "'");
    }
  }
  return out;
}

Vec3 parse_vec3(const std::string& s, const char* field) {
  const auto v = parse_list(s, field);
  if (v.size() != 3) throw ConfigError(field, "expected x,y,z");
  return {v[0], v[1], v[2]};
}

// "x,y,z;x,y,z;..."
std::vector<Vec3> parse_positions(const std::string& s) {
  std::vector<Vec3> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ';')) out.push_back(parse_vec3(item, "positions"));
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Collaborative-beamforming UAV swarm experiments"};
  app.require_subcommand(1);

  std::string config_path;
  std::string seeds_spec;
  std::string out_dir;
  bool quiet = false;
  app.add_option("--config", config_path, "JSON run configuration (defaults if omitted)");
  app.add_option("--seed,--seeds", seeds_spec, "Seed count N (0..N-1) or list a,b,c");
  app.add_option("--out", out_dir, "Output directory");
  app.add_flag("--quiet", quiet, "Suppress progress output");

  auto* train = app.add_subcommand("train", "Train agents and write learning records");
  std::string algo = "GDMTD3";
  int episodes = -1;
  train->add_option("--algo", algo, "GDMTD3, TD3, DDPG, SAC or all");
  train->add_option("--episodes", episodes, "Override the configured episode count");

  auto* evaluate = app.add_subcommand("evaluate", "Roll out trained agents without exploration");
  std::string run_dir;
  int eval_episodes = 10;
  std::string trajectory_out;
  evaluate->add_option("run", run_dir, "Algorithm directory written by train")->required();
  evaluate->add_option("--episodes", eval_episodes, "Evaluation episodes per seed");
  evaluate->add_option("--trajectory", trajectory_out, "Write every step as JSONL");

  auto* compare = app.add_subcommand("compare", "Aggregate final-window metrics across runs");
  std::vector<std::string> compare_dirs;
  std::string baseline = "TD3";
  int window = 100;
  compare->add_option("runs", compare_dirs, "Run directories")->required();
  compare->add_option("--baseline", baseline, "Reference algorithm for the deltas");
  compare->add_option("--window", window, "Final-episode window");

  auto* beampattern = app.add_subcommand("beampattern", "Export |AF|^2 on a spherical grid");
  std::string positions, weights, target;
  double radius = 0.0;
  int az_points = 360, el_points = 91;
  bool no_svg = false;
  beampattern->add_option("--positions", positions, "Element positions x,y,z;x,y,z;...");
  beampattern->add_option("--weights", weights, "Excitation weights w1,w2,...");
  beampattern->add_option("--target", target, "Steering target x,y,z (default: base station)");
  auto* radius_opt = beampattern->add_option("--radius", radius, "Sampling sphere radius in m");
  beampattern->add_option("--az-points", az_points, "Azimuth samples");
  beampattern->add_option("--el-points", el_points, "Elevation samples");
  beampattern->add_flag("--no-svg", no_svg, "Skip the polar SVG");

  auto* replay = app.add_subcommand("replay", "Recompute a JSONL trajectory and report discrepancies");
  std::string trajectory_in;
  double tolerance = 1e-10;
  replay->add_option("trajectory", trajectory_in, "Trajectory JSONL")->required();
  replay->add_option("--tolerance", tolerance, "Absolute tolerance for flagging a step");

  CLI11_PARSE(app, argc, argv);

  try {
    RunConfig config = config_path.empty() ? RunConfig{} : load_config(config_path);
    if (episodes >= 0) {
      config.agent.episodes = episodes;
    }
    config.validate();
    const std::vector<std::uint64_t> seeds =
        seeds_spec.empty() ? std::vector<std::uint64_t>{} : harness::parse_seeds(seeds_spec);

    if (*train) {
      harness::TrainRequest req{config, harness::parse_algorithms(algo),
                                seeds.empty() ? config.seeds : seeds,
                                out_dir.empty() ? fs::path(config.output_dir) : fs::path(out_dir),
                                quiet};
      const auto summary = harness::cmd_train(req, std::cerr);
      if (summary.diverged) {
        for (const auto& d : summary.diagnostics) std::cerr << "divergence: " << d << '\n';
        return kExitDivergence;
      }
    } else if (*evaluate) {
      harness::EvaluateRequest req{config, run_dir, seeds, eval_episodes, std::nullopt};
      if (!trajectory_out.empty()) req.trajectory = trajectory_out;
      std::cout << harness::cmd_evaluate(req).dump(2) << '\n';
    } else if (*compare) {
      std::vector<fs::path> dirs(compare_dirs.begin(), compare_dirs.end());
      const auto report = harness::cmd_compare(dirs, baseline, window);
      std::cout << harness::format_comparison(report);
      const fs::path json_path =
          (out_dir.empty() ? fs::path(".") : fs::path(out_dir)) / "comparison.json";
      if (!out_dir.empty()) fs::create_directories(out_dir);
      std::ofstream f(json_path);
      if (!f) throw IoError("cannot write " + json_path.string());
      f << harness::comparison_to_json(report).dump(2) << '\n';
    } else if (*beampattern) {
      harness::BeamPatternRequest req;
      req.config = config;
      req.seed = seeds.empty() ? config.seeds.front() : seeds.front();
      if (!positions.empty()) req.positions = parse_positions(positions);
      if (!weights.empty()) req.weights = parse_list(weights, "weights");
      if (!target.empty()) req.target = parse_vec3(target, "target");
      if (radius_opt->count() > 0) req.radius = radius;
      req.azimuth_points = az_points;
      req.elevation_points = el_points;
      req.out = out_dir.empty() ? fs::path("beampattern") : fs::path(out_dir);
      req.svg = !no_svg;
      const auto res = harness::cmd_beampattern(req);
      double peak = 0.0;
      for (double v : res.pattern.af_sq) peak = std::max(peak, v);
      if (!quiet) {
        std::cout << "wrote " << (req.out / "pattern.csv").string() << " (max |AF|^2 = "
                  << format_double(peak) << ")\n";
      }
    } else if (*replay) {
      std::cout << harness::cmd_replay(config, trajectory_in, tolerance).dump(2) << '\n';
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const DivergenceError& e) {
    std::cerr << "divergence: " << e.what() << '\n';
    return kExitDivergence;
  } catch (const IoError& e) {
    std::cerr << "I/O error: " << e.what() << '\n';
    return kExitIo;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "I/O error: " << e.what() << '\n';
    return kExitIo;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitConfig;
  }
  return 0;
}

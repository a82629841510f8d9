#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "aerobeam/trainer.hpp"

// Experiment orchestration behind the command-line tool.
namespace aerobeam::harness {

namespace fs = std::filesystem;

inline constexpr const char* kToolVersion = "0.1.0";

// "N" -> 0..N-1; "a,b,c" -> that list. Throws ConfigError on bad input.
std::vector<std::uint64_t> parse_seeds(const std::string& spec);

// min(jobs, AEROBEAM_THREADS or the hardware concurrency), at least 1.
int worker_count(int jobs);

// "all" or a single algorithm name.
std::vector<Algorithm> parse_algorithms(const std::string& spec);

struct TrainRequest {
  RunConfig config;
  std::vector<Algorithm> algorithms;
  std::vector<std::uint64_t> seeds;
  fs::path out;
  bool quiet = false;
};

struct TrainSummary {
  bool diverged = false;
  std::vector<std::string> diagnostics;
};

// Writes <out>/<ALGO>/seed_<n>/{learning.csv, agent.json, checkpoints/} and
// <out>/<ALGO>/{manifest.json, config.json}. Seeds run in parallel.
TrainSummary cmd_train(const TrainRequest& request, std::ostream& log);

fs::path seed_dir(const fs::path& algo_dir, std::uint64_t seed);

struct EvaluateRequest {
  RunConfig config;
  fs::path run_dir;  // an algorithm directory written by cmd_train
  std::vector<std::uint64_t> seeds;  // empty: every seed in the manifest
  int episodes = 10;
  std::optional<fs::path> trajectory;  // JSONL of every evaluated step
};

nlohmann::json cmd_evaluate(const EvaluateRequest& request);

struct AlgorithmSummary {
  std::string label;
  std::string algorithm;
  fs::path path;
  std::vector<std::uint64_t> seeds;
  int window = 0;
  double reward_mean = 0.0, reward_std = 0.0;
  double secrecy_mean = 0.0, secrecy_std = 0.0;
  double energy_mean = 0.0, energy_std = 0.0;
  double secrecy_delta_pct = 0.0;     // vs baseline, positive = better
  double energy_reduction_pct = 0.0;  // vs baseline, positive = less energy
  std::vector<std::string> dominated_by;
};

struct ComparisonReport {
  std::string baseline;
  std::vector<AlgorithmSummary> entries;  // sorted by label
};

// Each path is an algorithm directory or a parent holding several.
// Statistics are mean and sample std over seeds of final-window averages.
ComparisonReport cmd_compare(const std::vector<fs::path>& run_dirs,
                             const std::string& baseline = "TD3", int window = 100);

std::string format_comparison(const ComparisonReport& report);
nlohmann::json comparison_to_json(const ComparisonReport& report);

struct BeamPatternRequest {
  RunConfig config;
  std::uint64_t seed = 0;                      // positions from reset(seed) if none given
  std::optional<std::vector<Vec3>> positions;
  std::optional<std::vector<double>> weights;  // default: all ones
  std::optional<Vec3> target;                  // default: base station
  std::optional<double> radius;                // default: centroid-to-target distance
  int azimuth_points = 360;
  int elevation_points = 91;
  fs::path out;
  bool svg = true;
};

struct BeamPatternResult {
  beam::BeamPattern pattern;
  double target_azimuth = 0.0;
  double target_elevation = 0.0;
};

// Writes <out>/pattern.csv and <out>/pattern.svg (cut at the target elevation).
// The grid always contains the steering direction.
BeamPatternResult cmd_beampattern(const BeamPatternRequest& request);

nlohmann::json cmd_replay(const RunConfig& config, const fs::path& trajectory,
                          double tolerance = 1e-10);

}  // namespace aerobeam::harness

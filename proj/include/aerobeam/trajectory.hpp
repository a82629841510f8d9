#pragma once

#include <iosfwd>
#include <span>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "aerobeam/env.hpp"

// JSONL step logs and their offline audit.
namespace aerobeam::traj {

// One line per step: {episode, step, state, raw_action, decoded, outcome}.
// `state` is the pre-step state; `outcome` carries the post-move UAV
// positions, applied speeds and the reported reward terms.
nlohmann::json step_to_json(int episode, const env::SwarmState& state,
                            std::span<const double> raw_action, const env::DecodedAction& decoded,
                            const env::StepOutcome& outcome);

class TrajectoryWriter {
 public:
  explicit TrajectoryWriter(std::ostream& out) : out_(&out) {}

  void write(int episode, const env::SwarmState& state, std::span<const double> raw_action,
             const env::StepOutcome& outcome, const RunConfig& config);
  long lines() const { return lines_; }

 private:
  std::ostream* out_;
  long lines_ = 0;
};

struct ReplayStep {
  long line = 0;  // 1-based line number in the file
  int episode = 0;
  int step = 0;
  double reward_error = 0.0;
  double secrecy_error = 0.0;
  double energy_error = 0.0;
  double position_error = 0.0;  // max over UAV coordinates
  bool violations_match = true;

  double max_error() const;
};

struct ReplayReport {
  std::vector<ReplayStep> steps;
  double max_discrepancy = 0.0;
  std::vector<long> flagged_lines;  // steps above tolerance or with mismatched counts
};

// Recomputes every logged step from positions and the raw action with the
// beam, channel and mobility modules directly (not through env::step).
// Throws IoError naming the line on malformed input.
ReplayReport replay(std::istream& in, const RunConfig& config, double tolerance = 1e-10);

nlohmann::json report_to_json(const ReplayReport& report, double tolerance);

}  // namespace aerobeam::traj

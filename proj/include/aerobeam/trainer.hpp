#pragma once

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "aerobeam/agent.hpp"
#include "aerobeam/trajectory.hpp"

// Episode loop: warm-up, exploration, replay, updates and per-episode records.
namespace aerobeam::rl {

struct LearningRecord {
  int episode = 0;
  double total_reward = 0.0;
  double mean_secrecy = 0.0;  // bits/s/Hz per step
  double mean_energy = 0.0;   // J per step
  long speed_violations = 0;
  long collisions = 0;

  bool operator==(const LearningRecord&) const = default;
};

struct TrainOptions {
  // Called after every completed episode.
  std::function<void(const LearningRecord&)> on_episode;
  // Called every checkpoint_interval episodes (if > 0).
  std::function<void(int episode, const AgentBundle&)> on_checkpoint;
};

struct TrainResult {
  std::vector<LearningRecord> records;
  AgentBundle agent;
  long env_steps = 0;
  long updates = 0;
  bool diverged = false;
  std::string diagnostic;  // set when diverged
};

// Pure function of (algorithm, config, seed). A non-finite loss stops the run;
// completed episodes are kept and `diverged` is set.
TrainResult train(Algorithm algorithm, const RunConfig& config, std::uint64_t seed,
                  const TrainOptions& options = {});

struct EvalMetrics {
  double mean_secrecy = 0.0;  // per step
  double mean_energy = 0.0;   // per step
  double mean_reward = 0.0;   // per step
  long steps = 0;
};

// Exploration-free rollout; GDMTD3 runs its chain without injected noise
// from a generator pinned by `seed`.
EvalMetrics evaluate(const AgentBundle& agent, const RunConfig& config, int episodes,
                     std::uint64_t seed, traj::TrajectoryWriter* writer = nullptr);

inline constexpr const char* kLearningCsvHeader =
    "episode,total_reward,mean_secrecy,mean_energy,speed_violations,collisions";

void write_learning_csv(const std::filesystem::path& path,
                        const std::vector<LearningRecord>& records);
std::vector<LearningRecord> read_learning_csv(const std::filesystem::path& path);

}  // namespace aerobeam::rl

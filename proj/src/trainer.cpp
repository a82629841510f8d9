#include "aerobeam/trainer.hpp"

#include <fstream>
#include <sstream>

#include "aerobeam/errors.hpp"
#include "aerobeam/numfmt.hpp"

namespace aerobeam::rl {

namespace {

// Stream tags; none depends on the algorithm, so runs that differ only in
// the algorithm label see the same environments and draws.
constexpr std::uint64_t kEnvStream = 0xe1;
constexpr std::uint64_t kActStream = 0xac;
constexpr std::uint64_t kUpdateStream = 0x0d;
constexpr std::uint64_t kAgentStream = 0xa9;
constexpr std::uint64_t kEvalEnvStream = 0xee;
constexpr std::uint64_t kEvalActStream = 0xea;

Vector column(const Matrix& m) { return m.col(0); }

}  // namespace

TrainResult train(Algorithm algorithm, const RunConfig& config, std::uint64_t seed,
                  const TrainOptions& options) {
  config.validate();
  TrainResult result{{}, AgentBundle(config, algorithm, derive_seed(seed, kAgentStream)), 0, 0,
                     false, {}};
  AgentBundle& agent = result.agent;
  const AgentConfig& hp = agent.hyper();
  const int episodes = config.agent.episodes;
  const int act_dim = agent.action_dim();

  ReplayBuffer buffer(agent.obs_dim(), act_dim, hp.buffer_capacity);
  const long warmup = static_cast<long>(hp.batch_size) * hp.warmup_factor;
  Rng act_rng(derive_seed(seed, kActStream));
  Rng update_rng(derive_seed(seed, kUpdateStream));
  env::SwarmEnv environment(config);

  for (int ep = 0; ep < episodes; ++ep) {
    environment.reset(derive_seed(seed, kEnvStream, static_cast<std::uint64_t>(ep)));
    LearningRecord rec;
    rec.episode = ep;
    double secrecy_sum = 0.0;
    double energy_sum = 0.0;
    int steps = 0;
    try {
      bool done = false;
      while (!done) {
        const Vector obs = environment.observation();
        Vector action(act_dim);
        if (buffer.size() < warmup) {
          for (int i = 0; i < act_dim; ++i) action[i] = uniform(act_rng, -1.0, 1.0);
        } else {
          action = column(agent.act(obs, act_rng, true));
        }
        const env::StepOutcome out =
            environment.step(std::span<const double>(action.data(), action.size()));
        done = out.done;
        buffer.push({obs, action, out.reward, environment.observation(), out.done});
        ++result.env_steps;
        ++steps;
        rec.total_reward += out.reward;
        secrecy_sum += out.secrecy;
        energy_sum += out.energy;
        rec.speed_violations += out.violations.speed_count;
        rec.collisions += out.violations.collision_count;

        if (buffer.size() >= warmup) {
          for (int u = 0; u < hp.updates_per_step; ++u) {
            agent.update(buffer.sample(hp.batch_size, update_rng), update_rng);
            ++result.updates;
          }
        }
      }
    } catch (const DivergenceError& e) {
      result.diverged = true;
      result.diagnostic = "episode " + std::to_string(ep) + ", step " + std::to_string(steps) +
                          ", update " + std::to_string(result.updates) + ": " + e.what();
      return result;
    }
    rec.mean_secrecy = secrecy_sum / steps;
    rec.mean_energy = energy_sum / steps;
    result.records.push_back(rec);
    if (options.on_episode) options.on_episode(rec);
    if (options.on_checkpoint && hp.checkpoint_interval > 0 &&
        (ep + 1) % hp.checkpoint_interval == 0) {
      options.on_checkpoint(ep + 1, agent);
    }
  }
  return result;
}

EvalMetrics evaluate(const AgentBundle& agent, const RunConfig& config, int episodes,
                     std::uint64_t seed, traj::TrajectoryWriter* writer) {
  if (agent.obs_dim() != config.observation_dim() || agent.action_dim() != config.action_dim()) {
    throw ShapeError("agent dimensions do not match the configuration");
  }
  EvalMetrics m;
  Rng act_rng(derive_seed(seed, kEvalActStream));
  env::SwarmEnv environment(config);
  for (int ep = 0; ep < episodes; ++ep) {
    environment.reset(derive_seed(seed, kEvalEnvStream, static_cast<std::uint64_t>(ep)));
    bool done = false;
    while (!done) {
      const Vector action = column(agent.act(environment.observation(), act_rng, false));
      const env::SwarmState before = environment.state();
      const std::span<const double> raw(action.data(), action.size());
      const env::StepOutcome out = environment.step(raw);
      if (writer) writer->write(ep, before, raw, out, config);
      done = out.done;
      m.mean_secrecy += out.secrecy;
      m.mean_energy += out.energy;
      m.mean_reward += out.reward;
      ++m.steps;
    }
  }
  if (m.steps > 0) {
    m.mean_secrecy /= m.steps;
    m.mean_energy /= m.steps;
    m.mean_reward /= m.steps;
  }
  return m;
}

void write_learning_csv(const std::filesystem::path& path,
                        const std::vector<LearningRecord>& records) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << kLearningCsvHeader << '\n';
  for (const auto& r : records) {
    out << r.episode << ',' << format_double(r.total_reward) << ','
        << format_double(r.mean_secrecy) << ',' << format_double(r.mean_energy) << ','
        << r.speed_violations << ',' << r.collisions << '\n';
  }
  if (!out) throw IoError("write failed for " + path.string());
}

std::vector<LearningRecord> read_learning_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != kLearningCsvHeader) {
    throw IoError(path.string() + ": unexpected learning-record header");
  }
  std::vector<LearningRecord> out;
  long lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) f.push_back(cell);
    if (f.size() != 6) {
      throw IoError(path.string() + ":" + std::to_string(lineno) + ": expected 6 fields");
    }
    try {
      LearningRecord r;
      r.episode = std::stoi(f[0]);
      r.total_reward = parse_double(f[1]);
      r.mean_secrecy = parse_double(f[2]);
      r.mean_energy = parse_double(f[3]);
      r.speed_violations = std::stol(f[4]);
      r.collisions = std::stol(f[5]);
      out.push_back(r);
    } catch (const std::exception& e) {
      throw IoError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace aerobeam::rl

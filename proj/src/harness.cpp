#include "aerobeam/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <exception>
#include <fstream>
#include <map>
#include <mutex>
#include <numeric>
#include <sstream>
#include <thread>

#include <nlohmann/json.hpp>

#include "aerobeam/errors.hpp"

namespace aerobeam::harness {

using nlohmann::json;

namespace {

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("write failed for " + path.string());
}

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw IoError(path.string() + ": " + e.what());
  }
}

std::string utc_now() {
  const std::time_t t = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

double mean(const std::vector<double>& v) {
  return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / v.size();
}

double sample_std(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / (v.size() - 1));
}

}  // namespace

std::vector<std::uint64_t> parse_seeds(const std::string& spec) {
  auto parse_one = [&](const std::string& s) -> std::uint64_t {
    if (s.empty() || s.find_first_not_of("0123456789") != std::string::npos) {
      throw ConfigError("seeds", "expected a count or a comma-separated list, got '" + spec + "'");
    }
    return std::stoull(s);
  };
  std::vector<std::uint64_t> out;
  if (spec.find(',') == std::string::npos) {
    const std::uint64_t n = parse_one(spec);
    if (n == 0) throw ConfigError("seeds", "count must be >= 1");
    for (std::uint64_t i = 0; i < n; ++i) out.push_back(i);
    return out;
  }
  std::stringstream ss(spec);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_one(item));
  std::vector<std::uint64_t> sorted = out;
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
    throw ConfigError("seeds", "duplicate seed in '" + spec + "'");
  }
  return out;
}

int worker_count(int jobs) {
  int cap = static_cast<int>(std::thread::hardware_concurrency());
  if (const char* env = std::getenv("AEROBEAM_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v > 0) cap = static_cast<int>(v);
  }
  return std::max(1, std::min(jobs, std::max(cap, 1)));
}

std::vector<Algorithm> parse_algorithms(const std::string& spec) {
  std::string lower = spec;
  std::transform(lower.begin(), lower.end(), lower.begin(), ::tolower);
  if (lower == "all") return {std::begin(kAllAlgorithms), std::end(kAllAlgorithms)};
  return {algorithm_from_string(spec)};
}

fs::path seed_dir(const fs::path& algo_dir, std::uint64_t seed) {
  return algo_dir / ("seed_" + std::to_string(seed));
}

TrainSummary cmd_train(const TrainRequest& req, std::ostream& log) {
  req.config.validate();
  if (req.algorithms.empty()) throw ConfigError("algo", "no algorithm selected");
  if (req.seeds.empty()) throw ConfigError("seeds", "no seeds given");

  struct Job {
    Algorithm algorithm;
    std::uint64_t seed;
    json run;  // manifest entry
    std::exception_ptr error;
  };
  std::vector<Job> jobs;
  for (Algorithm a : req.algorithms) {
    const fs::path dir = req.out / to_string(a);
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
    write_text(dir / "config.json", config_to_json(req.config).dump(2) + "\n");
    for (std::uint64_t s : req.seeds) jobs.push_back({a, s, {}, nullptr});
  }

  std::mutex log_mutex;
  auto say = [&](const std::string& msg) {
    if (req.quiet) return;
    std::lock_guard lock(log_mutex);
    log << msg << std::endl;
  };

  auto run_job = [&](Job& job) {
    const fs::path dir = seed_dir(req.out / to_string(job.algorithm), job.seed);
    fs::create_directories(dir);
    const int interval = std::max(1, req.config.agent.episodes / 10);
    rl::TrainOptions opts;
    opts.on_episode = [&](const rl::LearningRecord& r) {
      if ((r.episode + 1) % interval == 0) {
        say(to_string(job.algorithm) + " seed " + std::to_string(job.seed) + " episode " +
            std::to_string(r.episode + 1) + " reward " + fixed(r.total_reward, 3) +
            " secrecy " + fixed(r.mean_secrecy, 4) + " energy " + fixed(r.mean_energy, 2));
      }
    };
    opts.on_checkpoint = [&](int episode, const rl::AgentBundle& agent) {
      fs::create_directories(dir / "checkpoints");
      write_text(dir / "checkpoints" / ("agent_ep" + std::to_string(episode) + ".json"),
                 agent.to_json().dump() + "\n");
    };
    const auto t0 = std::chrono::steady_clock::now();
    rl::TrainResult res = rl::train(job.algorithm, req.config, job.seed, opts);
    const double wall =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    rl::write_learning_csv(dir / "learning.csv", res.records);
    write_text(dir / "agent.json", res.agent.to_json().dump() + "\n");
    job.run = {{"seed", job.seed},
               {"episodes_completed", res.records.size()},
               {"env_steps", res.env_steps},
               {"updates", res.updates},
               {"diverged", res.diverged},
               {"diagnostic", res.diagnostic},
               {"wall_seconds", wall}};
    if (res.diverged) say("divergence: " + to_string(job.algorithm) + " seed " +
                          std::to_string(job.seed) + ": " + res.diagnostic);
  };

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i; (i = next++) < jobs.size();) {
      try {
        run_job(jobs[i]);
      } catch (...) {
        jobs[i].error = std::current_exception();
      }
    }
  };
  const int n_workers = worker_count(static_cast<int>(jobs.size()));
  if (n_workers == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (int w = 0; w < n_workers; ++w) pool.emplace_back(worker);
  }

  TrainSummary summary;
  for (Algorithm a : req.algorithms) {
    json runs = json::array();
    for (const auto& j : jobs) {
      if (j.algorithm != a || j.error) continue;
      runs.push_back(j.run);
      if (j.run.at("diverged").get<bool>()) {
        summary.diverged = true;
        summary.diagnostics.push_back(to_string(a) + " seed " + std::to_string(j.seed) + ": " +
                                      j.run.at("diagnostic").get<std::string>());
      }
    }
    const json manifest = {{"format", "aerobeam.manifest"},
                           {"version", 1},
                           {"tool_version", kToolVersion},
                           {"algorithm", to_string(a)},
                           {"config_hash", config_hash(req.config)},
                           {"episodes", req.config.agent.episodes},
                           {"seeds", req.seeds},
                           {"runs", runs},
                           {"created_at", utc_now()}};
    write_text(req.out / to_string(a) / "manifest.json", manifest.dump(2) + "\n");
  }
  for (const auto& j : jobs) {
    if (j.error) std::rethrow_exception(j.error);
  }
  return summary;
}

json cmd_evaluate(const EvaluateRequest& req) {
  const json manifest = read_json(req.run_dir / "manifest.json");
  std::vector<std::uint64_t> seeds = req.seeds;
  if (seeds.empty()) seeds = manifest.at("seeds").get<std::vector<std::uint64_t>>();
  std::unique_ptr<std::ofstream> traj_file;
  std::unique_ptr<traj::TrajectoryWriter> writer;
  if (req.trajectory) {
    traj_file = std::make_unique<std::ofstream>(*req.trajectory, std::ios::binary);
    if (!*traj_file) throw IoError("cannot write " + req.trajectory->string());
    writer = std::make_unique<traj::TrajectoryWriter>(*traj_file);
  }
  json per_seed = json::array();
  std::vector<double> sec, en, rew;
  for (std::uint64_t s : seeds) {
    const rl::AgentBundle agent =
        rl::AgentBundle::from_json(read_json(seed_dir(req.run_dir, s) / "agent.json"), req.config);
    const rl::EvalMetrics m = rl::evaluate(agent, req.config, req.episodes, s, writer.get());
    per_seed.push_back({{"seed", s},
                        {"mean_secrecy", m.mean_secrecy},
                        {"mean_energy", m.mean_energy},
                        {"mean_reward", m.mean_reward},
                        {"steps", m.steps}});
    sec.push_back(m.mean_secrecy);
    en.push_back(m.mean_energy);
    rew.push_back(m.mean_reward);
  }
  return {{"algorithm", manifest.at("algorithm")},
          {"episodes", req.episodes},
          {"seeds", per_seed},
          {"mean_secrecy", mean(sec)},
          {"mean_energy", mean(en)},
          {"mean_reward", mean(rew)}};
}

namespace {

std::vector<fs::path> algorithm_dirs(const fs::path& p) {
  if (fs::exists(p / "manifest.json")) return {p};
  std::vector<fs::path> out;
  if (fs::is_directory(p)) {
    for (const auto& e : fs::directory_iterator(p)) {
      if (e.is_directory() && fs::exists(e.path() / "manifest.json")) out.push_back(e.path());
    }
  }
  if (out.empty()) throw IoError(p.string() + ": no run manifest found");
  std::sort(out.begin(), out.end());
  return out;
}

AlgorithmSummary summarize(const fs::path& dir, int window) {
  const json manifest = read_json(dir / "manifest.json");
  AlgorithmSummary s;
  s.algorithm = manifest.at("algorithm").get<std::string>();
  s.path = dir;
  s.seeds = manifest.at("seeds").get<std::vector<std::uint64_t>>();
  std::sort(s.seeds.begin(), s.seeds.end());
  std::vector<double> rew, sec, en;
  int used = -1;
  for (std::uint64_t seed : s.seeds) {
    const auto records = rl::read_learning_csv(seed_dir(dir, seed) / "learning.csv");
    if (records.empty()) throw IoError(dir.string() + ": seed " + std::to_string(seed) + " has no episodes");
    const int w = std::min<int>(window, static_cast<int>(records.size()));
    used = used < 0 ? w : std::min(used, w);
    double r = 0.0, se = 0.0, e = 0.0;
    for (auto it = records.end() - w; it != records.end(); ++it) {
      r += it->total_reward;
      se += it->mean_secrecy;
      e += it->mean_energy;
    }
    rew.push_back(r / w);
    sec.push_back(se / w);
    en.push_back(e / w);
  }
  s.window = used;
  s.reward_mean = mean(rew);
  s.reward_std = sample_std(rew);
  s.secrecy_mean = mean(sec);
  s.secrecy_std = sample_std(sec);
  s.energy_mean = mean(en);
  s.energy_std = sample_std(en);
  return s;
}

}  // namespace

ComparisonReport cmd_compare(const std::vector<fs::path>& run_dirs, const std::string& baseline,
                             int window) {
  if (window < 1) throw ConfigError("window", "must be >= 1");
  std::vector<AlgorithmSummary> entries;
  for (const auto& p : run_dirs) {
    for (const auto& d : algorithm_dirs(p)) entries.push_back(summarize(d, window));
  }
  if (entries.size() < 2) throw ConfigError("runs", "need at least two run directories to compare");
  for (const auto& e : entries) {
    if (e.seeds != entries.front().seeds) {
      throw ConfigError("seeds", "seed sets differ between " + entries.front().path.string() +
                                     " and " + e.path.string());
    }
  }
  // Labels: the algorithm name, qualified by the path when it repeats.
  std::map<std::string, int> uses;
  for (const auto& e : entries) ++uses[e.algorithm];
  for (auto& e : entries) {
    e.label = uses[e.algorithm] > 1 ? e.algorithm + " (" + e.path.lexically_normal().string() + ")"
                                    : e.algorithm;
  }
  std::sort(entries.begin(), entries.end(),
            [](const auto& a, const auto& b) { return a.label < b.label; });

  const AlgorithmSummary* ref = nullptr;
  for (const auto& e : entries) {
    if (e.algorithm == baseline) { ref = &e; break; }
  }
  if (!ref) ref = &entries.front();

  ComparisonReport report;
  report.baseline = ref->label;
  const double s_ref = ref->secrecy_mean;
  const double e_ref = ref->energy_mean;
  for (auto& e : entries) {
    e.secrecy_delta_pct = s_ref != 0.0 ? (e.secrecy_mean - s_ref) / std::abs(s_ref) * 100.0
                                       : (e.secrecy_mean == s_ref ? 0.0 : INFINITY);
    e.energy_reduction_pct = e_ref != 0.0 ? (e_ref - e.energy_mean) / std::abs(e_ref) * 100.0 : 0.0;
  }
  for (auto& e : entries) {
    for (const auto& o : entries) {
      if (&o != &e && o.secrecy_mean > e.secrecy_mean && o.energy_mean < e.energy_mean) {
        e.dominated_by.push_back(o.label);
      }
    }
  }
  report.entries = std::move(entries);
  return report;
}

std::string format_comparison(const ComparisonReport& r) {
  std::ostringstream os;
  char line[256];
  std::snprintf(line, sizeof line, "%-12s %6s %24s %22s %22s\n", "algorithm", "window",
                "reward (mean +- std)", "secrecy/step", "energy/step [J]");
  os << line;
  for (const auto& e : r.entries) {
    std::snprintf(line, sizeof line, "%-12s %6d %11.3f +- %-9.3f %10.4f +- %-8.4f %10.2f +- %-8.2f\n",
                  e.label.c_str(), e.window, e.reward_mean, e.reward_std, e.secrecy_mean,
                  e.secrecy_std, e.energy_mean, e.energy_std);
    os << line;
  }
  os << '\n';
  for (const auto& e : r.entries) {
    if (e.label == r.baseline) continue;
    os << e.label << ": " << fixed(e.secrecy_delta_pct, 2) << "% improvement in secrecy rate, "
       << fixed(e.energy_reduction_pct, 2) << "% reduction in energy consumption vs "
       << r.baseline << '\n';
  }
  return os.str();
}

json comparison_to_json(const ComparisonReport& r) {
  json entries = json::array();
  for (const auto& e : r.entries) {
    entries.push_back({{"label", e.label},
                       {"algorithm", e.algorithm},
                       {"path", e.path.string()},
                       {"seeds", e.seeds},
                       {"window", e.window},
                       {"reward", {{"mean", e.reward_mean}, {"std", e.reward_std}}},
                       {"secrecy", {{"mean", e.secrecy_mean}, {"std", e.secrecy_std}}},
                       {"energy", {{"mean", e.energy_mean}, {"std", e.energy_std}}},
                       {"secrecy_improvement_pct", e.secrecy_delta_pct},
                       {"energy_reduction_pct", e.energy_reduction_pct},
                       {"dominated_by", e.dominated_by}});
  }
  return {{"baseline", r.baseline}, {"entries", entries}};
}

BeamPatternResult cmd_beampattern(const BeamPatternRequest& req) {
  req.config.validate();
  if (req.azimuth_points < 1 || req.elevation_points < 1) {
    throw ConfigError("grid", "azimuth and elevation point counts must be >= 1");
  }
  std::vector<Vec3> positions =
      req.positions ? *req.positions : env::reset(req.config, req.seed).uav_positions;
  beam::ElementLayout layout{positions, req.config.physics.wavelength()};
  layout.validate();
  std::vector<double> weights =
      req.weights ? *req.weights : std::vector<double>(layout.size(), 1.0);
  const Vec3 target = req.target ? *req.target : req.config.physics.bs_position;
  beam::BeamConfig beam{weights, beam::steering_phases(layout, target)};
  beam.validate(layout.size());

  const Vec3 c = layout.centroid();
  const Vec3 d = target - c;
  BeamPatternResult res;
  res.target_azimuth = std::atan2(d.y(), d.x());
  res.target_elevation = std::atan2(d.z(), std::hypot(d.x(), d.y()));
  const double radius = req.radius ? *req.radius : d.norm();

  std::vector<double> az, el;
  for (int i = 0; i < req.azimuth_points; ++i) az.push_back(-kPi + kTwoPi * i / req.azimuth_points);
  for (int i = 0; i < req.elevation_points; ++i) {
    el.push_back(req.elevation_points == 1 ? 0.0 : -kPi / 2 + kPi * i / (req.elevation_points - 1));
  }
  auto insert = [](std::vector<double>& v, double x) {
    if (std::find(v.begin(), v.end(), x) == v.end()) {
      v.insert(std::upper_bound(v.begin(), v.end(), x), x);
    }
  };
  insert(az, res.target_azimuth);
  insert(el, res.target_elevation);

  res.pattern = beam::beam_pattern(layout, beam, az, el, radius);
  std::error_code ec;
  fs::create_directories(req.out, ec);
  if (ec) throw IoError("cannot create " + req.out.string() + ": " + ec.message());
  std::ostringstream csv;
  beam::write_pattern_csv(csv, res.pattern);
  write_text(req.out / "pattern.csv", csv.str());
  if (req.svg) {
    write_text(req.out / "pattern.svg", beam::render_polar_svg(res.pattern, res.target_elevation));
  }
  return res;
}

json cmd_replay(const RunConfig& config, const fs::path& trajectory, double tolerance) {
  std::ifstream in(trajectory);
  if (!in) throw IoError("cannot read " + trajectory.string());
  return traj::report_to_json(traj::replay(in, config, tolerance), tolerance);
}

}  // namespace aerobeam::harness

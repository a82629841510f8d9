#include <doctest.h>

#include <array>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "aerobeam/errors.hpp"
#include "aerobeam/trainer.hpp"
#include "gradcheck.hpp"

using namespace aerobeam;
using namespace aerobeam::rl;

namespace {

RunConfig small_run(int episodes = 3) {
  RunConfig c;
  c.mdp.episode_length = 10;
  c.agent.episodes = episodes;
  c.agent.batch_size = 8;
  c.agent.warmup_factor = 2;
  c.agent.critic_hidden = {16, 16};
  c.agent.actor_hidden = {16, 16};
  c.agent.denoiser_hidden = {16, 16};
  c.diffusion.time_embed_dim = 4;
  return c;
}

Vector filled(int n, double v) { return Vector::Constant(n, v); }

Transition tagged(int obs, int act, double tag) {
  return {filled(obs, tag), filled(act, tag / 10.0), tag, filled(obs, -tag), false};
}

Vector random_vector(Rng& g, int n, double lo = -1.0, double hi = 1.0) {
  Vector v(n);
  for (int i = 0; i < n; ++i) v[i] = uniform(g, lo, hi);
  return v;
}

// Batch of random transitions in the agent's dimensions.
Batch random_batch(const AgentBundle& agent, int size, std::uint64_t seed) {
  Rng g(seed);
  ReplayBuffer buf(agent.obs_dim(), agent.action_dim(), size);
  for (int i = 0; i < size; ++i) {
    buf.push({random_vector(g, agent.obs_dim()), random_vector(g, agent.action_dim(), -0.9, 0.9),
              uniform(g, -1.0, 1.0), random_vector(g, agent.obs_dim()), i % 5 == 0});
  }
  Batch b;
  b.observations.resize(agent.obs_dim(), size);
  b.actions.resize(agent.action_dim(), size);
  b.next_observations.resize(agent.obs_dim(), size);
  b.rewards.resize(size);
  b.dones.resize(size);
  for (int i = 0; i < size; ++i) {
    const Transition t = buf.at(i);
    b.observations.col(i) = t.observation;
    b.actions.col(i) = t.action;
    b.next_observations.col(i) = t.next_observation;
    b.rewards[i] = t.reward;
    b.dones[i] = t.done ? 1.0 : 0.0;
    b.slots.push_back(i);
  }
  return b;
}

Batch duplicate(const Batch& b) {
  Batch d;
  const auto n = b.size();
  auto twice = [n](const Matrix& m) {
    Matrix out(m.rows(), 2 * n);
    out << m, m;
    return out;
  };
  d.observations = twice(b.observations);
  d.actions = twice(b.actions);
  d.next_observations = twice(b.next_observations);
  d.rewards.resize(2 * n);
  d.rewards << b.rewards, b.rewards;
  d.dones.resize(2 * n);
  d.dones << b.dones, b.dones;
  d.slots = b.slots;
  d.slots.insert(d.slots.end(), b.slots.begin(), b.slots.end());
  return d;
}

// Zero output layer so the network is constant at its output bias.
void flatten_output(nn::NetParams& p, const Vector& bias) {
  p.weights.back().setZero();
  p.biases.back() = bias;
}

// Visits every parameter entry.
template <typename F>
void for_each_param(nn::NetParams& p, F&& f) {
  for (auto& w : p.weights) {
    for (Eigen::Index i = 0; i < w.size(); ++i) f(w.data()[i]);
  }
  for (auto& b : p.biases) {
    for (Eigen::Index i = 0; i < b.size(); ++i) f(b.data()[i]);
  }
}

std::vector<double> flat(const nn::NetParams& p) {
  std::vector<double> out;
  nn::NetParams copy = p;
  for_each_param(copy, [&](double& v) { out.push_back(v); });
  return out;
}

// Central finite differences of the actor loss against actor_gradient.
double actor_gradcheck(AgentBundle& agent, const Batch& batch, std::uint64_t seed) {
  Rng r0(seed);
  const std::vector<double> analytic = flat(agent.actor_gradient(batch, r0).grads);
  const double h = 1e-6;
  double worst = 0.0;
  std::size_t k = 0;
  nn::NetParams& p = agent.actor.params;
  for_each_param(p, [&](double& v) {
    const double keep = v;
    v = keep + h;
    Rng rp(seed);
    const double lp = agent.actor_gradient(batch, rp).loss;
    v = keep - h;
    Rng rm(seed);
    const double lm = agent.actor_gradient(batch, rm).loss;
    v = keep;
    worst = std::max(worst, rel_error(analytic[k++], (lp - lm) / (2.0 * h)));
  });
  return worst;
}

}  // namespace

TEST_CASE("replay buffer push and ring eviction") {
  ReplayBuffer buf(3, 2, 2);
  CHECK(buf.size() == 0);
  buf.push(tagged(3, 2, 1.0));
  CHECK(buf.size() == 1);
  buf.push(tagged(3, 2, 2.0));
  buf.push(tagged(3, 2, 3.0));
  CHECK(buf.size() == 2);
  std::set<double> held{buf.at(0).reward, buf.at(1).reward};
  CHECK(held == std::set<double>{2.0, 3.0});
  CHECK_THROWS_AS(buf.push(tagged(4, 2, 1.0)), ShapeError);
  CHECK_THROWS_AS(buf.push(tagged(3, 3, 1.0)), ShapeError);
  CHECK_THROWS_AS(buf.at(2), DomainError);
}

TEST_CASE("replay buffer sampling") {
  Rng g(5);
  ReplayBuffer one(3, 2, 10);
  one.push(tagged(3, 2, 7.0));
  CHECK_THROWS_AS(one.sample(4, g), DomainError);
  for (int i = 0; i < 20; ++i) {
    const Batch b = one.sample(1, g);
    CHECK(b.rewards[0] == 7.0);
    CHECK(b.observations.col(0) == filled(3, 7.0));
    CHECK(b.next_observations.col(0) == filled(3, -7.0));
  }

  ReplayBuffer buf(3, 2, 5);
  for (int i = 1; i <= 8; ++i) buf.push(tagged(3, 2, i));
  std::set<double> stored;
  for (int s = 0; s < buf.size(); ++s) stored.insert(buf.at(s).reward);
  for (int i = 0; i < 200; ++i) {
    const Batch b = buf.sample(3, g);
    for (int c = 0; c < b.size(); ++c) {
      CHECK(stored.count(b.rewards[c]) == 1);
      CHECK(b.actions.col(c) == filled(2, b.rewards[c] / 10.0));
    }
  }

  Rng a(9), b(9);
  CHECK(buf.sample(5, a).slots == buf.sample(5, b).slots);
}

TEST_CASE("replay sampling is uniform") {
  ReplayBuffer buf(1, 1, 4);
  for (int i = 0; i < 4; ++i) buf.push(tagged(1, 1, i));
  Rng g(11);
  std::array<int, 4> counts{};
  const int n = 100000;
  for (int i = 0; i < n / 4; ++i) {
    for (int s : buf.sample(4, g).slots) ++counts[s];
  }
  for (int c : counts) {
    CHECK(c / double(n) >= 0.24);
    CHECK(c / double(n) <= 0.26);
  }
}

TEST_CASE("td3 target") {
  CHECK(td3_target(1.5, 1.0, 10.0, 20.0, 0.99) == 1.5);
  CHECK(td3_target(1.0, 0.0, 2.0, 3.0, 0.99) == doctest::Approx(2.98).epsilon(1e-15));
  CHECK(td3_target(1.0, 0.0, 3.0, 2.0, 0.99) == td3_target(1.0, 0.0, 2.0, 3.0, 0.99));
  CHECK(td3_target(0.5, 0.0, 4.0, 4.0, 0.9) == 0.5 + 0.9 * 4.0);
  CHECK(td3_target(1.0, 0.0, 2.0, 3.0, 0.5, false) == 2.0);
  CHECK(td3_target(1.0, 0.0, 3.0, 2.0, 0.5, false) == 2.5);

  Rng g(3);
  for (int i = 0; i < 10000; ++i) {
    const double r = uniform(g, -5.0, 5.0);
    const double d = uniform(g, 0.0, 1.0) < 0.2 ? 1.0 : 0.0;
    const double q1 = uniform(g, -10.0, 10.0);
    const double q2 = uniform(g, -10.0, 10.0);
    const double gamma = uniform(g, 0.01, 1.0);
    CHECK(td3_target(r, d, q1, q2, gamma) <= r + gamma * (1.0 - d) * std::max(q1, q2));
  }
}

TEST_CASE("smoothed target action") {
  Matrix a(2, 3);
  a << 0.5, -0.2, 0.9, -1.0, 1.0, 0.0;
  Rng g(1);
  CHECK(smoothed_target_action(a, 0.0, 0.5, g) == a);

  Matrix outside(1, 2);
  outside << 1.7, -3.0;
  CHECK(smoothed_target_action(outside, 0.0, 0.5, g) == (Matrix(1, 2) << 1.0, -1.0).finished());

  // Huge sigma: every draw beyond the clip contributes exactly +-clip.
  const Matrix zero = Matrix::Zero(1, 2000);
  const Matrix s = smoothed_target_action(zero, 1e6, 0.3, g);
  for (Eigen::Index i = 0; i < s.size(); ++i) CHECK(std::abs(s(i)) == 0.3);

  const Matrix wide = smoothed_target_action(Matrix::Constant(3, 500, 0.8), 0.5, 0.5, g);
  CHECK(wide.maxCoeff() <= 1.0);
  CHECK(wide.minCoeff() >= -1.0);
  CHECK(wide.maxCoeff() == 1.0);
}

TEST_CASE("critic update on one transition matches the hand-computed TD error") {
  RunConfig c = small_run();
  c.agent.target_noise = 0.0;
  AgentBundle agent(c, Algorithm::TD3, 4);
  const Batch b = random_batch(agent, 1, 8);
  const double gamma = agent.hyper().gamma;

  const Matrix a_next = nn::predict(agent.actor.spec, agent.actor_target, b.next_observations)
                            .cwiseMax(-1.0)
                            .cwiseMin(1.0);
  const double q1n = agent.q_value(1, b.next_observations, a_next)(0, 0);
  const double q2n = agent.q_value(2, b.next_observations, a_next)(0, 0);
  const double y = b.rewards[0] + gamma * (1.0 - b.dones[0]) * std::min(q1n, q2n);
  const double e1 = agent.q_value(1, b.observations, b.actions)(0, 0) - y;
  const double e2 = agent.q_value(2, b.observations, b.actions)(0, 0) - y;

  Rng g(0);
  const CriticLoss loss = agent.critic_update(b, g);
  CHECK(loss.q1 == doctest::Approx(e1 * e1).epsilon(1e-12));
  CHECK(loss.q2 == doctest::Approx(e2 * e2).epsilon(1e-12));
  CHECK(agent.actor_updates() == 0);
}

TEST_CASE("a duplicated batch gives the same critic update") {
  RunConfig c = small_run();
  c.agent.target_noise = 0.0;
  for (Algorithm algo : {Algorithm::TD3, Algorithm::GDMTD3}) {
    AgentBundle a(c, algo, 2);
    AgentBundle b = a;
    const Batch batch = random_batch(a, 6, 1);
    Rng ga(0), gb(0);
    const CriticLoss la = a.critic_update(batch, ga);
    const CriticLoss lb = b.critic_update(duplicate(batch), gb);
    CHECK(la.q1 == doctest::Approx(lb.q1).epsilon(1e-13));
    CHECK(la.q2 == doctest::Approx(lb.q2).epsilon(1e-13));
    const auto pa = flat(a.q1.params), pb = flat(b.q1.params);
    double worst = 0.0;
    for (std::size_t i = 0; i < pa.size(); ++i) worst = std::max(worst, std::abs(pa[i] - pb[i]));
    CHECK(worst < 1e-12);
  }
}

TEST_CASE("a perfect critic is left unchanged") {
  RunConfig c = small_run();
  AgentBundle agent(c, Algorithm::TD3, 6);
  flatten_output(agent.q1.params, Vector::Zero(1));
  flatten_output(agent.q2.params, Vector::Zero(1));
  agent.q1_target = agent.q1.params;
  agent.q2_target = agent.q2.params;
  Batch b = random_batch(agent, 8, 3);
  b.rewards.setZero();
  const nn::NetParams before1 = agent.q1.params, before2 = agent.q2.params;
  Rng g(0);
  const CriticLoss loss = agent.critic_update(b, g);
  CHECK(loss.q1 == 0.0);
  CHECK(loss.q2 == 0.0);
  CHECK(agent.q1.params == before1);
  CHECK(agent.q2.params == before2);
}

TEST_CASE("policy delay counts actor updates") {
  RunConfig c = small_run();
  for (int delay : {1, 2, 3}) {
    c.agent.policy_delay = delay;
    AgentBundle agent(c, Algorithm::TD3, 1);
    const Batch b = random_batch(agent, 8, 2);
    Rng g(1);
    for (int t = 1; t <= 11; ++t) {
      agent.update(b, g);
      CHECK(agent.iterations() == t);
      CHECK(agent.actor_updates() == t / delay);
    }
  }
}

TEST_CASE("zero critic slope leaves the diffusion actor unchanged") {
  RunConfig c = small_run();
  AgentBundle agent(c, Algorithm::GDMTD3, 3);
  flatten_output(agent.q1.params, Vector::Constant(1, 2.5));
  const nn::NetParams before = agent.actor.params;
  const Batch b = random_batch(agent, 8, 4);
  Rng g(2);
  const double loss = agent.actor_update(b, g);
  CHECK(loss == doctest::Approx(-2.5).epsilon(1e-15));
  CHECK(agent.actor.params == before);
  CHECK(agent.actor_target == before);
}

TEST_CASE("targets move by at most tau of the online gap") {
  RunConfig c = small_run();
  c.agent.policy_delay = 1;
  c.agent.tau = 0.1;
  for (Algorithm algo : {Algorithm::TD3, Algorithm::GDMTD3, Algorithm::SAC}) {
    AgentBundle agent(c, algo, 5);
    const Batch b = random_batch(agent, 8, 5);
    Rng g(3);
    for (int t = 0; t < 5; ++t) {
      const nn::NetParams old_target = agent.q1_target;
      const nn::NetParams old_actor_target = agent.actor_target;
      agent.update(b, g);
      auto check = [&](const nn::NetParams& online, const nn::NetParams& before,
                       const nn::NetParams& after) {
        const auto on = flat(online), bt = flat(before), at = flat(after);
        for (std::size_t i = 0; i < on.size(); ++i) {
          CHECK(std::abs(at[i] - bt[i]) <= c.agent.tau * std::abs(on[i] - bt[i]) + 1e-15);
        }
      };
      check(agent.q1.params, old_target, agent.q1_target);
      if (algo == Algorithm::SAC) {
        CHECK(agent.actor_target == old_actor_target);
      } else {
        check(agent.actor.params, old_actor_target, agent.actor_target);
      }
    }
  }
}

TEST_CASE("actor gradients match finite differences of the actor loss") {
  RunConfig c = small_run();
  c.agent.actor_hidden = {6, 5};
  c.agent.denoiser_hidden = {6, 5};
  c.mdp.episode_length = 5;
  c.physics.num_uavs = 2;
  c.physics.area = {{0.0, 0.0}, {10.0, 10.0}};
  for (int steps : {1, 5}) {
    c.diffusion.steps = steps;
    AgentBundle agent(c, Algorithm::GDMTD3, 7);
    CHECK(actor_gradcheck(agent, random_batch(agent, 4, 9), 21) < 1e-5);
  }
  for (Algorithm algo : {Algorithm::TD3, Algorithm::SAC}) {
    AgentBundle agent(c, algo, 8);
    CHECK(actor_gradcheck(agent, random_batch(agent, 4, 10), 22) < 1e-5);
  }
}

TEST_CASE("critic loss on a frozen batch is non-increasing") {
  RunConfig c = small_run();
  c.agent.critic_lr = 1e-3;
  c.agent.target_noise = 0.0;
  for (Algorithm algo : {Algorithm::TD3, Algorithm::GDMTD3, Algorithm::DDPG}) {
    AgentBundle agent(c, algo, 12);
    const Batch b = random_batch(agent, 32, 12);
    Rng g(0);
    CriticLoss prev = agent.critic_update(b, g);
    for (int t = 0; t < 50; ++t) {
      const CriticLoss cur = agent.critic_update(b, g);
      CHECK(cur.q1 <= prev.q1);
      CHECK(cur.q2 <= prev.q2);
      prev = cur;
    }
  }
}

TEST_CASE("agent checkpoint round trip") {
  const RunConfig c = small_run();
  for (Algorithm algo : kAllAlgorithms) {
    AgentBundle agent(c, algo, 13);
    const Batch b = random_batch(agent, 8, 13);
    Rng g(1);
    for (int t = 0; t < 3; ++t) agent.update(b, g);
    const nlohmann::json doc = agent.to_json();
    const AgentBundle back = AgentBundle::from_json(nlohmann::json::parse(doc.dump()), c);
    CHECK(back.to_json() == doc);
    CHECK(back.algorithm() == algo);
    Rng a(4), z(4);
    CHECK(back.act(b.observations, a, false) == agent.act(b.observations, z, false));
  }
  RunConfig other = c;
  other.agent.critic_hidden = {8, 8};
  CHECK_THROWS_AS(AgentBundle::from_json(AgentBundle(c, Algorithm::TD3, 0).to_json(), other),
                  ShapeError);
  CHECK_THROWS_AS(AgentBundle::from_json(nlohmann::json{{"format", "x"}}, c), IoError);
}

TEST_CASE("actions stay in the box") {
  const RunConfig c = small_run();
  for (Algorithm algo : kAllAlgorithms) {
    AgentBundle agent(c, algo, 14);
    const Batch b = random_batch(agent, 16, 14);
    Rng g(5);
    for (bool explore : {true, false}) {
      const Matrix a = agent.act(b.observations, g, explore);
      CHECK(a.rows() == agent.action_dim());
      CHECK(a.maxCoeff() <= 1.0);
      CHECK(a.minCoeff() >= -1.0);
    }
    CHECK_THROWS_AS(agent.act(Matrix::Zero(3, 1), g, false), ShapeError);
  }
}

TEST_CASE("training is a pure function of algorithm, config and seed") {
  const RunConfig c = small_run(4);
  for (Algorithm algo : kAllAlgorithms) {
    const TrainResult a = train(algo, c, 3);
    const TrainResult b = train(algo, c, 3);
    REQUIRE(a.records.size() == 4);
    CHECK(a.records == b.records);
    CHECK(a.agent.to_json() == b.agent.to_json());
    CHECK(a.env_steps == 40);
    CHECK(a.updates == 40 - 16 + 1);
    CHECK_FALSE(a.diverged);
    for (int i = 0; i < 4; ++i) CHECK(a.records[i].episode == i);
  }
  CHECK(train(Algorithm::TD3, c, 3).records != train(Algorithm::TD3, c, 4).records);
}

TEST_CASE("zero episodes train nothing") {
  const TrainResult r = train(Algorithm::GDMTD3, small_run(0), 1);
  CHECK(r.records.empty());
  CHECK(r.updates == 0);
  CHECK(r.env_steps == 0);
}

TEST_CASE("DDPG is TD3 with twin-min, smoothing and delay switched off") {
  RunConfig flagged = small_run(4);
  flagged.agent.twin_min = false;
  flagged.agent.target_noise = 0.0;
  flagged.agent.policy_delay = 1;
  const TrainResult td3 = train(Algorithm::TD3, flagged, 6);
  const TrainResult ddpg = train(Algorithm::DDPG, small_run(4), 6);
  CHECK(td3.records == ddpg.records);
  nlohmann::json a = td3.agent.to_json(), b = ddpg.agent.to_json();
  a.erase("algorithm");
  b.erase("algorithm");
  CHECK(a == b);
  CHECK(train(Algorithm::TD3, small_run(4), 6).records != ddpg.records);
}

TEST_CASE("checkpoint and episode callbacks") {
  RunConfig c = small_run(5);
  c.agent.checkpoint_interval = 2;
  std::vector<int> episodes, checkpoints;
  TrainOptions opts;
  opts.on_episode = [&](const LearningRecord& r) { episodes.push_back(r.episode); };
  opts.on_checkpoint = [&](int ep, const AgentBundle&) { checkpoints.push_back(ep); };
  train(Algorithm::TD3, c, 0, opts);
  CHECK(episodes == std::vector<int>{0, 1, 2, 3, 4});
  CHECK(checkpoints == std::vector<int>{2, 4});
}

TEST_CASE("evaluating the zero-weight hovering policy") {
  const RunConfig c = small_run();
  AgentBundle agent(c, Algorithm::TD3, 1);
  const int k = c.physics.num_uavs;
  Vector bias = Vector::Zero(agent.action_dim());
  bias.head(k).setConstant(-20.0);  // tanh(-20) rounds to -1
  flatten_output(agent.actor.params, bias);
  const EvalMetrics m = evaluate(agent, c, 2, 0);
  CHECK(m.steps == 20);
  CHECK(m.mean_secrecy == 0.0);
  CHECK(m.mean_energy == doctest::Approx(k * c.energy.hover_power() * c.mobility.dt).epsilon(1e-13));
  CHECK(m.mean_energy == doctest::Approx(673.96).epsilon(1e-13));
}

TEST_CASE("evaluation is deterministic and agrees with its trajectory") {
  const RunConfig c = small_run();
  for (Algorithm algo : kAllAlgorithms) {
    const AgentBundle agent = train(algo, c, 2).agent;
    std::ostringstream log;
    traj::TrajectoryWriter writer(log);
    const EvalMetrics a = evaluate(agent, c, 3, 5, &writer);
    const EvalMetrics b = evaluate(agent, c, 3, 5);
    CHECK(a.mean_reward == b.mean_reward);
    CHECK(a.mean_secrecy == b.mean_secrecy);
    CHECK(a.mean_energy == b.mean_energy);

    std::istringstream in(log.str());
    std::string line;
    double sum = 0.0;
    long n = 0;
    while (std::getline(in, line)) {
      const auto j = nlohmann::json::parse(line);
      const auto& o = j.at("outcome");
      env::Violations v;
      v.speed_count = o.at("violations").at("speed").get<int>();
      v.collision_count = o.at("violations").at("collision").get<int>();
      v.boundary_count = o.at("violations").at("boundary").get<int>();
      const double r = env::reward_fn(o.at("secrecy").get<double>(), o.at("energy").get<double>(), v, c);
      CHECK(r == o.at("reward").get<double>());
      sum += r;
      ++n;
    }
    CHECK(n == a.steps);
    CHECK(sum / n == doctest::Approx(a.mean_reward).epsilon(1e-13));
  }
  RunConfig other = c;
  other.physics.num_uavs = 3;
  CHECK_THROWS_AS(evaluate(AgentBundle(c, Algorithm::TD3, 0), other, 1, 0), ShapeError);
}

TEST_CASE("learning record CSV round trip") {
  const auto records = train(Algorithm::SAC, small_run(3), 1).records;
  const auto path = std::filesystem::temp_directory_path() / "aerobeam_learning_test.csv";
  write_learning_csv(path, records);
  CHECK(read_learning_csv(path) == records);
  {
    std::ofstream out(path);
    out << kLearningCsvHeader << "\n0,1,2,3,4,5\n1,2,3\n";
  }
  try {
    read_learning_csv(path);
    FAIL("expected an error");
  } catch (const IoError& e) {
    CHECK(std::string(e.what()).find(":3:") != std::string::npos);
  }
  std::filesystem::remove(path);
  CHECK_THROWS_AS(read_learning_csv(path), IoError);
}

#include "aerobeam/agent.hpp"

#include <algorithm>
#include <cmath>

#include <nlohmann/json.hpp>

#include "aerobeam/errors.hpp"

namespace aerobeam::rl {

using nlohmann::json;

namespace {

// Seed streams for network initialisation; independent of the algorithm so
// that configuration aliases (DDPG vs flagged TD3) share every draw.
constexpr std::uint64_t kInitStream = 0x1417;

Matrix stack(const Matrix& top, const Matrix& bottom) {
  Matrix out(top.rows() + bottom.rows(), top.cols());
  out.topRows(top.rows()) = top;
  out.bottomRows(bottom.rows()) = bottom;
  return out;
}

void require_finite(double v, const char* what) {
  if (!std::isfinite(v)) throw DivergenceError(std::string("non-finite ") + what);
}

Network make_network(const nn::NetSpec& spec, std::uint64_t seed) {
  return {spec, nn::init_params(spec, seed), nn::AdamState::init(spec)};
}

double softplus(double x) { return x > 20.0 ? x : std::log1p(std::exp(x)); }

}  // namespace

double td3_target(double reward, double done, double q1_next, double q2_next, double gamma,
                  bool twin_min) {
  const double q = twin_min ? std::min(q1_next, q2_next) : q1_next;
  return reward + gamma * (1.0 - done) * q;
}

Matrix smoothed_target_action(const Matrix& target_actions, double sigma, double clip, Rng& rng) {
  Matrix out = target_actions;
  for (Eigen::Index c = 0; c < out.cols(); ++c) {
    for (Eigen::Index r = 0; r < out.rows(); ++r) {
      const double noise = std::clamp(sigma * standard_normal(rng), -clip, clip);
      out(r, c) = std::clamp(out(r, c) + noise, -1.0, 1.0);
    }
  }
  return out;
}

AgentBundle::AgentBundle(const RunConfig& config, Algorithm algorithm, std::uint64_t seed)
    : algorithm_(algorithm),
      obs_dim_(config.observation_dim()),
      action_dim_(config.action_dim()),
      diffusion_regularizer_(config.diffusion.regularizer) {
  AgentConfig a = config.agent;
  a.algorithm = algorithm;
  hyper_ = resolve_agent_flags(a);

  const auto critic_spec = nn::make_spec(obs_dim_ + action_dim_, hyper_.critic_hidden, 1,
                                         nn::Activation::Relu, nn::Activation::Identity);
  q1 = make_network(critic_spec, derive_seed(seed, kInitStream, 1));
  q2 = make_network(critic_spec, derive_seed(seed, kInitStream, 2));
  q1_target = q1.params;
  q2_target = q2.params;

  nn::NetSpec actor_spec;
  switch (algorithm) {
    case Algorithm::GDMTD3:
      diffusion = policy::DiffusionActor::make(obs_dim_, action_dim_, hyper_.denoiser_hidden,
                                               config.diffusion);
      actor_spec = diffusion.spec;
      break;
    case Algorithm::TD3:
    case Algorithm::DDPG:
      actor_spec = nn::make_spec(obs_dim_, hyper_.actor_hidden, action_dim_,
                                 nn::Activation::Relu, nn::Activation::Tanh);
      break;
    case Algorithm::SAC:
      actor_spec = nn::make_spec(obs_dim_, hyper_.actor_hidden, 2 * action_dim_,
                                 nn::Activation::Relu, nn::Activation::Identity);
      break;
  }
  actor = make_network(actor_spec, derive_seed(seed, kInitStream, 3));
  actor_target = actor.params;
}

Matrix AgentBundle::q_value(int which, const Matrix& observations, const Matrix& actions) const {
  const Network& q = which == 1 ? q1 : q2;
  return nn::predict(q.spec, q.params, stack(observations, actions));
}

AgentBundle::SacSample AgentBundle::sac_sample(const nn::NetParams& params,
                                               const Matrix& observations, Rng& rng) const {
  SacSample s;
  s.cache = nn::forward(actor.spec, params, observations);
  const Matrix& out = s.cache.output();
  const Eigen::Index b = out.cols();
  const int d = action_dim_;
  s.eps.resize(d, b);
  s.u.resize(d, b);
  s.action.resize(d, b);
  s.log_prob = Matrix::Zero(1, b);
  const double half_log_2pi = 0.5 * std::log(2.0 * kPi);
  for (Eigen::Index c = 0; c < b; ++c) {
    for (int r = 0; r < d; ++r) {
      const double mean = out(r, c);
      const double log_std = kSacLogStdMin + 0.5 * (kSacLogStdMax - kSacLogStdMin) *
                                                 (std::tanh(out(d + r, c)) + 1.0);
      const double e = standard_normal(rng);
      const double u = mean + std::exp(log_std) * e;
      s.eps(r, c) = e;
      s.u(r, c) = u;
      s.action(r, c) = std::tanh(u);
      // log(1 - tanh(u)^2) = 2 (log 2 - u - softplus(-2u))
      s.log_prob(0, c) += -0.5 * e * e - log_std - half_log_2pi -
                          2.0 * (std::log(2.0) - u - softplus(-2.0 * u));
    }
  }
  return s;
}

Matrix AgentBundle::act(const Matrix& observations, Rng& rng, bool explore) const {
  if (observations.rows() != obs_dim_) throw ShapeError("observation dimension mismatch");
  switch (algorithm_) {
    case Algorithm::GDMTD3:
      return policy::denoise_sample(diffusion, actor.params, observations, rng, !explore);
    case Algorithm::TD3:
    case Algorithm::DDPG: {
      Matrix a = nn::predict(actor.spec, actor.params, observations);
      if (explore) {
        for (Eigen::Index c = 0; c < a.cols(); ++c) {
          for (Eigen::Index r = 0; r < a.rows(); ++r) {
            a(r, c) = std::clamp(a(r, c) + hyper_.exploration_noise * standard_normal(rng), -1.0, 1.0);
          }
        }
      }
      return a;
    }
    case Algorithm::SAC: {
      if (explore) return sac_sample(actor.params, observations, rng).action;
      const Matrix out = nn::predict(actor.spec, actor.params, observations);
      return out.topRows(action_dim_).array().tanh();
    }
  }
  return {};
}

Matrix AgentBundle::target_actions(const Matrix& next_observations, Rng& rng) const {
  Matrix base;
  switch (algorithm_) {
    case Algorithm::GDMTD3: {
      Rng unused(0);
      const auto draws = policy::draw_chain(diffusion, static_cast<int>(next_observations.cols()),
                                            unused, policy::ChainNoise::Zero);
      base = policy::run_chain(diffusion, actor_target, next_observations, draws, false).action;
      break;
    }
    case Algorithm::TD3:
    case Algorithm::DDPG:
      base = nn::predict(actor.spec, actor_target, next_observations);
      break;
    case Algorithm::SAC: {
      const Matrix out = nn::predict(actor.spec, actor.params, next_observations);
      return out.topRows(action_dim_).array().tanh();
    }
  }
  return smoothed_target_action(base, hyper_.target_noise, hyper_.target_noise_clip, rng);
}

CriticLoss AgentBundle::critic_update(const Batch& batch, Rng& rng) {
  const Eigen::Index b = batch.size();
  Matrix next_actions;
  Matrix bonus = Matrix::Zero(1, b);
  if (algorithm_ == Algorithm::SAC) {
    SacSample s = sac_sample(actor.params, batch.next_observations, rng);
    next_actions = std::move(s.action);
    bonus = -hyper_.sac_alpha * s.log_prob;
  } else {
    next_actions = target_actions(batch.next_observations, rng);
  }
  const Matrix next_in = stack(batch.next_observations, next_actions);
  const Matrix q1_next = nn::predict(q1.spec, q1_target, next_in);
  const Matrix q2_next = hyper_.twin_min ? nn::predict(q2.spec, q2_target, next_in) : q1_next;

  Matrix y(1, b);
  for (Eigen::Index i = 0; i < b; ++i) {
    y(0, i) = td3_target(batch.rewards[i], batch.dones[i], q1_next(0, i) + bonus(0, i),
                         q2_next(0, i) + bonus(0, i), hyper_.gamma, hyper_.twin_min);
  }

  const Matrix in = stack(batch.observations, batch.actions);
  const nn::AdamConfig adam{hyper_.critic_lr};
  auto step_critic = [&](Network& q) {
    const nn::ForwardCache cache = nn::forward(q.spec, q.params, in);
    const Matrix diff = cache.output() - y;
    const double loss = diff.squaredNorm() / static_cast<double>(b);
    require_finite(loss, "critic loss");
    const auto grads = nn::backward(q.spec, q.params, cache, (2.0 / static_cast<double>(b)) * diff);
    nn::adam_step(q.params, grads.params, q.opt, adam);
    return loss;
  };
  CriticLoss out;
  out.q1 = step_critic(q1);
  if (hyper_.twin_min) out.q2 = step_critic(q2);
  return out;
}

ActorGradient AgentBundle::actor_gradient_mlp(const Batch& batch) const {
  const Eigen::Index b = batch.size();
  const nn::ForwardCache acache = nn::forward(actor.spec, actor.params, batch.observations);
  const nn::ForwardCache qcache =
      nn::forward(q1.spec, q1.params, stack(batch.observations, acache.output()));
  const double loss = -qcache.output().mean();
  require_finite(loss, "actor loss");
  const Matrix up = Matrix::Constant(1, b, -1.0 / static_cast<double>(b));
  const Matrix dq_da = nn::backward(q1.spec, q1.params, qcache, up, false).input.bottomRows(action_dim_);
  return {loss, nn::backward(actor.spec, actor.params, acache, dq_da).params};
}

ActorGradient AgentBundle::actor_gradient_gdm(const Batch& batch, Rng& rng) const {
  const Eigen::Index b = batch.size();
  const policy::PathwiseSample sample(diffusion, actor.params, batch.observations, rng);
  const nn::ForwardCache qcache =
      nn::forward(q1.spec, q1.params, stack(batch.observations, sample.action()));
  double loss = -qcache.output().mean();
  const Matrix up = Matrix::Constant(1, b, -1.0 / static_cast<double>(b));
  const Matrix dq_da = nn::backward(q1.spec, q1.params, qcache, up, false).input.bottomRows(action_dim_);
  nn::NetParams grads = sample.backward(dq_da);
  if (diffusion_regularizer_ > 0.0) {
    auto reg = policy::denoising_loss(diffusion, actor.params, batch.observations, batch.actions, rng);
    reg.grads *= diffusion_regularizer_;
    grads += reg.grads;
    loss += diffusion_regularizer_ * reg.loss;
  }
  require_finite(loss, "actor loss");
  return {loss, std::move(grads)};
}

ActorGradient AgentBundle::actor_gradient_sac(const Batch& batch, Rng& rng) const {
  const Eigen::Index b = batch.size();
  const int d = action_dim_;
  const double alpha = hyper_.sac_alpha;
  SacSample s = sac_sample(actor.params, batch.observations, rng);
  const Matrix in = stack(batch.observations, s.action);
  const nn::ForwardCache c1 = nn::forward(q1.spec, q1.params, in);
  const nn::ForwardCache c2 = nn::forward(q2.spec, q2.params, in);
  const Matrix ones = Matrix::Ones(1, b);
  const Matrix g1 = nn::backward(q1.spec, q1.params, c1, ones, false).input.bottomRows(d);
  const Matrix g2 = nn::backward(q2.spec, q2.params, c2, ones, false).input.bottomRows(d);

  const Matrix& out = s.cache.output();
  Matrix up(2 * d, b);
  double loss = 0.0;
  const double inv_b = 1.0 / static_cast<double>(b);
  for (Eigen::Index c = 0; c < b; ++c) {
    const bool first = c1.output()(0, c) <= c2.output()(0, c);
    const double qmin = first ? c1.output()(0, c) : c2.output()(0, c);
    loss += alpha * s.log_prob(0, c) - qmin;
    for (int r = 0; r < d; ++r) {
      const double a = s.action(r, c);
      const double dq_da = first ? g1(r, c) : g2(r, c);
      const double dl_du = alpha * 2.0 * std::tanh(s.u(r, c)) - dq_da * (1.0 - a * a);
      const double t = std::tanh(out(d + r, c));
      const double log_std = kSacLogStdMin + 0.5 * (kSacLogStdMax - kSacLogStdMin) * (t + 1.0);
      const double dl_dlogstd = -alpha + dl_du * std::exp(log_std) * s.eps(r, c);
      up(r, c) = inv_b * dl_du;
      up(d + r, c) = inv_b * dl_dlogstd * 0.5 * (kSacLogStdMax - kSacLogStdMin) * (1.0 - t * t);
    }
  }
  loss *= inv_b;
  require_finite(loss, "actor loss");
  return {loss, nn::backward(actor.spec, actor.params, s.cache, up).params};
}

void AgentBundle::soft_update_targets() {
  nn::soft_update(q1.params, q1_target, hyper_.tau);
  nn::soft_update(q2.params, q2_target, hyper_.tau);
  if (algorithm_ != Algorithm::SAC) nn::soft_update(actor.params, actor_target, hyper_.tau);
}

ActorGradient AgentBundle::actor_gradient(const Batch& batch, Rng& rng) const {
  switch (algorithm_) {
    case Algorithm::GDMTD3: return actor_gradient_gdm(batch, rng);
    case Algorithm::TD3:
    case Algorithm::DDPG: return actor_gradient_mlp(batch);
    case Algorithm::SAC: return actor_gradient_sac(batch, rng);
  }
  return {};
}

double AgentBundle::actor_update(const Batch& batch, Rng& rng) {
  const ActorGradient g = actor_gradient(batch, rng);
  nn::adam_step(actor.params, g.grads, actor.opt, {hyper_.actor_lr});
  soft_update_targets();
  ++actor_updates_;
  return g.loss;
}

CriticLoss AgentBundle::update(const Batch& batch, Rng& rng) {
  CriticLoss loss = critic_update(batch, rng);
  ++iterations_;
  if (iterations_ % hyper_.policy_delay == 0) actor_update(batch, rng);
  return loss;
}

namespace {

json network_json(const nn::NetSpec& spec, const nn::NetParams& params) {
  return {{"spec", nn::spec_to_json(spec)}, {"layers", nn::params_to_json(params)}};
}

nn::NetParams network_from(const json& j, const nn::NetSpec& expected) {
  const nn::NetSpec spec = nn::spec_from_json(j.at("spec"));
  if (!(spec == expected)) throw ShapeError("checkpoint network does not match the configuration");
  return nn::params_from_json(j.at("layers"), spec);
}

}  // namespace

json AgentBundle::to_json() const {
  return {{"format", "aerobeam.agent"},
          {"version", 1},
          {"algorithm", to_string(algorithm_)},
          {"obs_dim", obs_dim_},
          {"action_dim", action_dim_},
          {"actor", network_json(actor.spec, actor.params)},
          {"actor_target", network_json(actor.spec, actor_target)},
          {"q1", network_json(q1.spec, q1.params)},
          {"q2", network_json(q2.spec, q2.params)},
          {"q1_target", network_json(q1.spec, q1_target)},
          {"q2_target", network_json(q2.spec, q2_target)}};
}

AgentBundle AgentBundle::from_json(const json& doc, const RunConfig& config) {
  if (doc.value("format", "") != "aerobeam.agent" || doc.value("version", 0) != 1) {
    throw IoError("unsupported agent checkpoint format");
  }
  AgentBundle a(config, algorithm_from_string(doc.at("algorithm").get<std::string>()), 0);
  if (doc.at("obs_dim").get<int>() != a.obs_dim_ || doc.at("action_dim").get<int>() != a.action_dim_) {
    throw ShapeError("checkpoint dimensions do not match the configuration");
  }
  a.actor.params = network_from(doc.at("actor"), a.actor.spec);
  a.actor_target = network_from(doc.at("actor_target"), a.actor.spec);
  a.q1.params = network_from(doc.at("q1"), a.q1.spec);
  a.q2.params = network_from(doc.at("q2"), a.q2.spec);
  a.q1_target = network_from(doc.at("q1_target"), a.q1.spec);
  a.q2_target = network_from(doc.at("q2_target"), a.q2.spec);
  return a;
}

}  // namespace aerobeam::rl

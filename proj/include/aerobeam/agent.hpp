#pragma once

#include <nlohmann/json_fwd.hpp>

#include "aerobeam/config.hpp"
#include "aerobeam/policy.hpp"
#include "aerobeam/replay_buffer.hpp"

// Twin-critic actor-critic agents: GDMTD3 (diffusion actor inside TD3),
// TD3, DDPG (TD3 with its three tricks switched off) and SAC.
namespace aerobeam::rl {

// y = r + gamma (1 - done) min(q1', q2'); with twin_min off only q1' is used.
double td3_target(double reward, double done, double q1_next, double q2_next, double gamma,
                  bool twin_min = true);

// clamp(a + clamp(N(0, sigma^2), -clip, clip), -1, 1), elementwise.
Matrix smoothed_target_action(const Matrix& target_actions, double sigma, double clip, Rng& rng);

struct Network {
  nn::NetSpec spec;
  nn::NetParams params;
  nn::AdamState opt;
};

struct ActorGradient {
  double loss = 0.0;
  nn::NetParams grads;
};

struct CriticLoss {
  double q1 = 0.0;
  double q2 = 0.0;  // 0 when the second critic is disabled
};

// SAC squashed Gaussian: log-std is squashed smoothly into this range.
inline constexpr double kSacLogStdMin = -5.0;
inline constexpr double kSacLogStdMax = 2.0;

class AgentBundle {
 public:
  AgentBundle(const RunConfig& config, Algorithm algorithm, std::uint64_t seed);

  Algorithm algorithm() const { return algorithm_; }
  // Hyperparameters after algorithm-specific flag resolution.
  const AgentConfig& hyper() const { return hyper_; }
  int obs_dim() const { return obs_dim_; }
  int action_dim() const { return action_dim_; }

  // One action per observation column. With explore off: deterministic
  // actor, mean SAC action, or the diffusion chain without injected noise.
  Matrix act(const Matrix& observations, Rng& rng, bool explore) const;

  // Target-policy actions for the bootstrap (TD3 smoothing applied).
  Matrix target_actions(const Matrix& next_observations, Rng& rng) const;

  // Mean squared TD error step on both critics against a shared target.
  CriticLoss critic_update(const Batch& batch, Rng& rng);

  // Actor loss at the current parameters and its exact parameter gradient.
  ActorGradient actor_gradient(const Batch& batch, Rng& rng) const;

  // Policy improvement against Q1 (SAC: min Q and entropy term), followed by
  // the soft update of every target network. Returns the actor loss.
  double actor_update(const Batch& batch, Rng& rng);

  // One critic step plus the delayed actor step.
  CriticLoss update(const Batch& batch, Rng& rng);

  long iterations() const { return iterations_; }
  long actor_updates() const { return actor_updates_; }

  // Critic value of (observation, action) pairs; 1 x batch.
  Matrix q_value(int which, const Matrix& observations, const Matrix& actions) const;

  nlohmann::json to_json() const;
  static AgentBundle from_json(const nlohmann::json& doc, const RunConfig& config);

  // Networks are exposed for inspection and tests.
  Network q1, q2;
  nn::NetParams q1_target, q2_target;
  Network actor;               // MLP actor (TD3/DDPG/SAC) or denoiser (GDMTD3)
  nn::NetParams actor_target;  // unused by SAC
  policy::DiffusionActor diffusion;

 private:
  ActorGradient actor_gradient_gdm(const Batch& batch, Rng& rng) const;
  ActorGradient actor_gradient_mlp(const Batch& batch) const;
  ActorGradient actor_gradient_sac(const Batch& batch, Rng& rng) const;
  void soft_update_targets();

  struct SacSample {
    Matrix action;
    Matrix log_prob;  // 1 x batch
    Matrix eps;
    Matrix u;         // pre-squash sample
    nn::ForwardCache cache;
  };
  SacSample sac_sample(const nn::NetParams& params, const Matrix& observations, Rng& rng) const;

  Algorithm algorithm_;
  AgentConfig hyper_;
  int obs_dim_ = 0;
  int action_dim_ = 0;
  double diffusion_regularizer_ = 0.0;
  long iterations_ = 0;
  long actor_updates_ = 0;
};

}  // namespace aerobeam::rl

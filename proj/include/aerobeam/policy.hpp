#pragma once

#include <vector>

#include "aerobeam/config.hpp"
#include "aerobeam/diffnet.hpp"
#include "aerobeam/rng.hpp"

// Diffusion actor: noise schedule, conditional reverse denoising sampler and
// the pathwise gradient through the sampling chain.
namespace aerobeam::policy {

using nn::Matrix;

struct DiffusionSchedule {
  std::vector<double> betas;       // beta_t, t = 1..N stored at t-1
  std::vector<double> alphas;      // 1 - beta_t
  std::vector<double> alpha_bars;  // prod_{s<=t} alpha_s

  int steps() const { return static_cast<int>(betas.size()); }
};

// Linearly spaced betas in [beta_min, beta_max].
DiffusionSchedule make_schedule(int steps, double beta_min, double beta_max);

// Sinusoidal embedding of the step index: [sin(t f_i), cos(t f_i)] with
// f_i = 10000^(-i / (dim/2)).
nn::Vector time_embedding(int t, int dim);

// Noise predictor eps(x_t, t, s) with input rows [x_t; embed(t); s].
struct DiffusionActor {
  nn::NetSpec spec;
  DiffusionSchedule schedule;
  int action_dim = 0;
  int obs_dim = 0;
  int embed_dim = 0;

  static DiffusionActor make(int obs_dim, int action_dim, const std::vector<int>& hidden,
                             const DiffusionConfig& cfg,
                             nn::Activation act = nn::Activation::Relu);
};

enum class ChainNoise {
  Stochastic,     // x_N ~ N(0, I), z_t ~ N(0, I) for t > 1
  Deterministic,  // x_N ~ N(0, I), no injected noise
  Zero,           // x_N = 0, no injected noise
};

// Pre-drawn randomness of one chain run; holding it fixed makes the chain a
// deterministic function of the parameters.
struct ChainDraws {
  Matrix x_start;          // x_N, action_dim x batch
  std::vector<Matrix> z;   // z[t-1] injected at step t; z[0] is always zero
};

ChainDraws draw_chain(const DiffusionActor& actor, int batch, Rng& rng, ChainNoise mode);

struct ChainTrace {
  std::vector<Matrix> x;                 // x[t], t = 0..N
  std::vector<nn::ForwardCache> caches;  // caches[t-1] for the evaluation at step t
  Matrix action;                         // tanh(x_0)
};

// x_{t-1} = (x_t - (1 - a_t) / sqrt(1 - abar_t) eps) / sqrt(a_t) + sqrt(b_t) z_t
// for t = N..1, then tanh. Conditions are obs_dim x batch.
ChainTrace run_chain(const DiffusionActor& actor, const nn::NetParams& params,
                     const Matrix& conditions, const ChainDraws& draws, bool keep_caches);

// Samples one action per condition column, componentwise in (-1, 1).
Matrix denoise_sample(const DiffusionActor& actor, const nn::NetParams& params,
                      const Matrix& conditions, Rng& rng, bool deterministic);

// Reparameterised gradient of sum(upstream .* action) with respect to the
// denoiser parameters; the draws are treated as constants.
nn::NetParams chain_backward(const DiffusionActor& actor, const nn::NetParams& params,
                             const ChainTrace& trace, const Matrix& upstream);

// Sampling with the chain recorded, ready for a pathwise backward pass.
class PathwiseSample {
 public:
  PathwiseSample(const DiffusionActor& actor, const nn::NetParams& params,
                 const Matrix& conditions, Rng& rng);
  PathwiseSample(const DiffusionActor& actor, const nn::NetParams& params,
                 const Matrix& conditions, ChainDraws draws);

  const Matrix& action() const { return trace_.action; }
  nn::NetParams backward(const Matrix& upstream) const;

 private:
  const DiffusionActor* actor_;
  const nn::NetParams* params_;
  ChainDraws draws_;
  ChainTrace trace_;
};

struct DenoisingLoss {
  double loss = 0.0;
  nn::NetParams grads;
};

// Mean squared noise-prediction error at random steps, with targets taken
// from squashed actions (x_0 = atanh(a)). Used as an optional regulariser.
DenoisingLoss denoising_loss(const DiffusionActor& actor, const nn::NetParams& params,
                             const Matrix& conditions, const Matrix& actions, Rng& rng);

}  // namespace aerobeam::policy

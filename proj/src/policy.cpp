#include "aerobeam/policy.hpp"

#include <cmath>

#include "aerobeam/errors.hpp"

namespace aerobeam::policy {

DiffusionSchedule make_schedule(int steps, double beta_min, double beta_max) {
  if (steps < 1) throw DomainError("diffusion schedule needs at least one step");
  if (!(beta_min > 0.0 && beta_min <= beta_max && beta_max < 1.0)) {
    throw DomainError("diffusion schedule needs 0 < beta_min <= beta_max < 1");
  }
  DiffusionSchedule s;
  double bar = 1.0;
  for (int i = 0; i < steps; ++i) {
    double beta = steps == 1 ? beta_min
                             : beta_min + (beta_max - beta_min) * i / static_cast<double>(steps - 1);
    s.betas.push_back(beta);
    s.alphas.push_back(1.0 - beta);
    bar *= 1.0 - beta;
    s.alpha_bars.push_back(bar);
  }
  return s;
}

nn::Vector time_embedding(int t, int dim) {
  nn::Vector e(dim);
  const int half = dim / 2;
  for (int i = 0; i < half; ++i) {
    const double freq = std::exp(-std::log(10000.0) * i / static_cast<double>(half));
    e[i] = std::sin(t * freq);
    e[half + i] = std::cos(t * freq);
  }
  return e;
}

DiffusionActor DiffusionActor::make(int obs_dim, int action_dim, const std::vector<int>& hidden,
                                    const DiffusionConfig& cfg, nn::Activation act) {
  DiffusionActor a;
  a.action_dim = action_dim;
  a.obs_dim = obs_dim;
  a.embed_dim = cfg.time_embed_dim;
  a.schedule = make_schedule(cfg.steps, cfg.beta_min, cfg.beta_max);
  a.spec = nn::make_spec(action_dim + a.embed_dim + obs_dim, hidden, action_dim, act,
                         nn::Activation::Identity);
  return a;
}

ChainDraws draw_chain(const DiffusionActor& actor, int batch, Rng& rng, ChainNoise mode) {
  const int d = actor.action_dim;
  const int n = actor.schedule.steps();
  ChainDraws draws;
  draws.x_start = Matrix::Zero(d, batch);
  if (mode != ChainNoise::Zero) {
    for (Eigen::Index c = 0; c < batch; ++c) {
      for (Eigen::Index r = 0; r < d; ++r) draws.x_start(r, c) = standard_normal(rng);
    }
  }
  draws.z.assign(n, Matrix::Zero(d, batch));
  if (mode == ChainNoise::Stochastic) {
    for (int t = n; t >= 2; --t) {
      Matrix& z = draws.z[t - 1];
      for (Eigen::Index c = 0; c < batch; ++c) {
        for (Eigen::Index r = 0; r < d; ++r) z(r, c) = standard_normal(rng);
      }
    }
  }
  return draws;
}

namespace {

Matrix denoiser_input(const DiffusionActor& actor, const Matrix& x, int t,
                      const Matrix& conditions) {
  const Eigen::Index b = x.cols();
  Matrix in(actor.spec.input_dim(), b);
  in.topRows(actor.action_dim) = x;
  in.middleRows(actor.action_dim, actor.embed_dim) =
      time_embedding(t, actor.embed_dim).replicate(1, b);
  in.bottomRows(actor.obs_dim) = conditions;
  return in;
}

struct StepCoefficients {
  double inv_sqrt_alpha;  // 1 / sqrt(a_t)
  double eps_scale;       // (1 - a_t) / sqrt(1 - abar_t)
  double sigma;           // sqrt(b_t)
};

StepCoefficients coefficients(const DiffusionSchedule& s, int t) {
  const double a = s.alphas[t - 1];
  return {1.0 / std::sqrt(a), (1.0 - a) / std::sqrt(1.0 - s.alpha_bars[t - 1]),
          std::sqrt(s.betas[t - 1])};
}

void check_conditions(const DiffusionActor& actor, const Matrix& conditions,
                      const ChainDraws& draws) {
  if (conditions.rows() != actor.obs_dim) {
    throw ShapeError("condition has " + std::to_string(conditions.rows()) +
                     " rows, actor expects " + std::to_string(actor.obs_dim));
  }
  if (draws.x_start.rows() != actor.action_dim || draws.x_start.cols() != conditions.cols() ||
      static_cast<int>(draws.z.size()) != actor.schedule.steps()) {
    throw ShapeError("chain draws do not match the batch");
  }
}

}  // namespace

ChainTrace run_chain(const DiffusionActor& actor, const nn::NetParams& params,
                     const Matrix& conditions, const ChainDraws& draws, bool keep_caches) {
  check_conditions(actor, conditions, draws);
  const int n = actor.schedule.steps();
  ChainTrace trace;
  trace.x.resize(n + 1);
  trace.x[n] = draws.x_start;
  if (keep_caches) trace.caches.resize(n);
  for (int t = n; t >= 1; --t) {
    const Matrix in = denoiser_input(actor, trace.x[t], t, conditions);
    Matrix eps;
    if (keep_caches) {
      trace.caches[t - 1] = nn::forward(actor.spec, params, in);
      eps = trace.caches[t - 1].output();
    } else {
      eps = nn::predict(actor.spec, params, in);
    }
    const auto c = coefficients(actor.schedule, t);
    trace.x[t - 1] = c.inv_sqrt_alpha * (trace.x[t] - c.eps_scale * eps);
    if (t > 1) trace.x[t - 1] += c.sigma * draws.z[t - 1];
    if (!trace.x[t - 1].allFinite()) {
      throw DivergenceError("denoising chain produced a non-finite value at step " +
                            std::to_string(t));
    }
  }
  trace.action = trace.x[0].array().tanh();
  return trace;
}

Matrix denoise_sample(const DiffusionActor& actor, const nn::NetParams& params,
                      const Matrix& conditions, Rng& rng, bool deterministic) {
  const ChainDraws draws = draw_chain(actor, static_cast<int>(conditions.cols()), rng,
                                      deterministic ? ChainNoise::Deterministic
                                                    : ChainNoise::Stochastic);
  return run_chain(actor, params, conditions, draws, false).action;
}

nn::NetParams chain_backward(const DiffusionActor& actor, const nn::NetParams& params,
                             const ChainTrace& trace, const Matrix& upstream) {
  const int n = actor.schedule.steps();
  if (static_cast<int>(trace.caches.size()) != n) {
    throw ShapeError("chain trace was recorded without caches");
  }
  if (upstream.rows() != trace.action.rows() || upstream.cols() != trace.action.cols()) {
    throw ShapeError("upstream gradient does not match the sampled actions");
  }
  nn::NetParams total = nn::NetParams::zeros(actor.spec);
  // g holds dL/dx_{t-1} entering step t.
  Matrix g = upstream.array() * (1.0 - trace.action.array().square());
  for (int t = 1; t <= n; ++t) {
    const auto c = coefficients(actor.schedule, t);
    const Matrix d_eps = (-c.inv_sqrt_alpha * c.eps_scale) * g;
    nn::Gradients step = nn::backward(actor.spec, params, trace.caches[t - 1], d_eps);
    total += step.params;
    g = c.inv_sqrt_alpha * g + step.input.topRows(actor.action_dim);
  }
  return total;
}

PathwiseSample::PathwiseSample(const DiffusionActor& actor, const nn::NetParams& params,
                               const Matrix& conditions, Rng& rng)
    : PathwiseSample(actor, params, conditions,
                     draw_chain(actor, static_cast<int>(conditions.cols()), rng,
                                ChainNoise::Stochastic)) {}

PathwiseSample::PathwiseSample(const DiffusionActor& actor, const nn::NetParams& params,
                               const Matrix& conditions, ChainDraws draws)
    : actor_(&actor), params_(&params), draws_(std::move(draws)) {
  trace_ = run_chain(actor, params, conditions, draws_, true);
}

nn::NetParams PathwiseSample::backward(const Matrix& upstream) const {
  return chain_backward(*actor_, *params_, trace_, upstream);
}

DenoisingLoss denoising_loss(const DiffusionActor& actor, const nn::NetParams& params,
                             const Matrix& conditions, const Matrix& actions, Rng& rng) {
  const Eigen::Index b = conditions.cols();
  const int d = actor.action_dim;
  const int n = actor.schedule.steps();
  if (actions.rows() != d || actions.cols() != b) throw ShapeError("denoising_loss: shape mismatch");
  std::uniform_int_distribution<int> pick(1, n);
  Matrix in(actor.spec.input_dim(), b);
  Matrix eps(d, b);
  for (Eigen::Index c = 0; c < b; ++c) {
    const int t = pick(rng);
    const double abar = actor.schedule.alpha_bars[t - 1];
    for (int r = 0; r < d; ++r) eps(r, c) = standard_normal(rng);
    const nn::Vector x0 = actions.col(c).cwiseMax(-0.999).cwiseMin(0.999).array().atanh();
    in.col(c).head(d) = std::sqrt(abar) * x0 + std::sqrt(1.0 - abar) * eps.col(c);
    in.col(c).segment(d, actor.embed_dim) = time_embedding(t, actor.embed_dim);
    in.col(c).tail(actor.obs_dim) = conditions.col(c);
  }
  const nn::ForwardCache cache = nn::forward(actor.spec, params, in);
  const Matrix diff = cache.output() - eps;
  DenoisingLoss out;
  out.loss = diff.squaredNorm() / static_cast<double>(b);
  out.grads = nn::backward(actor.spec, params, cache, (2.0 / static_cast<double>(b)) * diff).params;
  return out;
}

}  // namespace aerobeam::policy

#include <doctest.h>

#include <random>

#include "aerobeam/errors.hpp"
#include "aerobeam/policy.hpp"
#include "gradcheck.hpp"

using namespace aerobeam;
using namespace aerobeam::policy;
using nn::Activation;

namespace {

DiffusionActor small_actor(int obs, int act, int steps, Activation a = Activation::Mish) {
  DiffusionConfig cfg;
  cfg.steps = steps;
  cfg.time_embed_dim = 4;
  return DiffusionActor::make(obs, act, {6, 5}, cfg, a);
}

Matrix random_matrix(std::mt19937_64& g, int r, int c) {
  std::normal_distribution<double> n;
  Matrix m(r, c);
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < c; ++j) m(i, j) = n(g);
  return m;
}

}  // namespace

TEST_CASE("schedules") {
  const auto one = make_schedule(1, 0.5, 0.5);
  CHECK(one.alpha_bars.back() == 0.5);
  const auto s = make_schedule(5, 0.1, 0.5);
  const std::vector<double> betas{0.1, 0.2, 0.3, 0.4, 0.5};
  for (int i = 0; i < 5; ++i) CHECK(s.betas[i] == doctest::Approx(betas[i]).epsilon(1e-15));
  CHECK(s.alpha_bars.back() == doctest::Approx(0.9 * 0.8 * 0.7 * 0.6 * 0.5).epsilon(1e-15));
  CHECK(s.alpha_bars.back() == doctest::Approx(0.1512).epsilon(1e-14));
  std::mt19937_64 g(1);
  std::uniform_real_distribution<double> u(1e-4, 0.999);
  for (int trial = 0; trial < 200; ++trial) {
    double lo = u(g), hi = u(g);
    if (lo > hi) std::swap(lo, hi);
    const auto r = make_schedule(1 + trial % 20, lo, hi);
    double prod = 1.0;
    for (int t = 0; t < r.steps(); ++t) {
      prod *= r.alphas[t];
      CHECK(std::abs(r.alpha_bars[t] - prod) <= 1e-15);
      CHECK(r.betas[t] > 0.0);
      CHECK(r.betas[t] < 1.0);
      if (t > 0) CHECK(r.alpha_bars[t] < r.alpha_bars[t - 1]);
    }
  }
  CHECK_THROWS_AS(make_schedule(0, 0.1, 0.5), DomainError);
  CHECK_THROWS_AS(make_schedule(5, 0.6, 0.5), DomainError);
  CHECK_THROWS_AS(make_schedule(5, 0.0, 0.5), DomainError);
  CHECK_THROWS_AS(make_schedule(5, 0.1, 1.0), DomainError);
}

TEST_CASE("time embedding") {
  const auto e = time_embedding(3, 4);
  CHECK(e[0] == std::sin(3.0));
  CHECK(e[2] == std::cos(3.0));
  CHECK(e[1] == doctest::Approx(std::sin(3.0 / 100.0)).epsilon(1e-15));
  CHECK(e[3] == doctest::Approx(std::cos(3.0 / 100.0)).epsilon(1e-15));
}

TEST_CASE("zero denoiser and zero noise rescale by 1/sqrt(abar_N)") {
  DiffusionActor actor = small_actor(3, 4, 5);
  const auto params = nn::NetParams::zeros(actor.spec);
  Rng rng(0);
  ChainDraws draws = draw_chain(actor, 2, rng, ChainNoise::Zero);
  CHECK(draws.x_start.isZero(0.0));
  draws.x_start.setConstant(0.3888);
  draws.x_start(1, 1) = -2.0;
  const auto trace = run_chain(actor, params, Matrix::Ones(3, 2), draws, false);
  const double factor = 1.0 / std::sqrt(0.1512);
  CHECK(factor == doctest::Approx(2.5720).epsilon(1e-4));
  for (int c = 0; c < 2; ++c) {
    for (int r = 0; r < 4; ++r) {
      const double want = draws.x_start(r, c) * factor;
      CHECK(std::abs(trace.x[0](r, c) - want) <= 1e-12);
      CHECK(trace.action(r, c) == std::tanh(trace.x[0](r, c)));
    }
  }
  CHECK(trace.x[0](0, 0) == doctest::Approx(1.0).epsilon(1e-3));
}

TEST_CASE("samples lie strictly inside the action box and are seeded") {
  DiffusionActor actor = small_actor(5, 3, 5, Activation::Relu);
  const auto params = nn::init_params(actor.spec, 4);
  std::mt19937_64 g(2);
  const Matrix cond = random_matrix(g, 5, 64);
  for (bool det : {false, true}) {
    Rng a(9), b(9);
    const Matrix x = denoise_sample(actor, params, cond, a, det);
    const Matrix y = denoise_sample(actor, params, cond, b, det);
    CHECK(x == y);
    CHECK((x.array().abs() < 1.0).all());
  }
  Rng a(9), b(9);
  CHECK_FALSE(denoise_sample(actor, params, cond, a, true) ==
              denoise_sample(actor, params, cond, b, false));
  CHECK_THROWS_AS(denoise_sample(actor, params, Matrix::Ones(4, 1), a, true), ShapeError);
}

TEST_CASE("deterministic mode draws only the starting point") {
  DiffusionActor actor = small_actor(2, 2, 4);
  Rng a(3), b(3);
  const auto d = draw_chain(actor, 5, a, ChainNoise::Deterministic);
  const auto s = draw_chain(actor, 5, b, ChainNoise::Stochastic);
  CHECK(d.x_start == s.x_start);
  for (const auto& z : d.z) CHECK(z.isZero(0.0));
  CHECK(s.z[0].isZero(0.0));
  CHECK_FALSE(s.z[3].isZero(0.0));
}

TEST_CASE("non-finite chain is reported as divergence") {
  DiffusionActor actor = small_actor(2, 2, 3);
  auto params = nn::init_params(actor.spec, 1);
  params.biases.back().setConstant(INFINITY);
  Rng rng(0);
  CHECK_THROWS_AS(denoise_sample(actor, params, Matrix::Ones(2, 1), rng, true), DivergenceError);
}

TEST_CASE("zero upstream gives zero pathwise gradient") {
  DiffusionActor actor = small_actor(3, 2, 5);
  const auto params = nn::init_params(actor.spec, 2);
  Rng rng(1);
  PathwiseSample s(actor, params, Matrix::Ones(3, 4), rng);
  CHECK(s.backward(Matrix::Zero(2, 4)).max_abs() == 0.0);
}

TEST_CASE("one-step linear denoiser matches the hand-derived chain rule") {
  DiffusionConfig cfg;
  cfg.steps = 1;
  cfg.beta_min = cfg.beta_max = 0.3;
  cfg.time_embed_dim = 2;
  DiffusionActor actor =
      DiffusionActor::make(1, 1, {1}, cfg, Activation::Identity);
  nn::NetParams p = nn::NetParams::zeros(actor.spec);
  // eps = w2 * (u . [x; emb; s] + b1) + b2 with u = (u_x, 0, 0, u_s).
  const double ux = 0.4, us = -0.7, b1 = 0.1, w2 = 1.5, b2 = 0.2;
  p.weights[0](0, 0) = ux;
  p.weights[0](0, 3) = us;
  p.biases[0][0] = b1;
  p.weights[1](0, 0) = w2;
  p.biases[1][0] = b2;
  const double x1 = 0.8, s = 0.5, upstream = 1.3;
  ChainDraws draws{Matrix::Constant(1, 1, x1), {Matrix::Zero(1, 1)}};
  PathwiseSample sample(actor, p, Matrix::Constant(1, 1, s), draws);

  const double alpha = 0.7;
  const double c = (1 - alpha) / std::sqrt(1 - alpha);  // = sqrt(beta)
  const double h = ux * x1 + us * s + b1;
  const double eps = w2 * h + b2;
  const double x0 = (x1 - c * eps) / std::sqrt(alpha);
  const double a = std::tanh(x0);
  CHECK(sample.action()(0, 0) == doctest::Approx(a).epsilon(1e-14));

  const double g = upstream * (1 - a * a) * (-c / std::sqrt(alpha));  // dL/d eps
  const auto grads = sample.backward(Matrix::Constant(1, 1, upstream));
  CHECK(grads.biases[1][0] == doctest::Approx(g).epsilon(1e-13));
  CHECK(grads.weights[1](0, 0) == doctest::Approx(g * h).epsilon(1e-13));
  CHECK(grads.biases[0][0] == doctest::Approx(g * w2).epsilon(1e-13));
  CHECK(grads.weights[0](0, 0) == doctest::Approx(g * w2 * x1).epsilon(1e-13));
  CHECK(grads.weights[0](0, 3) == doctest::Approx(g * w2 * s).epsilon(1e-13));
}

TEST_CASE("pathwise gradient against finite differences with frozen noise") {
  std::mt19937_64 g(77);
  const double h = 1e-5;
  double worst = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    const int obs = 2 + trial % 3, act = 1 + trial % 3, steps = 1 + trial % 5, batch = 1 + trial % 3;
    DiffusionActor actor = small_actor(obs, act, steps);
    nn::NetParams p = nn::init_params(actor.spec, static_cast<std::uint64_t>(100 + trial));
    const Matrix cond = random_matrix(g, obs, batch);
    const Matrix up = random_matrix(g, act, batch);
    Rng rng(static_cast<std::uint64_t>(trial));
    const ChainDraws draws = draw_chain(actor, batch, rng, ChainNoise::Stochastic);
    const PathwiseSample sample(actor, p, cond, draws);
    const auto grads = sample.backward(up);
    auto objective = [&](const nn::NetParams& q) {
      return (run_chain(actor, q, cond, draws, false).action.array() * up.array()).sum();
    };
    for (std::size_t l = 0; l < p.weights.size(); ++l) {
      for (Eigen::Index i = 0; i < p.weights[l].size(); ++i) {
        nn::NetParams a = p, b = p;
        a.weights[l].data()[i] += h;
        b.weights[l].data()[i] -= h;
        worst = std::max(worst, rel_error(grads.weights[l].data()[i], (objective(a) - objective(b)) / (2 * h)));
      }
      for (Eigen::Index i = 0; i < p.biases[l].size(); ++i) {
        nn::NetParams a = p, b = p;
        a.biases[l][i] += h;
        b.biases[l][i] -= h;
        worst = std::max(worst, rel_error(grads.biases[l][i], (objective(a) - objective(b)) / (2 * h)));
      }
    }
  }
  MESSAGE("max relative error " << worst);
  CHECK(worst < 1e-4);
}

TEST_CASE("denoising regulariser gradient") {
  DiffusionActor actor = small_actor(3, 2, 4);
  const auto p = nn::init_params(actor.spec, 5);
  std::mt19937_64 g(6);
  const Matrix cond = random_matrix(g, 3, 6);
  const Matrix actions = random_matrix(g, 2, 6).array().tanh();
  Rng r0(4);
  const auto base = denoising_loss(actor, p, cond, actions, r0);
  CHECK(base.loss > 0.0);
  const double h = 1e-6;
  double worst = 0.0;
  for (Eigen::Index i = 0; i < p.weights[0].size(); i += 3) {
    nn::NetParams a = p, b = p;
    a.weights[0].data()[i] += h;
    b.weights[0].data()[i] -= h;
    Rng ra(4), rb(4);
    const double num =
        (denoising_loss(actor, a, cond, actions, ra).loss - denoising_loss(actor, b, cond, actions, rb).loss) /
        (2 * h);
    worst = std::max(worst, rel_error(base.grads.weights[0].data()[i], num));
  }
  CHECK(worst < 1e-5);
}

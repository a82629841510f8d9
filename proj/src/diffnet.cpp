#include "aerobeam/diffnet.hpp"

#include <bit>
#include <cmath>
#include <fstream>

#include <nlohmann/json.hpp>

#include "aerobeam/errors.hpp"
#include "aerobeam/rng.hpp"

namespace aerobeam::nn {

using nlohmann::json;

std::string to_string(Activation a) {
  switch (a) {
    case Activation::Identity: return "identity";
    case Activation::Relu: return "relu";
    case Activation::Mish: return "mish";
    case Activation::Tanh: return "tanh";
  }
  return "?";
}

Activation activation_from_string(const std::string& s) {
  for (Activation a : {Activation::Identity, Activation::Relu, Activation::Mish, Activation::Tanh}) {
    if (to_string(a) == s) return a;
  }
  throw ShapeError("unknown activation '" + s + "'");
}

void NetSpec::validate() const {
  if (widths.size() < 3) throw ShapeError("network needs at least one hidden layer");
  for (int w : widths) {
    if (w < 1) throw ShapeError("layer widths must be >= 1");
  }
}

NetSpec make_spec(int input, const std::vector<int>& hidden, int output,
                  Activation hidden_act, Activation output_act) {
  NetSpec spec;
  spec.widths.push_back(input);
  spec.widths.insert(spec.widths.end(), hidden.begin(), hidden.end());
  spec.widths.push_back(output);
  spec.hidden = hidden_act;
  spec.output = output_act;
  spec.validate();
  return spec;
}

NetParams NetParams::zeros(const NetSpec& spec) {
  spec.validate();
  NetParams p;
  for (std::size_t l = 0; l < spec.num_layers(); ++l) {
    p.weights.push_back(Matrix::Zero(spec.widths[l + 1], spec.widths[l]));
    p.biases.push_back(Vector::Zero(spec.widths[l + 1]));
  }
  return p;
}

std::size_t NetParams::size() const {
  std::size_t n = 0;
  for (std::size_t l = 0; l < weights.size(); ++l) n += weights[l].size() + biases[l].size();
  return n;
}

bool NetParams::all_finite() const {
  for (std::size_t l = 0; l < weights.size(); ++l) {
    if (!weights[l].allFinite() || !biases[l].allFinite()) return false;
  }
  return true;
}

void NetParams::set_zero() {
  for (auto& w : weights) w.setZero();
  for (auto& b : biases) b.setZero();
}

std::uint64_t NetParams::fingerprint() const {
  std::uint64_t h = 0x84222325cbf29ce4ULL;
  auto mix = [&h](std::uint64_t v) { h = (h ^ v) * 0x100000001b3ULL; h ^= h >> 29; };
  for (std::size_t l = 0; l < weights.size(); ++l) {
    mix(static_cast<std::uint64_t>(weights[l].rows()));
    mix(static_cast<std::uint64_t>(weights[l].cols()));
    const double* w = weights[l].data();
    for (Eigen::Index i = 0; i < weights[l].size(); ++i) mix(std::bit_cast<std::uint64_t>(w[i]));
    const double* b = biases[l].data();
    for (Eigen::Index i = 0; i < biases[l].size(); ++i) mix(std::bit_cast<std::uint64_t>(b[i]));
  }
  return h;
}

bool NetParams::operator==(const NetParams& o) const {
  if (weights.size() != o.weights.size()) return false;
  for (std::size_t l = 0; l < weights.size(); ++l) {
    if (weights[l].rows() != o.weights[l].rows() || weights[l].cols() != o.weights[l].cols()) return false;
    if (weights[l] != o.weights[l] || biases[l] != o.biases[l]) return false;
  }
  return true;
}

NetParams& NetParams::operator+=(const NetParams& o) {
  if (o.weights.size() != weights.size()) throw ShapeError("parameter bundles differ in depth");
  for (std::size_t l = 0; l < weights.size(); ++l) {
    weights[l] += o.weights[l];
    biases[l] += o.biases[l];
  }
  return *this;
}

NetParams& NetParams::operator*=(double s) {
  for (auto& w : weights) w *= s;
  for (auto& b : biases) b *= s;
  return *this;
}

double NetParams::max_abs() const {
  double m = 0.0;
  for (std::size_t l = 0; l < weights.size(); ++l) {
    if (weights[l].size()) m = std::max(m, weights[l].cwiseAbs().maxCoeff());
    if (biases[l].size()) m = std::max(m, biases[l].cwiseAbs().maxCoeff());
  }
  return m;
}

NetParams init_params(const NetSpec& spec, std::uint64_t seed) {
  NetParams p = NetParams::zeros(spec);
  Rng rng(seed);
  for (std::size_t l = 0; l < p.weights.size(); ++l) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(spec.widths[l]));
    std::uniform_real_distribution<double> u(-bound, bound);
    Matrix& w = p.weights[l];
    for (Eigen::Index r = 0; r < w.rows(); ++r) {
      for (Eigen::Index c = 0; c < w.cols(); ++c) w(r, c) = u(rng);
    }
  }
  return p;
}

namespace {

double softplus(double x) { return x > 20.0 ? x : std::log1p(std::exp(x)); }

void apply_activation(Activation a, const Matrix& z, Matrix& out) {
  switch (a) {
    case Activation::Identity: out = z; break;
    case Activation::Relu: out = z.cwiseMax(0.0); break;
    case Activation::Tanh: out = z.array().tanh(); break;
    case Activation::Mish:
      out = z.unaryExpr([](double x) { return x * std::tanh(softplus(x)); });
      break;
  }
}

// grad <- grad * f'(z), elementwise.
void scale_by_derivative(Activation a, const Matrix& z, const Matrix& fz, Matrix& grad) {
  switch (a) {
    case Activation::Identity: break;
    case Activation::Relu: grad.array() *= (z.array() > 0.0).cast<double>(); break;
    case Activation::Tanh: grad.array() *= 1.0 - fz.array().square(); break;
    case Activation::Mish:
      grad.array() *= z.array().unaryExpr([](double x) {
        const double t = std::tanh(softplus(x));
        const double sig = 1.0 / (1.0 + std::exp(-x));
        return t + x * (1.0 - t * t) * sig;
      });
      break;
  }
}

void check_input(const NetSpec& spec, const NetParams& params, const Matrix& input) {
  if (params.weights.size() != spec.num_layers()) throw ShapeError("parameters do not match the spec");
  if (input.rows() != spec.input_dim()) {
    throw ShapeError("input has " + std::to_string(input.rows()) + " rows, network expects " +
                     std::to_string(spec.input_dim()));
  }
}

}  // namespace

ForwardCache forward(const NetSpec& spec, const NetParams& params, const Matrix& input) {
  check_input(spec, params, input);
  ForwardCache cache;
  const std::size_t n = spec.num_layers();
  cache.activations.resize(n + 1);
  cache.pre.resize(n);
  cache.activations[0] = input;
  for (std::size_t l = 0; l < n; ++l) {
    Matrix& z = cache.pre[l];
    z.noalias() = params.weights[l] * cache.activations[l];
    z.colwise() += params.biases[l];
    apply_activation(l + 1 == n ? spec.output : spec.hidden, z, cache.activations[l + 1]);
  }
  cache.fingerprint = params.fingerprint();
  return cache;
}

Matrix predict(const NetSpec& spec, const NetParams& params, const Matrix& input) {
  check_input(spec, params, input);
  Matrix a = input;
  Matrix z;
  const std::size_t n = spec.num_layers();
  for (std::size_t l = 0; l < n; ++l) {
    z.noalias() = params.weights[l] * a;
    z.colwise() += params.biases[l];
    apply_activation(l + 1 == n ? spec.output : spec.hidden, z, a);
  }
  return a;
}

Gradients backward(const NetSpec& spec, const NetParams& params, const ForwardCache& cache,
                   const Matrix& upstream, bool want_param_grads) {
  const std::size_t n = spec.num_layers();
  if (cache.pre.size() != n || cache.fingerprint != params.fingerprint()) {
    throw ShapeError("stale forward cache: parameters changed since the forward pass");
  }
  if (upstream.rows() != cache.output().rows() || upstream.cols() != cache.output().cols()) {
    throw ShapeError("upstream gradient shape does not match the network output");
  }
  Gradients g;
  if (want_param_grads) g.params = NetParams::zeros(spec);
  Matrix delta = upstream;
  for (std::size_t l = n; l-- > 0;) {
    scale_by_derivative(l + 1 == n ? spec.output : spec.hidden, cache.pre[l],
                        cache.activations[l + 1], delta);
    if (want_param_grads) {
      g.params.weights[l].noalias() = delta * cache.activations[l].transpose();
      g.params.biases[l] = delta.rowwise().sum();
    }
    Matrix next;
    next.noalias() = params.weights[l].transpose() * delta;
    delta = std::move(next);
  }
  g.input = std::move(delta);
  return g;
}

AdamState AdamState::init(const NetSpec& spec) {
  return {NetParams::zeros(spec), NetParams::zeros(spec), 0};
}

void adam_step(NetParams& params, const NetParams& grads, AdamState& state,
               const AdamConfig& cfg) {
  if (grads.weights.size() != params.weights.size() ||
      state.m.weights.size() != params.weights.size()) {
    throw ShapeError("adam_step: shape mismatch");
  }
  for (std::size_t l = 0; l < params.weights.size(); ++l) {
    if (grads.weights[l].rows() != params.weights[l].rows() ||
        grads.weights[l].cols() != params.weights[l].cols() ||
        grads.biases[l].size() != params.biases[l].size()) {
      throw ShapeError("adam_step: shape mismatch");
    }
  }
  if (!grads.all_finite()) throw DivergenceError("adam_step: non-finite gradient");

  state.step += 1;
  const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
  auto update = [&](auto& theta, const auto& g, auto& m, auto& v) {
    m = cfg.beta1 * m + (1.0 - cfg.beta1) * g;
    v = cfg.beta2 * v + (1.0 - cfg.beta2) * g.cwiseProduct(g);
    theta.array() -= cfg.lr * (m.array() / c1) / ((v.array() / c2).sqrt() + cfg.eps);
  };
  for (std::size_t l = 0; l < params.weights.size(); ++l) {
    update(params.weights[l], grads.weights[l], state.m.weights[l], state.v.weights[l]);
    update(params.biases[l], grads.biases[l], state.m.biases[l], state.v.biases[l]);
  }
}

void soft_update(const NetParams& online, NetParams& target, double tau) {
  if (!(tau > 0.0 && tau <= 1.0)) throw DomainError("soft_update: tau must be in (0, 1]");
  if (online.weights.size() != target.weights.size()) throw ShapeError("soft_update: shape mismatch");
  for (std::size_t l = 0; l < online.weights.size(); ++l) {
    if (online.weights[l].rows() != target.weights[l].rows() ||
        online.weights[l].cols() != target.weights[l].cols() ||
        online.biases[l].size() != target.biases[l].size()) {
      throw ShapeError("soft_update: shape mismatch");
    }
    if (tau == 1.0) {
      target.weights[l] = online.weights[l];
      target.biases[l] = online.biases[l];
    } else {
      target.weights[l] = tau * online.weights[l] + (1.0 - tau) * target.weights[l];
      target.biases[l] = tau * online.biases[l] + (1.0 - tau) * target.biases[l];
    }
  }
}

json spec_to_json(const NetSpec& spec) {
  return {{"widths", spec.widths},
          {"hidden", to_string(spec.hidden)},
          {"output", to_string(spec.output)}};
}

NetSpec spec_from_json(const json& j) {
  NetSpec spec;
  spec.widths = j.at("widths").get<std::vector<int>>();
  spec.hidden = activation_from_string(j.at("hidden").get<std::string>());
  spec.output = activation_from_string(j.at("output").get<std::string>());
  spec.validate();
  return spec;
}

json params_to_json(const NetParams& params) {
  json layers = json::array();
  for (std::size_t l = 0; l < params.weights.size(); ++l) {
    const Matrix& w = params.weights[l];
    std::vector<double> flat;
    flat.reserve(w.size());
    for (Eigen::Index r = 0; r < w.rows(); ++r) {
      for (Eigen::Index c = 0; c < w.cols(); ++c) flat.push_back(w(r, c));
    }
    std::vector<double> bias(params.biases[l].data(), params.biases[l].data() + params.biases[l].size());
    layers.push_back({{"rows", w.rows()}, {"cols", w.cols()}, {"weight", flat}, {"bias", bias}});
  }
  return layers;
}

NetParams params_from_json(const json& layers, const NetSpec& spec) {
  NetParams p = NetParams::zeros(spec);
  if (!layers.is_array() || layers.size() != p.weights.size()) {
    throw ShapeError("checkpoint layer count does not match the spec");
  }
  for (std::size_t l = 0; l < p.weights.size(); ++l) {
    const auto& L = layers[l];
    Matrix& w = p.weights[l];
    if (L.at("rows").get<Eigen::Index>() != w.rows() || L.at("cols").get<Eigen::Index>() != w.cols()) {
      throw ShapeError("checkpoint layer shape does not match the spec");
    }
    auto flat = L.at("weight").get<std::vector<double>>();
    auto bias = L.at("bias").get<std::vector<double>>();
    if (static_cast<Eigen::Index>(flat.size()) != w.size() ||
        static_cast<Eigen::Index>(bias.size()) != p.biases[l].size()) {
      throw ShapeError("checkpoint layer size does not match the spec");
    }
    for (Eigen::Index r = 0; r < w.rows(); ++r) {
      for (Eigen::Index c = 0; c < w.cols(); ++c) w(r, c) = flat[r * w.cols() + c];
    }
    for (std::size_t i = 0; i < bias.size(); ++i) p.biases[l][i] = bias[i];
  }
  return p;
}

void save_checkpoint(const std::filesystem::path& path, const NetSpec& spec,
                     const NetParams& params) {
  json doc = {{"format", "aerobeam.net"},
              {"version", 1},
              {"spec", spec_to_json(spec)},
              {"layers", params_to_json(params)}};
  std::ofstream out(path);
  if (!out) throw IoError("cannot write checkpoint " + path.string());
  out << doc.dump() << '\n';
  if (!out) throw IoError("failed writing checkpoint " + path.string());
}

std::pair<NetSpec, NetParams> load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open checkpoint " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw IoError("malformed checkpoint " + path.string() + ": " + e.what());
  }
  if (doc.value("format", "") != "aerobeam.net" || doc.value("version", 0) != 1) {
    throw IoError("unsupported checkpoint format in " + path.string());
  }
  NetSpec spec = spec_from_json(doc.at("spec"));
  return {spec, params_from_json(doc.at("layers"), spec)};
}

}  // namespace aerobeam::nn

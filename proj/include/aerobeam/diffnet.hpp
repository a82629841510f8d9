#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <nlohmann/json_fwd.hpp>

// Small dense feed-forward networks with exact reverse-mode gradients and
// Adam updates. Batches are stored one sample per column.
namespace aerobeam::nn {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

enum class Activation { Identity, Relu, Mish, Tanh };

std::string to_string(Activation a);
Activation activation_from_string(const std::string& s);

struct NetSpec {
  std::vector<int> widths;  // input, hidden..., output
  Activation hidden = Activation::Relu;
  Activation output = Activation::Identity;

  int input_dim() const { return widths.front(); }
  int output_dim() const { return widths.back(); }
  std::size_t num_layers() const { return widths.size() - 1; }
  void validate() const;
  bool operator==(const NetSpec&) const = default;
};

NetSpec make_spec(int input, const std::vector<int>& hidden, int output,
                  Activation hidden_act, Activation output_act);

struct NetParams {
  std::vector<Matrix> weights;  // layer l maps widths[l] -> widths[l+1]
  std::vector<Vector> biases;

  static NetParams zeros(const NetSpec& spec);
  std::size_t size() const;
  bool all_finite() const;
  void set_zero();
  // Content hash, used to detect caches that belong to other parameters.
  std::uint64_t fingerprint() const;
  bool operator==(const NetParams& o) const;

  NetParams& operator+=(const NetParams& o);
  NetParams& operator*=(double s);
  double max_abs() const;
};

// Weights ~ U(-1/sqrt(fan_in), 1/sqrt(fan_in)), zero biases.
NetParams init_params(const NetSpec& spec, std::uint64_t seed);

struct ForwardCache {
  std::vector<Matrix> activations;  // [0] is the input, back() the output
  std::vector<Matrix> pre;          // affine outputs per layer
  std::uint64_t fingerprint = 0;

  const Matrix& output() const { return activations.back(); }
};

ForwardCache forward(const NetSpec& spec, const NetParams& params, const Matrix& input);

// Forward without keeping intermediates.
Matrix predict(const NetSpec& spec, const NetParams& params, const Matrix& input);

struct Gradients {
  NetParams params;  // empty when parameter gradients were not requested
  Matrix input;
};

// Gradients of sum_ij upstream_ij * output_ij.
Gradients backward(const NetSpec& spec, const NetParams& params, const ForwardCache& cache,
                   const Matrix& upstream, bool want_param_grads = true);

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  NetParams m;
  NetParams v;
  long step = 0;

  static AdamState init(const NetSpec& spec);
};

// Bias-corrected Adam. Leaves `params` and `state` untouched and throws
// DivergenceError when a gradient entry is not finite.
void adam_step(NetParams& params, const NetParams& grads, AdamState& state,
               const AdamConfig& cfg);

// target <- tau * online + (1 - tau) * target.
void soft_update(const NetParams& online, NetParams& target, double tau);

nlohmann::json spec_to_json(const NetSpec& spec);
NetSpec spec_from_json(const nlohmann::json& j);
nlohmann::json params_to_json(const NetParams& params);
NetParams params_from_json(const nlohmann::json& j, const NetSpec& spec);

// Versioned JSON container {format, version, spec, layers}. Doubles are
// written in shortest round-trip form, so save -> load is bit-exact.
void save_checkpoint(const std::filesystem::path& path, const NetSpec& spec,
                     const NetParams& params);
std::pair<NetSpec, NetParams> load_checkpoint(const std::filesystem::path& path);

}  // namespace aerobeam::nn

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "mrin/io_error.hpp"
#include "mrin/tensor.hpp"

namespace mrin {

struct ConvSpec {
  int filters = 0;
  int kernel = 0;  // square kernel, stride 1, "same" padding
  bool operator==(const ConvSpec&) const = default;
};

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  bool operator==(const AdamConfig&) const = default;
};

inline constexpr int kConvLayers = 3;

/// Three same-padded convolutions followed by a dense layer that maps the
/// flattened conv3 output back onto a width x height x out_channels grid.
/// Leaky ReLU follows every layer.
struct NetworkConfig {
  int width = 12;
  int height = 8;
  int in_channels = 34;
  int out_channels = 32;
  std::array<ConvSpec, kConvLayers> convs{{{8, 4}, {16, 3}, {32, 3}}};
  double leaky_slope = 0.01;
  AdamConfig adam;
  std::uint64_t seed = 1;

  /// Throws std::invalid_argument on nonsensical values.
  void validate() const;
  int conv_in_channels(int layer) const {  // layer is 0-based
    return layer == 0 ? in_channels : convs[layer - 1].filters;
  }
  std::size_t dense_inputs() const {
    return static_cast<std::size_t>(width) * height * convs[kConvLayers - 1].filters;
  }
  std::size_t dense_outputs() const {
    return static_cast<std::size_t>(width) * height * out_channels;
  }
  bool operator==(const NetworkConfig&) const = default;
};

/// A named block of the flat parameter vector. Conv weights are laid out
/// (filter, ky, kx, channel); dense weights (row = output, col = input).
struct ParamSegment {
  std::string name;
  std::size_t offset = 0;
  std::vector<int> shape;

  std::size_t size() const;
  bool operator==(const ParamSegment&) const = default;
};

/// Stable flat-index map for a configuration: conv1.w, conv1.b, conv2.w,
/// conv2.b, conv3.w, conv3.b, dense.w, dense.b.
std::vector<ParamSegment> make_layout(const NetworkConfig& config);

struct NetworkParams {
  NetworkConfig config;
  std::vector<ParamSegment> layout;
  std::vector<double> values;

  const ParamSegment& conv_weights(int layer) const { return layout[2 * layer]; }
  const ParamSegment& conv_bias(int layer) const { return layout[2 * layer + 1]; }
  const ParamSegment& dense_weights() const { return layout[6]; }
  const ParamSegment& dense_bias() const { return layout[7]; }

  std::size_t conv_weight_index(int layer, int filter, int ky, int kx, int channel) const;
  std::size_t dense_weight_index(std::size_t row, std::size_t col) const;

  bool operator==(const NetworkParams&) const = default;
};

/// Post-activation outputs of every layer.
struct LayerActivations {
  std::array<Tensor3, kConvLayers> conv;  // (W,H,f1), (W,H,f2), (W,H,f3)
  Tensor3 output;                         // dense output reshaped to (W,H,32)
};

class ShapeMismatch : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class VersionMismatch : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Fan-in scaled uniform weights (variance 2/fan_in), zero biases.
NetworkParams init_params(const NetworkConfig& config);

inline double leaky_relu(double x, double slope) { return x > 0.0 ? x : slope * x; }
inline double leaky_relu_grad(double x, double slope) { return x > 0.0 ? 1.0 : slope; }

LayerActivations forward(const NetworkParams& params, const Tensor3& state);

/// Mean over all entries of the squared difference.
double mse_loss(const Tensor3& pred, const Tensor3& target);

/// Writes d(mse)/d(param) for every parameter into `grad` (resized to the
/// parameter count) and returns the loss at `params`.
double backward(const NetworkParams& params, const Tensor3& state, const Tensor3& target,
                std::vector<double>& grad);

struct AdamMoments {
  std::vector<double> m;
  std::vector<double> v;
};

AdamMoments make_moments(std::size_t n);

/// One bias-corrected Adam update at step t (t >= 1).
void adam_step(std::span<double> params, std::span<const double> grads, AdamMoments& moments,
               std::int64_t t, const AdamConfig& cfg);

/// A trained network plus the fingerprint of the run that produced it.
struct Model {
  NetworkParams params;
  std::string fingerprint;
  bool operator==(const Model&) const = default;
};

inline constexpr std::uint32_t kModelFormatVersion = 1;

/// Little-endian container: magic, version, config, fingerprint, the flat
/// index map, then the raw weights.
void save_model(const Model& model, const std::filesystem::path& path);
Model load_model(const std::filesystem::path& path);
std::string serialize_model(const Model& model);
Model parse_model(const std::string& bytes);

}  // namespace mrin

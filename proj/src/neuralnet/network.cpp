#include <algorithm>
#include <cmath>
#include <numeric>

#include "mrin/neuralnet.hpp"
#include "mrin/random.hpp"

namespace mrin {
namespace {

// Pre-activations are kept for backprop.
struct ForwardTrace {
  std::array<Tensor3, kConvLayers> pre;
  std::array<Tensor3, kConvLayers> post;
  Tensor3 out_pre;
  Tensor3 out_post;
};

void conv_forward(const Tensor3& in, std::span<const double> w, std::span<const double> b,
                  int filters, int k, Tensor3& out) {
  const int pad = (k - 1) / 2;
  const int cin = in.channels;
  out = Tensor3(in.width, in.height, filters);
  for (int y = 0; y < in.height; ++y) {
    for (int x = 0; x < in.width; ++x) {
      for (int f = 0; f < filters; ++f) {
        double acc = b[f];
        for (int ky = 0; ky < k; ++ky) {
          const int sy = y + ky - pad;
          if (sy < 0 || sy >= in.height) continue;
          for (int kx = 0; kx < k; ++kx) {
            const int sx = x + kx - pad;
            if (sx < 0 || sx >= in.width) continue;
            const double* src = &in.data[in.index(sx, sy, 0)];
            const double* wf = &w[((static_cast<std::size_t>(f) * k + ky) * k + kx) * cin];
            for (int c = 0; c < cin; ++c) acc += wf[c] * src[c];
          }
        }
        out.at(x, y, f) = acc;
      }
    }
  }
}

// Accumulates weight/bias gradients and, if `din` is non-null, the input
// gradient for a conv layer given dL/dz.
void conv_backward(const Tensor3& in, std::span<const double> w, const Tensor3& dz, int filters,
                   int k, std::span<double> dw, std::span<double> db, Tensor3* din) {
  const int pad = (k - 1) / 2;
  const int cin = in.channels;
  if (din) *din = Tensor3(in.width, in.height, cin);
  for (int y = 0; y < in.height; ++y) {
    for (int x = 0; x < in.width; ++x) {
      for (int f = 0; f < filters; ++f) {
        const double g = dz.at(x, y, f);
        if (g == 0.0) continue;
        db[f] += g;
        for (int ky = 0; ky < k; ++ky) {
          const int sy = y + ky - pad;
          if (sy < 0 || sy >= in.height) continue;
          for (int kx = 0; kx < k; ++kx) {
            const int sx = x + kx - pad;
            if (sx < 0 || sx >= in.width) continue;
            const std::size_t woff = ((static_cast<std::size_t>(f) * k + ky) * k + kx) * cin;
            const double* src = &in.data[in.index(sx, sy, 0)];
            double* dwf = &dw[woff];
            for (int c = 0; c < cin; ++c) dwf[c] += g * src[c];
            if (din) {
              const double* wf = &w[woff];
              double* dst = &din->data[din->index(sx, sy, 0)];
              for (int c = 0; c < cin; ++c) dst[c] += g * wf[c];
            }
          }
        }
      }
    }
  }
}

std::span<const double> segment_view(const NetworkParams& p, const ParamSegment& s) {
  return std::span<const double>(p.values).subspan(s.offset, s.size());
}

void check_state(const NetworkParams& params, const Tensor3& state) {
  const auto& c = params.config;
  if (state.width != c.width || state.height != c.height || state.channels != c.in_channels) {
    throw ShapeMismatch("state shape (" + std::to_string(state.width) + "," +
                        std::to_string(state.height) + "," + std::to_string(state.channels) +
                        ") does not match network input (" + std::to_string(c.width) + "," +
                        std::to_string(c.height) + "," + std::to_string(c.in_channels) + ")");
  }
  if (params.values.size() != params.layout.back().offset + params.layout.back().size()) {
    throw ShapeMismatch("parameter vector does not match its layout");
  }
}

ForwardTrace run_forward(const NetworkParams& params, const Tensor3& state) {
  check_state(params, state);
  const auto& cfg = params.config;
  const double slope = cfg.leaky_slope;
  ForwardTrace tr;
  const Tensor3* in = &state;
  for (int l = 0; l < kConvLayers; ++l) {
    conv_forward(*in, segment_view(params, params.conv_weights(l)),
                 segment_view(params, params.conv_bias(l)), cfg.convs[l].filters,
                 cfg.convs[l].kernel, tr.pre[l]);
    tr.post[l] = tr.pre[l];
    for (auto& v : tr.post[l].data) v = leaky_relu(v, slope);
    in = &tr.post[l];
  }

  const auto w = segment_view(params, params.dense_weights());
  const auto b = segment_view(params, params.dense_bias());
  const std::size_t n_in = cfg.dense_inputs();
  const std::size_t n_out = cfg.dense_outputs();
  const double* a = tr.post[kConvLayers - 1].data.data();
  tr.out_pre = Tensor3(cfg.width, cfg.height, cfg.out_channels);
  for (std::size_t o = 0; o < n_out; ++o) {
    const double* row = &w[o * n_in];
    double acc = 0.0;
    for (std::size_t i = 0; i < n_in; ++i) acc += row[i] * a[i];
    tr.out_pre.data[o] = b[o] + acc;
  }
  tr.out_post = tr.out_pre;
  for (auto& v : tr.out_post.data) v = leaky_relu(v, slope);
  return tr;
}

}  // namespace

void NetworkConfig::validate() const {
  if (width < 1 || height < 1) throw std::invalid_argument("grid dimensions must be positive");
  if (in_channels < 1 || out_channels < 1) throw std::invalid_argument("channel counts must be positive");
  for (const auto& c : convs) {
    if (c.filters < 1 || c.kernel < 1) throw std::invalid_argument("conv specs must be positive");
  }
  if (!std::isfinite(leaky_slope) || leaky_slope < 0.0 || leaky_slope >= 1.0) {
    throw std::invalid_argument("leaky_slope must be in [0,1)");
  }
  if (!(adam.lr > 0.0) || !std::isfinite(adam.lr)) throw std::invalid_argument("adam.lr must be positive");
  if (!(adam.beta1 >= 0.0 && adam.beta1 < 1.0) || !(adam.beta2 >= 0.0 && adam.beta2 < 1.0)) {
    throw std::invalid_argument("adam betas must be in [0,1)");
  }
  if (!(adam.epsilon > 0.0)) throw std::invalid_argument("adam.epsilon must be positive");
}

std::size_t ParamSegment::size() const {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         [](std::size_t a, int d) { return a * static_cast<std::size_t>(d); });
}

std::vector<ParamSegment> make_layout(const NetworkConfig& config) {
  std::vector<ParamSegment> out;
  std::size_t offset = 0;
  auto add = [&](std::string name, std::vector<int> shape) {
    ParamSegment s{std::move(name), offset, std::move(shape)};
    offset += s.size();
    out.push_back(std::move(s));
  };
  for (int l = 0; l < kConvLayers; ++l) {
    const auto& c = config.convs[l];
    const std::string prefix = "conv" + std::to_string(l + 1);
    add(prefix + ".w", {c.filters, c.kernel, c.kernel, config.conv_in_channels(l)});
    add(prefix + ".b", {c.filters});
  }
  add("dense.w", {static_cast<int>(config.dense_outputs()), static_cast<int>(config.dense_inputs())});
  add("dense.b", {static_cast<int>(config.dense_outputs())});
  return out;
}

std::size_t NetworkParams::conv_weight_index(int layer, int filter, int ky, int kx,
                                             int channel) const {
  const auto& seg = conv_weights(layer);
  const int k = seg.shape[1];
  const int cin = seg.shape[3];
  return seg.offset + ((static_cast<std::size_t>(filter) * k + ky) * k + kx) * cin + channel;
}

std::size_t NetworkParams::dense_weight_index(std::size_t row, std::size_t col) const {
  const auto& seg = dense_weights();
  return seg.offset + row * static_cast<std::size_t>(seg.shape[1]) + col;
}

NetworkParams init_params(const NetworkConfig& config) {
  config.validate();
  NetworkParams p;
  p.config = config;
  p.layout = make_layout(config);
  p.values.assign(p.layout.back().offset + p.layout.back().size(), 0.0);
  Rng rng(config.seed);
  for (std::size_t s = 0; s < p.layout.size(); s += 2) {  // weights; biases stay zero
    const auto& seg = p.layout[s];
    const std::size_t fan_in = seg.size() / static_cast<std::size_t>(seg.shape[0]);
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in));
    for (std::size_t i = 0; i < seg.size(); ++i) {
      p.values[seg.offset + i] = uniform_real(rng, -limit, limit);
    }
  }
  return p;
}

LayerActivations forward(const NetworkParams& params, const Tensor3& state) {
  auto tr = run_forward(params, state);
  LayerActivations out;
  for (int l = 0; l < kConvLayers; ++l) out.conv[l] = std::move(tr.post[l]);
  out.output = std::move(tr.out_post);
  return out;
}

double mse_loss(const Tensor3& pred, const Tensor3& target) {
  if (!pred.same_shape(target)) throw ShapeMismatch("mse_loss operands differ in shape");
  if (pred.data.empty()) return 0.0;
  double acc = 0.0;
  for (std::size_t i = 0; i < pred.data.size(); ++i) {
    const double d = pred.data[i] - target.data[i];
    acc += d * d;
  }
  return acc / static_cast<double>(pred.data.size());
}

double backward(const NetworkParams& params, const Tensor3& state, const Tensor3& target,
                std::vector<double>& grad) {
  const auto& cfg = params.config;
  if (target.width != cfg.width || target.height != cfg.height ||
      target.channels != cfg.out_channels) {
    throw ShapeMismatch("target shape does not match network output");
  }
  auto tr = run_forward(params, state);
  const double loss = mse_loss(tr.out_post, target);
  const double slope = cfg.leaky_slope;

  grad.assign(params.values.size(), 0.0);
  std::span<double> g(grad);

  // Dense layer.
  const std::size_t n_in = cfg.dense_inputs();
  const std::size_t n_out = cfg.dense_outputs();
  const double scale = 2.0 / static_cast<double>(n_out);
  const auto w = segment_view(params, params.dense_weights());
  const auto& dws = params.dense_weights();
  const auto& dbs = params.dense_bias();
  const double* a = tr.post[kConvLayers - 1].data.data();
  Tensor3 da(cfg.width, cfg.height, cfg.convs[kConvLayers - 1].filters);
  for (std::size_t o = 0; o < n_out; ++o) {
    const double dz = scale * (tr.out_post.data[o] - target.data[o]) *
                      leaky_relu_grad(tr.out_pre.data[o], slope);
    g[dbs.offset + o] = dz;
    if (dz == 0.0) continue;
    const double* row = &w[o * n_in];
    double* grow = &g[dws.offset + o * n_in];
    for (std::size_t i = 0; i < n_in; ++i) {
      grow[i] = dz * a[i];
      da.data[i] += dz * row[i];
    }
  }

  // Conv stack, last to first.
  Tensor3 dpost = std::move(da);
  for (int l = kConvLayers - 1; l >= 0; --l) {
    Tensor3 dz = std::move(dpost);
    for (std::size_t i = 0; i < dz.data.size(); ++i) {
      dz.data[i] *= leaky_relu_grad(tr.pre[l].data[i], slope);
    }
    const Tensor3& in = l == 0 ? state : tr.post[l - 1];
    const auto& ws = params.conv_weights(l);
    const auto& bs = params.conv_bias(l);
    Tensor3 din;
    conv_backward(in, segment_view(params, ws), dz, cfg.convs[l].filters, cfg.convs[l].kernel,
                  g.subspan(ws.offset, ws.size()), g.subspan(bs.offset, bs.size()),
                  l == 0 ? nullptr : &din);
    dpost = std::move(din);
  }
  return loss;
}

AdamMoments make_moments(std::size_t n) { return {std::vector<double>(n, 0.0), std::vector<double>(n, 0.0)}; }

void adam_step(std::span<double> params, std::span<const double> grads, AdamMoments& moments,
               std::int64_t t, const AdamConfig& cfg) {
  if (t < 1) throw std::invalid_argument("adam step counter must start at 1");
  if (grads.size() != params.size() || moments.m.size() != params.size() ||
      moments.v.size() != params.size()) {
    throw ShapeMismatch("adam_step operands differ in size");
  }
  const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(t));
  const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(t));
  double* m = moments.m.data();
  double* v = moments.v.data();
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double gi = grads[i];
    m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * gi;
    v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * gi * gi;
    const double m_hat = m[i] / c1;
    const double v_hat = v[i] / c2;
    params[i] -= cfg.lr * m_hat / (std::sqrt(v_hat) + cfg.epsilon);
  }
}

}  // namespace mrin

#include <chrono>
#include <cmath>
#include <filesystem>

#include "doctest.h"
#include "mrin/neuralnet.hpp"
#include "mrin/random.hpp"
#include "oracles.hpp"

using namespace mrin;

namespace {

NetworkConfig small_config(int w = 6, int h = 5) {
  NetworkConfig c;
  c.width = w;
  c.height = h;
  c.convs = {{{4, 3}, {4, 3}, {3, 3}}};
  c.seed = 17;
  return c;
}

Tensor3 random_state(Rng& rng, int w, int h) {
  return to_state_tensor(oracle::random_grid(rng, w, h, 0.5, 33));
}

Tensor3 random_target(Rng& rng, int w, int h) {
  Tensor3 t(w, h, 32);
  for (auto& v : t.data) v = uniform01(rng) < 0.1 ? 1.0 : 0.0;
  return t;
}

// Explicit-loop forward pass over the documented weight layouts.
struct RefActs {
  std::vector<std::vector<double>> conv;  // each (y, x, f) flattened
  std::vector<double> out;
};

RefActs reference_forward(const NetworkParams& p, const Tensor3& s) {
  const auto& c = p.config;
  const double slope = c.leaky_slope;
  RefActs r;
  std::vector<double> in = s.data;
  int in_ch = c.in_channels;
  for (int l = 0; l < kConvLayers; ++l) {
    const int f_n = c.convs[l].filters;
    const int k = c.convs[l].kernel;
    const int pad = (k - 1) / 2;
    const auto wo = p.conv_weights(l).offset;
    const auto bo = p.conv_bias(l).offset;
    std::vector<double> out(static_cast<std::size_t>(c.width) * c.height * f_n);
    for (int y = 0; y < c.height; ++y) {
      for (int x = 0; x < c.width; ++x) {
        for (int f = 0; f < f_n; ++f) {
          double acc = p.values[bo + f];
          for (int ky = 0; ky < k; ++ky) {
            for (int kx = 0; kx < k; ++kx) {
              const int sy = y + ky - pad;
              const int sx = x + kx - pad;
              if (sy < 0 || sx < 0 || sy >= c.height || sx >= c.width) continue;
              for (int ch = 0; ch < in_ch; ++ch) {
                const std::size_t wi = wo + ((static_cast<std::size_t>(f) * k + ky) * k + kx) * in_ch + ch;
                acc += p.values[wi] * in[(static_cast<std::size_t>(sy) * c.width + sx) * in_ch + ch];
              }
            }
          }
          out[(static_cast<std::size_t>(y) * c.width + x) * f_n + f] = leaky_relu(acc, slope);
        }
      }
    }
    r.conv.push_back(out);
    in = out;
    in_ch = f_n;
  }
  const std::size_t n_in = in.size();
  const std::size_t n_out = c.dense_outputs();
  const auto wo = p.dense_weights().offset;
  const auto bo = p.dense_bias().offset;
  for (std::size_t o = 0; o < n_out; ++o) {
    double acc = p.values[bo + o];
    for (std::size_t i = 0; i < n_in; ++i) acc += p.values[wo + o * n_in + i] * in[i];
    r.out.push_back(leaky_relu(acc, slope));
  }
  return r;
}

}  // namespace

TEST_CASE("leaky relu") {
  CHECK(leaky_relu(3.0, 0.01) == 3.0);
  CHECK(leaky_relu(-2.0, 0.01) == doctest::Approx(-0.02).epsilon(1e-15));
  CHECK(leaky_relu(0.0, 0.01) == 0.0);
  CHECK(leaky_relu(0.0, 0.3) == 0.0);
}

TEST_CASE("layout") {
  NetworkConfig c;
  auto layout = make_layout(c);
  REQUIRE(layout.size() == 8);
  const char* names[] = {"conv1.w", "conv1.b", "conv2.w", "conv2.b",
                         "conv3.w", "conv3.b", "dense.w", "dense.b"};
  std::size_t offset = 0;
  for (int i = 0; i < 8; ++i) {
    CHECK(layout[i].name == names[i]);
    CHECK(layout[i].offset == offset);
    offset += layout[i].size();
  }
  CHECK(layout[0].size() == 8u * 4 * 4 * 34);
  CHECK(layout[2].size() == 16u * 3 * 3 * 8);
  CHECK(layout[4].size() == 32u * 3 * 3 * 16);
  CHECK(layout[6].size() == (12u * 8 * 32) * (12u * 8 * 32));
}

TEST_CASE("init") {
  NetworkConfig c = small_config(8, 6);
  auto a = init_params(c);
  CHECK(a == init_params(c));
  c.seed = 18;
  CHECK(a.values != init_params(c).values);

  NetworkConfig big;
  auto p = init_params(big);
  for (int l = 0; l < 4; ++l) {
    const auto& w = l < 3 ? p.conv_weights(l) : p.dense_weights();
    const auto& b = l < 3 ? p.conv_bias(l) : p.dense_bias();
    const double fan_in = static_cast<double>(w.size()) / w.shape[0];
    double sq = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) sq += p.values[w.offset + i] * p.values[w.offset + i];
    const double sd = std::sqrt(sq / static_cast<double>(w.size()));
    CHECK(sd == doctest::Approx(std::sqrt(2.0 / fan_in)).epsilon(0.2));
    for (std::size_t i = 0; i < b.size(); ++i) CHECK(p.values[b.offset + i] == 0.0);
  }
  c.leaky_slope = 1.5;
  CHECK_THROWS_AS(init_params(c), std::invalid_argument);
}

TEST_CASE("forward") {
  SUBCASE("zero weights") {
    auto p = init_params(small_config());
    std::fill(p.values.begin(), p.values.end(), 0.0);
    Rng rng(1);
    auto acts = forward(p, random_state(rng, 6, 5));
    for (const auto& t : acts.conv) {
      for (double v : t.data) CHECK(v == 0.0);
    }
    for (double v : acts.output.data) CHECK(v == 0.0);
  }

  SUBCASE("single centre tap on a 3x3 grid") {
    NetworkConfig c = small_config(3, 3);
    auto p = init_params(c);
    std::fill(p.values.begin(), p.values.end(), 0.0);
    // Filter 0 reads GROUND at the centre tap with weight 2 and bias 0.5.
    p.values[p.conv_weight_index(0, 0, 1, 1, kGround)] = 2.0;
    p.values[p.conv_bias(0).offset] = 0.5;
    // Filter 1 sums EMPTY over the full window.
    for (int ky = 0; ky < 3; ++ky) {
      for (int kx = 0; kx < 3; ++kx) p.values[p.conv_weight_index(0, 1, ky, kx, kEmpty)] = 1.0;
    }
    TileGrid g(3, 3);
    g.set(0, 2, kGround);
    g.set(1, 2, kGround);
    g.set(2, 2, kGround);
    auto acts = forward(p, to_state_tensor(g));
    const auto& a = acts.conv[0];
    for (int y = 0; y < 3; ++y) {
      for (int x = 0; x < 3; ++x) {
        CHECK(a.at(x, y, 0) == (y == 2 ? 2.5 : 0.5));
      }
    }
    // EMPTY counts inside each zero-padded window.
    const double empties[3][3] = {{4, 6, 4}, {4, 6, 4}, {2, 3, 2}};
    for (int y = 0; y < 3; ++y) {
      for (int x = 0; x < 3; ++x) CHECK(a.at(x, y, 1) == empties[y][x]);
    }
  }

  SUBCASE("explicit loop oracle") {
    Rng rng(2);
    for (int k = 0; k < 3; ++k) {
      NetworkConfig c = small_config(7, 5);
      c.convs = {{{5, 4}, {3, 2}, {4, 3}}};
      c.seed = 100 + k;
      auto p = init_params(c);
      for (auto& v : p.values) v += 0.05 * uniform_real(rng, -1.0, 1.0);
      auto s = random_state(rng, 7, 5);
      auto acts = forward(p, s);
      auto ref = reference_forward(p, s);
      for (int l = 0; l < kConvLayers; ++l) {
        REQUIRE(acts.conv[l].data.size() == ref.conv[l].size());
        for (std::size_t i = 0; i < ref.conv[l].size(); ++i) {
          CHECK(acts.conv[l].data[i] == doctest::Approx(ref.conv[l][i]).epsilon(1e-12));
        }
      }
      CHECK(acts.output.width == 7);
      CHECK(acts.output.height == 5);
      CHECK(acts.output.channels == 32);
      for (std::size_t i = 0; i < ref.out.size(); ++i) {
        CHECK(acts.output.data[i] == doctest::Approx(ref.out[i]).epsilon(1e-12));
      }
    }
  }

  SUBCASE("shape mismatch") {
    auto p = init_params(small_config());
    CHECK_THROWS_AS(forward(p, Tensor3(5, 5, 34)), ShapeMismatch);
  }
}

TEST_CASE("mse") {
  Rng rng(4);
  Tensor3 a(3, 3, 32), b(3, 3, 32);
  for (auto& v : a.data) v = uniform_real(rng, -2, 2);
  CHECK(mse_loss(a, a) == 0.0);
  b = a;
  for (std::size_t i = 0; i < b.data.size(); ++i) b.data[i] += (i % 2 ? 1.0 : -1.0);
  CHECK(mse_loss(a, b) == doctest::Approx(1.0).epsilon(1e-15));
  for (auto& v : b.data) v = uniform_real(rng, -2, 2);
  // Two-pass oracle: differences first, then a pairwise sum.
  std::vector<double> sq;
  for (std::size_t i = 0; i < a.data.size(); ++i) sq.push_back((a.data[i] - b.data[i]) * (a.data[i] - b.data[i]));
  while (sq.size() > 1) {
    std::vector<double> next;
    for (std::size_t i = 0; i + 1 < sq.size(); i += 2) next.push_back(sq[i] + sq[i + 1]);
    if (sq.size() % 2) next.push_back(sq.back());
    sq = next;
  }
  CHECK(mse_loss(a, b) == doctest::Approx(sq[0] / a.data.size()).epsilon(1e-13));
  CHECK_THROWS_AS(mse_loss(a, Tensor3(3, 3, 31)), ShapeMismatch);
}

TEST_CASE("gradients match finite differences") {
  NetworkConfig c = small_config();
  auto p = init_params(c);
  Rng rng(8);
  auto s = random_state(rng, 6, 5);
  auto t = random_target(rng, 6, 5);
  std::vector<double> g;
  const double loss = backward(p, s, t, g);
  CHECK(loss == oracle::loss_at(p, s, t));
  REQUIRE(g.size() == p.values.size());

  int checked = 0;
  double worst = 0.0;
  for (const auto& seg : p.layout) {
    for (int k = 0; k < 10; ++k) {
      const std::size_t idx = seg.offset + uniform_below(rng, seg.size());
      auto fd = oracle::central_difference(p, idx, s, t, 1e-4);
      if (fd.kink) continue;
      worst = std::max(worst, oracle::relative_error(g[idx], fd.numeric));
      ++checked;
    }
  }
  CHECK(checked >= 60);
  CHECK(worst < 1e-5);
}

TEST_CASE("gradient scales linearly with the target offset") {
  // Output-bias gradients shift by -2*delta*slope/N.
  NetworkConfig c = small_config();
  auto p = init_params(c);
  Rng rng(10);
  auto s = random_state(rng, 6, 5);
  Tensor3 t0(6, 5, 32), t1(6, 5, 32, 0.25);
  std::vector<double> g0, g1;
  backward(p, s, t0, g0);
  backward(p, s, t1, g1);
  auto acts = forward(p, s);
  const auto& b = p.dense_bias();
  const double n = static_cast<double>(c.dense_outputs());
  for (std::size_t o = 0; o < b.size(); ++o) {
    const double slope = acts.output.data[o] > 0.0 ? 1.0 : c.leaky_slope;
    CHECK(g1[b.offset + o] - g0[b.offset + o] == doctest::Approx(-2.0 * 0.25 * slope / n).epsilon(1e-9));
  }
}

TEST_CASE("adam") {
  AdamConfig cfg;
  SUBCASE("scalar trace") {
    const std::vector<double> grads{0.5, -1.25, 3.0, 0.0, 1e-3, -7.5, 2.25, 0.125, -0.0625, 4.0};
    std::vector<double> param{0.3};
    auto mom = make_moments(1);
    auto expect = oracle::adam_scalar_trace(0.3, grads, cfg.lr, cfg.beta1, cfg.beta2, cfg.epsilon);
    for (std::size_t k = 0; k < grads.size(); ++k) {
      std::vector<double> g{grads[k]};
      adam_step(param, g, mom, static_cast<std::int64_t>(k + 1), cfg);
      CHECK(param[0] == expect[k]);
    }
  }
  SUBCASE("first step is about lr against the gradient") {
    std::vector<double> params{1.0, 1.0, 1.0, 1.0};
    std::vector<double> g{2.0, -0.5, 1e-2, -30.0};
    auto mom = make_moments(4);
    adam_step(params, g, mom, 1, cfg);
    for (std::size_t i = 0; i < 4; ++i) {
      const double step = params[i] - 1.0;
      CHECK(std::fabs(std::fabs(step) - cfg.lr) < 1e-6);
      CHECK((step < 0) == (g[i] > 0));
    }
  }
  SUBCASE("zero gradient leaves params unchanged") {
    std::vector<double> params{0.1, -0.2};
    std::vector<double> g{0.0, 0.0};
    auto mom = make_moments(2);
    for (int t = 1; t <= 50; ++t) adam_step(params, g, mom, t, cfg);
    CHECK(params == std::vector<double>{0.1, -0.2});
  }
}

TEST_CASE("memorizing one pair") {
  NetworkConfig c = small_config();
  c.adam.lr = 1e-3;
  auto p = init_params(c);
  Rng rng(12);
  auto s = random_state(rng, 6, 5);
  auto t = random_target(rng, 6, 5);
  auto mom = make_moments(p.values.size());
  std::vector<double> g;
  const double first = backward(p, s, t, g);
  adam_step(p.values, g, mom, 1, c.adam);
  for (int step = 2; step <= 200; ++step) {
    backward(p, s, t, g);
    adam_step(p.values, g, mom, step, c.adam);
  }
  CHECK(oracle::loss_at(p, s, t) < 0.01 * first);
}

TEST_CASE("training is bitwise deterministic") {
  auto run = [] {
    NetworkConfig c = small_config();
    auto p = init_params(c);
    Rng rng(13);
    auto mom = make_moments(p.values.size());
    std::vector<double> g;
    for (int step = 1; step <= 20; ++step) {
      auto s = random_state(rng, 6, 5);
      auto t = random_target(rng, 6, 5);
      backward(p, s, t, g);
      adam_step(p.values, g, mom, step, c.adam);
    }
    return p;
  };
  CHECK(run() == run());
}

TEST_CASE("model file") {
  Model m{init_params(small_config()), "abc123"};
  Rng rng(1);
  for (auto& v : m.params.values) v += uniform_real(rng, -1, 1) * 1e-3;
  const auto path = std::filesystem::temp_directory_path() / "mrin_test_model.bin";
  save_model(m, path);
  auto back = load_model(path);
  CHECK(back == m);
  CHECK(serialize_model(back) == serialize_model(m));

  auto bytes = serialize_model(m);
  auto bumped = bytes;
  bumped[8] = static_cast<char>(kModelFormatVersion + 1);
  CHECK_THROWS_AS(parse_model(bumped), VersionMismatch);
  CHECK_THROWS(parse_model(bytes.substr(0, bytes.size() / 2)));
  CHECK_THROWS(parse_model("nonsense"));
}

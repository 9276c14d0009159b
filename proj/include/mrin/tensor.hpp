#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace mrin {

/// Dense width x height x channels array of doubles, channel-fastest.
struct Tensor3 {
  int width = 0;
  int height = 0;
  int channels = 0;
  std::vector<double> data;

  Tensor3() = default;
  Tensor3(int w, int h, int c, double fill = 0.0)
      : width(w), height(h), channels(c),
        data(static_cast<std::size_t>(w) * h * c, fill) {}

  std::size_t index(int x, int y, int c) const {
    return (static_cast<std::size_t>(y) * width + x) * channels + c;
  }
  double& at(int x, int y, int c) { return data[index(x, y, c)]; }
  double at(int x, int y, int c) const { return data[index(x, y, c)]; }

  std::size_t size() const { return data.size(); }
  bool same_shape(const Tensor3& o) const {
    return width == o.width && height == o.height && channels == o.channels;
  }

  std::span<double> span() { return data; }
  std::span<const double> span() const { return data; }

  bool operator==(const Tensor3&) const = default;
};

}  // namespace mrin

#pragma once

#include <cstddef>
#include <vector>

#include <Eigen/Core>

namespace ogs {

/// Row-major, channel-interleaved image of doubles. Color images hold values in [0,1].
struct Image {
  int width = 0;
  int height = 0;
  int channels = 0;
  std::vector<double> data;

  Image() = default;
  Image(int w, int h, int c, double fill = 0.0)
      : width(w), height(h), channels(c), data(static_cast<std::size_t>(w) * h * c, fill) {}

  std::size_t pixel_count() const { return static_cast<std::size_t>(width) * height; }
  std::size_t index(int x, int y, int c = 0) const {
    return (static_cast<std::size_t>(y) * width + x) * channels + c;
  }
  double& at(int x, int y, int c = 0) { return data[index(x, y, c)]; }
  double at(int x, int y, int c = 0) const { return data[index(x, y, c)]; }

  Eigen::Vector3d rgb(std::size_t pixel) const {
    const double* p = &data[pixel * channels];
    return {p[0], p[1], p[2]};
  }

  bool same_shape(const Image& other) const {
    return width == other.width && height == other.height && channels == other.channels;
  }
};

}  // namespace ogs

#include <cmath>

#include "ogs/errors.hpp"
#include "ogs/rasterizer.hpp"

namespace ogs {

namespace {

void check_target(const RenderOutput& rendered, const Image& target) {
  if (!rendered.color.same_shape(target)) {
    throw InvalidArgument("photometric_loss: target dimensions differ from the rendered image");
  }
}

}  // namespace

double photometric_loss(const RenderOutput& rendered, const Image& target) {
  check_target(rendered, target);
  if (target.data.empty()) return 0.0;
  double sum = 0.0;
  for (std::size_t i = 0; i < target.data.size(); ++i) sum += std::abs(rendered.color.data[i] - target.data[i]);
  return sum / static_cast<double>(target.data.size());
}

PhotometricGrad photometric_loss_grad(const RenderOutput& rendered, const Image& target, double min_alpha) {
  check_target(rendered, target);
  PhotometricGrad out;
  out.dL_dcolor = Image(target.width, target.height, 3);
  const std::size_t n_pix = target.pixel_count();
  for (std::size_t p = 0; p < n_pix; ++p) {
    if (min_alpha > 0.0 && rendered.alpha.data[p] < min_alpha) continue;
    ++out.active_pixels;
  }
  if (out.active_pixels == 0) return out;
  const double norm = 1.0 / (3.0 * static_cast<double>(out.active_pixels));
  double sum = 0.0;
  for (std::size_t p = 0; p < n_pix; ++p) {
    if (min_alpha > 0.0 && rendered.alpha.data[p] < min_alpha) continue;
    for (int c = 0; c < 3; ++c) {
      const double r = rendered.color.data[p * 3 + c] - target.data[p * 3 + c];
      sum += std::abs(r);
      out.dL_dcolor.data[p * 3 + c] = r > 0.0 ? norm : (r < 0.0 ? -norm : 0.0);
    }
  }
  out.loss = sum * norm;
  return out;
}

}  // namespace ogs

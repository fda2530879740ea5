#include <algorithm>
#include <cmath>
#include <numeric>

#include "ogs/detail/parallel.hpp"
#include "ogs/rasterizer.hpp"

namespace ogs {

std::size_t RenderOutput::source_of(int x, int y, const BlendRecord& r) const {
  const int tile = (y / kTileSize) * tiles_x() + x / kTileSize;
  return splats[tile_splats[static_cast<std::size_t>(tile)][r.slot]].splat.source_idx;
}

namespace {

// What the blending loop reads per splat, packed contiguously.
struct RasterSplat {
  double mx, my, ca, cb, cc, opacity, depth;
  double q_max;  // Mahalanobis radius, squared, at which alpha falls to kAlphaMin
  Eigen::Vector3d color;
  int x0, x1, y0, y1;
};

struct TileResult {
  std::vector<BlendRecord> records;         // grouped by pixel, row-major
  std::vector<std::uint32_t> pixel_count;  // per pixel of the tile
};

}  // namespace

RenderOutput render(const GaussianMap& map, const Pose& T_cw, const CameraIntrinsics& K,
                    const RenderOptions& options) {
  K.validate();
  RenderOutput out;
  out.pose = T_cw;
  out.intrinsics = K;
  out.background = options.background;
  out.map_revision = map.revision();
  out.map_size = map.size();
  const int W = K.width, H = K.height;
  out.color = Image(W, H, 3);
  out.alpha = Image(W, H, 1);
  out.depth = Image(W, H, 1);
  out.transmittance = Image(W, H, 1, 1.0);

  // Project, then order front to back with index as the tie-break.
  std::vector<std::optional<ProjectedSplat>> projected(map.size());
  detail::parallel_for(map.size(), options.threads,
                       [&](std::size_t i) { projected[i] = project_splat(map[i], i, T_cw, K); });
  std::size_t n_visible = 0;
  for (const auto& p : projected) n_visible += p.has_value();
  out.splats.reserve(n_visible);
  for (auto& p : projected) {
    if (p) out.splats.push_back(std::move(*p));
  }
  std::vector<std::uint32_t> order(out.splats.size());
  std::iota(order.begin(), order.end(), 0u);
  std::sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) {
    const Splat2D& sa = out.splats[a].splat;
    const Splat2D& sb = out.splats[b].splat;
    if (sa.depth != sb.depth) return sa.depth < sb.depth;
    return sa.source_idx < sb.source_idx;
  });

  const int tx_count = out.tiles_x(), ty_count = out.tiles_y();
  out.tile_splats.assign(static_cast<std::size_t>(tx_count) * ty_count, {});
  for (std::uint32_t s : order) {
    const ProjectedSplat& p = out.splats[s];
    for (int ty = p.py_min / kTileSize; ty <= p.py_max / kTileSize; ++ty) {
      for (int tx = p.px_min / kTileSize; tx <= p.px_max / kTileSize; ++tx) {
        out.tile_splats[static_cast<std::size_t>(ty) * tx_count + tx].push_back(s);
      }
    }
  }

  std::vector<RasterSplat> packed(out.splats.size());
  for (std::size_t i = 0; i < packed.size(); ++i) {
    const ProjectedSplat& p = out.splats[i];
    packed[i] = {p.splat.mean2d.x(), p.splat.mean2d.y(), p.conic[0], p.conic[1], p.conic[2], p.opacity,
                 p.splat.depth, 2.0 * std::log(255.0 * p.opacity), p.color, p.px_min, p.px_max, p.py_min, p.py_max};
  }

  // Splats outermost so each one only visits the pixels of its box; every
  // pixel still sees its splats front to back, so results match a
  // pixel-outermost loop exactly.
  std::vector<TileResult> tiles(out.tile_splats.size());
  detail::parallel_for(tiles.size(), options.threads, [&](std::size_t t) {
    const int tx = static_cast<int>(t) % tx_count, ty = static_cast<int>(t) / tx_count;
    const int x0 = tx * kTileSize, y0 = ty * kTileSize;
    const int x1 = std::min(x0 + kTileSize, W), y1 = std::min(y0 + kTileSize, H);
    const int tw = x1 - x0;
    const std::size_t n_pix = static_cast<std::size_t>(tw) * (y1 - y0);
    const std::vector<std::uint32_t>& list = out.tile_splats[t];
    TileResult& res = tiles[t];
    res.pixel_count.assign(n_pix, 0);
    std::vector<BlendRecord> made;
    std::vector<std::uint16_t> made_pixel;
    std::vector<double> T(n_pix, 1.0), acc(n_pix, 0.0), dep(n_pix, 0.0);
    std::vector<Eigen::Vector3d> c(n_pix, Eigen::Vector3d::Zero());
    std::vector<int> row_live(static_cast<std::size_t>(y1 - y0), tw);  // pixels still accumulating
    made.reserve(n_pix * 64);
    made_pixel.reserve(n_pix * 64);
    std::size_t done = 0;
    for (std::uint32_t slot = 0; slot < list.size() && done < n_pix; ++slot) {
      const RasterSplat& p = packed[list[slot]];
      const int ya = std::max(p.y0, y0), yb = std::min(p.y1, y1 - 1);
      const int xa = std::max(p.x0, x0), xb = std::min(p.x1, x1 - 1);
      for (int y = ya; y <= yb; ++y) {
        if (row_live[static_cast<std::size_t>(y - y0)] == 0) continue;
        const double dy = y - p.my;
        // Row span of the ellipse a dx^2 + 2 b dx dy + c dy^2 <= q_max, widened
        // slightly so rounding never drops a pixel the test below would keep.
        const double disc = p.cb * p.cb * dy * dy - p.ca * (p.cc * dy * dy - p.q_max);
        if (disc < 0.0) continue;
        const double half = std::sqrt(disc) / p.ca, mid = p.mx - p.cb * dy / p.ca;
        const int xr0 = std::max(xa, static_cast<int>(std::ceil(mid - half - 1e-6)));
        const int xr1 = std::min(xb, static_cast<int>(std::floor(mid + half + 1e-6)));
        for (int x = xr0; x <= xr1; ++x) {
          const std::size_t local = static_cast<std::size_t>(y - y0) * tw + (x - x0);
          if (T[local] < kMinTransmittance) continue;
          const double dx = x - p.mx;
          const double power = -0.5 * (p.ca * dx * dx + p.cc * dy * dy) - p.cb * dx * dy;
          if (power > 0.0) continue;
          const double a = p.opacity * std::exp(power);
          if (a < kAlphaMin) continue;
          const double w = a * T[local];
          c[local] += w * p.color;
          dep[local] += w * p.depth;
          acc[local] += w;
          made.push_back({slot, a, T[local]});
          made_pixel.push_back(static_cast<std::uint16_t>(local));
          ++res.pixel_count[local];
          T[local] *= 1.0 - a;
          if (T[local] < kMinTransmittance) {
            ++done;
            --row_live[static_cast<std::size_t>(y - y0)];
          }
        }
      }
    }
    // Counting sort by pixel; creation order keeps each pixel front to back.
    std::vector<std::uint32_t> cursor(n_pix, 0);
    for (std::size_t i = 1; i < n_pix; ++i) cursor[i] = cursor[i - 1] + res.pixel_count[i - 1];
    res.records.resize(made.size());
    for (std::size_t i = 0; i < made.size(); ++i) res.records[cursor[made_pixel[i]]++] = made[i];

    std::size_t local = 0;
    for (int y = y0; y < y1; ++y) {
      for (int x = x0; x < x1; ++x, ++local) {
        const Eigen::Vector3d rgb = c[local] + T[local] * options.background;
        for (int ch = 0; ch < 3; ++ch) out.color.at(x, y, ch) = rgb[ch];
        out.alpha.at(x, y) = acc[local];
        out.depth.at(x, y) = dep[local];
        out.transmittance.at(x, y) = T[local];
      }
    }
  });

  // Stitch tile records together in fixed tile order, each pixel's run contiguous.
  const std::size_t n_pix = static_cast<std::size_t>(W) * H;
  out.record_begin.assign(n_pix, 0);
  out.record_count.assign(n_pix, 0);
  std::size_t total = 0;
  for (const TileResult& t : tiles) total += t.records.size();
  out.records.reserve(total);
  for (std::size_t t = 0; t < tiles.size(); ++t) {
    const int tx = static_cast<int>(t) % tx_count, ty = static_cast<int>(t) / tx_count;
    const int x0 = tx * kTileSize, y0 = ty * kTileSize;
    const int x1 = std::min(x0 + kTileSize, W), y1 = std::min(y0 + kTileSize, H);
    std::size_t local = 0;
    auto begin = static_cast<std::uint32_t>(out.records.size());
    for (int y = y0; y < y1; ++y) {
      for (int x = x0; x < x1; ++x, ++local) {
        const std::size_t pix = static_cast<std::size_t>(y) * W + x;
        out.record_begin[pix] = begin;
        out.record_count[pix] = tiles[t].pixel_count[local];
        begin += tiles[t].pixel_count[local];
      }
    }
    out.records.insert(out.records.end(), tiles[t].records.begin(), tiles[t].records.end());
  }
  return out;
}

}  // namespace ogs

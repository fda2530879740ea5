#include <limits>

#include "ogs/detail/binary_io.hpp"
#include "ogs/pointmap.hpp"

namespace ogs {

namespace {
constexpr std::uint32_t kPairVersion = 1;
}

void save_pair(const PointmapPair& pair, const std::filesystem::path& path) {
  const std::size_t n = pair.pixel_count();
  if (pair.X1.size() != n || pair.X2.size() != n || pair.conf1.size() != n || pair.conf2.size() != n) {
    throw InvalidArgument("save_pair: array sizes do not match width x height");
  }
  detail::ByteWriter w;
  w.bytes("OGPM", 4);
  w.u32(kPairVersion);
  w.u64(pair.frame_a);
  w.u64(pair.frame_b);
  w.u32(static_cast<std::uint32_t>(pair.width));
  w.u32(static_cast<std::uint32_t>(pair.height));
  auto points = [&](const std::vector<Eigen::Vector3f>& X) {
    for (const auto& p : X)
      for (int k = 0; k < 3; ++k) w.f32(p[k]);
  };
  auto scalars = [&](const std::vector<float>& c) {
    for (float v : c) w.f32(v);
  };
  points(pair.X1);
  scalars(pair.conf1);
  points(pair.X2);
  scalars(pair.conf2);
  detail::write_file(path.string(), w.buffer());
}

PointmapPair load_pair(const std::filesystem::path& path) {
  const std::vector<char> buf = detail::read_file(path.string());
  detail::ByteReader r(buf, "OGPM " + path.string());
  r.expect_magic("OGPM");
  const std::size_t version_offset = r.offset();
  if (const std::uint32_t v = r.u32(); v != kPairVersion) {
    throw FormatError("OGPM: unsupported version " + std::to_string(v), version_offset);
  }
  PointmapPair pair;
  pair.frame_a = r.u64();
  pair.frame_b = r.u64();
  pair.width = static_cast<int>(r.u32());
  pair.height = static_cast<int>(r.u32());
  const std::size_t n = pair.pixel_count();
  r.need(n * 8 * 4, "truncated payload");
  auto points = [&](std::vector<Eigen::Vector3f>& X) {
    X.resize(n);
    for (auto& p : X)
      for (int k = 0; k < 3; ++k) p[k] = r.f32();
  };
  auto scalars = [&](std::vector<float>& c) {
    c.resize(n);
    for (float& v : c) v = r.f32();
  };
  points(pair.X1);
  scalars(pair.conf1);
  points(pair.X2);
  scalars(pair.conf2);
  pair.valid1.resize(n);
  pair.valid2.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    pair.valid1[i] = pair.X1[i].allFinite() ? 1 : 0;
    pair.valid2[i] = pair.X2[i].allFinite() ? 1 : 0;
  }
  return pair;
}

}  // namespace ogs

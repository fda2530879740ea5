#include <fstream>
#include <iterator>

#include "ogs/detail/binary_io.hpp"
#include "ogs/scene.hpp"

namespace ogs {

namespace detail {

std::vector<char> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::string& path, const std::vector<char>& data) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path);
  out.write(data.data(), static_cast<std::streamsize>(data.size()));
  if (!out) throw Error("write failed for " + path);
}

}  // namespace detail

namespace {
constexpr std::uint32_t kMapVersion = 1;
constexpr std::size_t kFloatsPerGaussian = 14;
}  // namespace

void save_map(const GaussianMap& map, const std::filesystem::path& path) {
  detail::ByteWriter w;
  w.bytes("OGSM", 4);
  w.u32(kMapVersion);
  w.u32(static_cast<std::uint32_t>(map.size()));
  for (const Gaussian3D& g : map.gaussians()) {
    for (int i = 0; i < 3; ++i) w.f32(static_cast<float>(g.mean[i]));
    for (int i = 0; i < 4; ++i) w.f32(static_cast<float>(g.rot[i]));
    for (int i = 0; i < 3; ++i) w.f32(static_cast<float>(g.log_scale[i]));
    w.f32(static_cast<float>(g.opacity_logit));
    for (int i = 0; i < 3; ++i) w.f32(static_cast<float>(g.color[i]));
  }
  detail::write_file(path.string(), w.buffer());
}

GaussianMap load_map(const std::filesystem::path& path) {
  const std::vector<char> buf = detail::read_file(path.string());
  detail::ByteReader r(buf, "OGSM " + path.string());
  r.expect_magic("OGSM");
  const std::size_t version_offset = r.offset();
  if (const std::uint32_t v = r.u32(); v != kMapVersion) {
    throw FormatError("OGSM: unsupported version " + std::to_string(v), version_offset);
  }
  const std::uint32_t count = r.u32();
  r.need(static_cast<std::size_t>(count) * kFloatsPerGaussian * 4, "truncated payload");
  GaussianMap map;
  for (std::uint32_t k = 0; k < count; ++k) {
    Gaussian3D g;
    for (int i = 0; i < 3; ++i) g.mean[i] = r.f32();
    for (int i = 0; i < 4; ++i) g.rot[i] = r.f32();
    for (int i = 0; i < 3; ++i) g.log_scale[i] = r.f32();
    g.opacity_logit = r.f32();
    for (int i = 0; i < 3; ++i) g.color[i] = r.f32();
    map.add(g);
  }
  return map;
}

}  // namespace ogs

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "ogs/dataset.hpp"
#include "ogs/errors.hpp"

namespace ogs {

Image read_png(const std::filesystem::path& path) {
  png_image png{};
  png.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&png, path.string().c_str())) {
    throw InvalidArgument("cannot read PNG " + path.string() + ": " + png.message);
  }
  png.format = PNG_FORMAT_RGB;
  std::vector<std::uint8_t> buf(PNG_IMAGE_SIZE(png));
  if (!png_image_finish_read(&png, nullptr, buf.data(), 0, nullptr)) {
    const std::string msg = png.message;
    png_image_free(&png);
    throw InvalidArgument("cannot decode PNG " + path.string() + ": " + msg);
  }
  Image img(static_cast<int>(png.width), static_cast<int>(png.height), 3);
  for (std::size_t i = 0; i < buf.size(); ++i) img.data[i] = buf[i] / 255.0;
  return img;
}

void write_png(const std::filesystem::path& path, const Image& image) {
  if (image.channels != 3 && image.channels != 1) throw InvalidArgument("write_png: need 1 or 3 channels");
  png_image png{};
  png.version = PNG_IMAGE_VERSION;
  png.width = static_cast<png_uint_32>(image.width);
  png.height = static_cast<png_uint_32>(image.height);
  png.format = image.channels == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  std::vector<std::uint8_t> buf(image.data.size());
  for (std::size_t i = 0; i < buf.size(); ++i) {
    const double v = std::isfinite(image.data[i]) ? std::clamp(image.data[i], 0.0, 1.0) : 0.0;
    buf[i] = static_cast<std::uint8_t>(std::lround(v * 255.0));
  }
  if (!png_image_write_to_file(&png, path.string().c_str(), 0, buf.data(), 0, nullptr)) {
    throw InvalidArgument("cannot write PNG " + path.string() + ": " + png.message);
  }
}

}  // namespace ogs

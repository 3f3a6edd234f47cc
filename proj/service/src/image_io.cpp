#include "ganshift/service/image_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>

#include <png.h>

#include "ganshift/error.hpp"
#include "ganshift/image_ops.hpp"
#include "ganshift/service/latent_io.hpp"

namespace ganshift::service {
namespace fs = std::filesystem;

ImageTensor decode_png(const std::vector<unsigned char>& bytes) {
  png_image image;
  std::memset(&image, 0, sizeof image);
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&image, bytes.data(), bytes.size())) {
    throw IoError(std::string("invalid PNG: ") + image.message);
  }
  image.format = PNG_FORMAT_RGB;
  std::vector<unsigned char> raw(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, raw.data(), 0, nullptr)) {
    png_image_free(&image);
    throw IoError(std::string("PNG decode failed: ") + image.message);
  }
  std::vector<double> pixels(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) pixels[i] = raw[i] / 127.5 - 1.0;
  return ImageTensor(image.height, image.width, 3, std::move(pixels));
}

std::vector<unsigned char> encode_png(const ImageTensor& img) {
  if (img.channels() != 3) throw DimensionError("PNG output expects 3 channels");
  std::vector<unsigned char> raw(img.size());
  const auto px = img.pixels();
  for (std::size_t i = 0; i < raw.size(); ++i) {
    if (!std::isfinite(px[i])) throw NumericalError("cannot encode non-finite pixel as PNG");
    const double v = (std::clamp(px[i], -1.0, 1.0) + 1.0) * 127.5;
    raw[i] = static_cast<unsigned char>(std::lround(v));
  }
  png_image image;
  std::memset(&image, 0, sizeof image);
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(img.width());
  image.height = static_cast<png_uint_32>(img.height());
  image.format = PNG_FORMAT_RGB;
  png_alloc_size_t size = 0;
  if (!png_image_write_to_memory(&image, nullptr, &size, 0, raw.data(), 0, nullptr)) {
    throw IoError(std::string("PNG encode failed: ") + image.message);
  }
  std::vector<unsigned char> out(size);
  if (!png_image_write_to_memory(&image, out.data(), &size, 0, raw.data(), 0, nullptr)) {
    throw IoError(std::string("PNG encode failed: ") + image.message);
  }
  out.resize(size);
  return out;
}

ImageTensor read_png(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "'");
  const std::vector<unsigned char> bytes{std::istreambuf_iterator<char>(in),
                                         std::istreambuf_iterator<char>()};
  try {
    return decode_png(bytes);
  } catch (const IoError& e) {
    throw IoError("'" + path + "': " + e.what());
  }
}

void write_png(const std::string& path, const ImageTensor& img) {
  const std::vector<unsigned char> bytes = encode_png(img);
  const fs::path target(path);
  if (target.has_parent_path()) fs::create_directories(target.parent_path());
  const fs::path tmp = temp_sibling(target.string());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write '" + tmp.string() + "'");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) {
      out.close();
      fs::remove(tmp);
      throw IoError("short write to '" + tmp.string() + "'");
    }
  }
  fs::rename(tmp, target);
}

ImageTensor fit_image(const ImageTensor& img, std::size_t height, std::size_t width) {
  if (img.height() == height && img.width() == width) return img;
  return image_ops::resize_bilinear(img, height, width);
}

}  // namespace ganshift::service

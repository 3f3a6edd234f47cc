#include "ganshift/core.hpp"

#include <cmath>
#include <string>

#include "ganshift/error.hpp"

namespace ganshift {

WPlusCode::WPlusCode(std::size_t layer_count, std::size_t width, double fill)
    : layers_(layer_count), width_(width), data_(layer_count * width, fill) {}

WPlusCode::WPlusCode(std::size_t layer_count, std::size_t width, std::vector<double> data)
    : layers_(layer_count), width_(width), data_(std::move(data)) {
  if (data_.size() != layers_ * width_) {
    throw DimensionError("W+ code data has " + std::to_string(data_.size()) +
                         " values, expected " + std::to_string(layers_ * width_));
  }
}

std::span<double> WPlusCode::block(std::size_t i) {
  if (i >= layers_) throw DimensionError("W+ block index out of range");
  return std::span<double>(data_).subspan(i * width_, width_);
}

std::span<const double> WPlusCode::block(std::size_t i) const {
  if (i >= layers_) throw DimensionError("W+ block index out of range");
  return std::span<const double>(data_).subspan(i * width_, width_);
}

bool WPlusCode::all_finite() const { return ganshift::all_finite(data_); }

ImageTensor::ImageTensor(std::size_t height, std::size_t width, std::size_t channels,
                         double fill, ValueRange range)
    : height_(height),
      width_(width),
      channels_(channels),
      pixels_(height * width * channels, fill),
      range_(range) {}

ImageTensor::ImageTensor(std::size_t height, std::size_t width, std::size_t channels,
                         std::vector<double> pixels, ValueRange range)
    : height_(height),
      width_(width),
      channels_(channels),
      pixels_(std::move(pixels)),
      range_(range) {
  if (pixels_.size() != height_ * width_ * channels_) {
    throw DimensionError("image buffer size does not match its shape");
  }
}

bool ImageTensor::within_range(double tolerance) const {
  for (double v : pixels_) {
    if (!std::isfinite(v) || v < range_.lo - tolerance || v > range_.hi + tolerance) {
      return false;
    }
  }
  return true;
}

WPlusCode broadcast_w(const WCode& w, std::size_t layer_count, std::size_t expected_width) {
  if (layer_count < 1) throw DimensionError("broadcast_w needs at least one layer");
  if (expected_width != 0 && w.dim() != expected_width) {
    throw DimensionError("W code has width " + std::to_string(w.dim()) + ", backend declares " +
                         std::to_string(expected_width));
  }
  WPlusCode out(layer_count, w.dim());
  for (std::size_t i = 0; i < layer_count; ++i) {
    std::copy(w.values.begin(), w.values.end(), out.block(i).begin());
  }
  return out;
}

LatentPartition partition_latent(const WPlusCode& w, std::size_t m) {
  if (m > w.layer_count()) {
    throw ConfigError("partition boundary m=" + std::to_string(m) + " exceeds layer count " +
                      std::to_string(w.layer_count()));
  }
  LatentPartition parts;
  for (std::size_t i = 0; i < w.layer_count(); ++i) {
    auto b = w.block(i);
    (i < m ? parts.content : parts.style).emplace_back(b.begin(), b.end());
  }
  return parts;
}

WPlusCode concat_latent(const LatentPartition& parts) {
  const std::size_t layers = parts.content.size() + parts.style.size();
  if (layers == 0) return {};
  const std::size_t width =
      parts.content.empty() ? parts.style.front().size() : parts.content.front().size();
  std::vector<double> data;
  data.reserve(layers * width);
  for (const auto* group : {&parts.content, &parts.style}) {
    for (const auto& block : *group) {
      if (block.size() != width) throw DimensionError("ragged latent blocks");
      data.insert(data.end(), block.begin(), block.end());
    }
  }
  return WPlusCode(layers, width, std::move(data));
}

SemanticEmbedding operator-(const SemanticEmbedding& to, const SemanticEmbedding& from) {
  if (to.dim() != from.dim()) throw DimensionError("embedding widths differ");
  SemanticEmbedding out{std::vector<double>(to.dim())};
  for (std::size_t i = 0; i < to.dim(); ++i) out.values[i] = to.values[i] - from.values[i];
  return out;
}

double dot(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw DimensionError("dot product of unequal lengths");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double l2_norm(std::span<const double> a) { return std::sqrt(dot(a, a)); }

bool all_finite(std::span<const double> a) {
  for (double v : a) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

double mean_squared_error(const ImageTensor& a, const ImageTensor& b) {
  if (!a.same_shape(b)) throw DimensionError("image shapes differ");
  auto pa = a.pixels();
  auto pb = b.pixels();
  double s = 0.0;
  for (std::size_t i = 0; i < pa.size(); ++i) {
    const double d = pa[i] - pb[i];
    s += d * d;
  }
  return pa.empty() ? 0.0 : s / static_cast<double>(pa.size());
}

}  // namespace ganshift

#pragma once

#include <cstddef>
#include <span>
#include <utility>
#include <vector>

namespace ganshift {

// A single W-space code, as produced by a mapping network.
struct WCode {
  std::vector<double> values;

  std::size_t dim() const { return values.size(); }
  bool operator==(const WCode&) const = default;
};

// Layered W+ code: `layer_count` blocks of `width` elements, stored block-major.
class WPlusCode {
 public:
  WPlusCode() = default;
  WPlusCode(std::size_t layer_count, std::size_t width, double fill = 0.0);
  WPlusCode(std::size_t layer_count, std::size_t width, std::vector<double> data);

  std::size_t layer_count() const { return layers_; }
  std::size_t width() const { return width_; }
  std::size_t size() const { return data_.size(); }

  std::span<double> block(std::size_t i);
  std::span<const double> block(std::size_t i) const;

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }

  bool same_shape(const WPlusCode& other) const {
    return layers_ == other.layers_ && width_ == other.width_;
  }
  bool all_finite() const;

  bool operator==(const WPlusCode&) const = default;

 private:
  std::size_t layers_ = 0;
  std::size_t width_ = 0;
  std::vector<double> data_;
};

struct ValueRange {
  double lo = -1.0;
  double hi = 1.0;
  bool operator==(const ValueRange&) const = default;
};

// Image stored row-major, channel-interleaved (H x W x C).
class ImageTensor {
 public:
  ImageTensor() = default;
  ImageTensor(std::size_t height, std::size_t width, std::size_t channels,
              double fill = 0.0, ValueRange range = {});
  ImageTensor(std::size_t height, std::size_t width, std::size_t channels,
              std::vector<double> pixels, ValueRange range = {});

  std::size_t height() const { return height_; }
  std::size_t width() const { return width_; }
  std::size_t channels() const { return channels_; }
  std::size_t size() const { return pixels_.size(); }
  ValueRange range() const { return range_; }

  double& at(std::size_t y, std::size_t x, std::size_t c) {
    return pixels_[(y * width_ + x) * channels_ + c];
  }
  double at(std::size_t y, std::size_t x, std::size_t c) const {
    return pixels_[(y * width_ + x) * channels_ + c];
  }

  std::span<double> pixels() { return pixels_; }
  std::span<const double> pixels() const { return pixels_; }

  bool same_shape(const ImageTensor& other) const {
    return height_ == other.height_ && width_ == other.width_ &&
           channels_ == other.channels_;
  }
  // Every value inside the declared range, within `tolerance`.
  bool within_range(double tolerance = 1e-6) const;

  bool operator==(const ImageTensor&) const = default;

 private:
  std::size_t height_ = 0;
  std::size_t width_ = 0;
  std::size_t channels_ = 0;
  std::vector<double> pixels_;
  ValueRange range_;
};

struct SemanticEmbedding {
  std::vector<double> values;

  std::size_t dim() const { return values.size(); }
  bool operator==(const SemanticEmbedding&) const = default;
};

// Repeats `w` into every block. Throws DimensionError when `expected_width`
// is nonzero and differs from w's dimension.
WPlusCode broadcast_w(const WCode& w, std::size_t layer_count,
                      std::size_t expected_width = 0);

struct LatentPartition {
  std::vector<std::vector<double>> content;
  std::vector<std::vector<double>> style;
};

// content = blocks [0, m), style = blocks [m, L).
LatentPartition partition_latent(const WPlusCode& w, std::size_t m);

// Inverse of partition_latent.
WPlusCode concat_latent(const LatentPartition& parts);

// Elementwise embedding difference `to - from`.
SemanticEmbedding operator-(const SemanticEmbedding& to, const SemanticEmbedding& from);

double dot(std::span<const double> a, std::span<const double> b);
double l2_norm(std::span<const double> a);
bool all_finite(std::span<const double> a);

// Mean squared difference between two same-shaped images.
double mean_squared_error(const ImageTensor& a, const ImageTensor& b);

}  // namespace ganshift

namespace ganshift {

// Precomputed artifacts of the one-shot setup.
struct ReferenceBundle {
  ImageTensor image_b;         // I_B
  WPlusCode w_ref;             // inversion of I_B in domain A
  ImageTensor image_a;         // G_A(w_ref)
  SemanticEmbedding v_ref;     // embed_b - embed_anchor
  SemanticEmbedding embed_b;   // E(I_B)
  // Domain-A anchor of the gap vector: E(I_A), or the mean embedding of
  // sampled domain-A images under the domain-mean ablation.
  SemanticEmbedding embed_anchor;
};

}  // namespace ganshift

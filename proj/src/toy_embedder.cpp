#include <cmath>
#include <random>

#include "ganshift/error.hpp"
#include "ganshift/toy_backends.hpp"

namespace ganshift {
using Eigen::Index;
using Eigen::VectorXd;

ToyEmbedder::ToyEmbedder(std::uint64_t seed, std::size_t height, std::size_t width,
                         std::size_t channels)
    : height_(height), width_(width), channels_(channels) {
  if (height % kPatch != 0 || width % kPatch != 0) {
    throw DimensionError("toy embedder input must be a multiple of the patch size");
  }
  const std::size_t features = (height / kPatch) * (width / kPatch) * channels;
  std::seed_seq seq{seed, std::uint64_t{0xe3bed}};
  std::mt19937_64 rng(seq);
  std::normal_distribution<double> weight(0.0, 1.5 / std::sqrt(static_cast<double>(features)));
  std::normal_distribution<double> offset(0.0, 0.1);
  projection_.resize(static_cast<Index>(kWidth), static_cast<Index>(features));
  for (Index i = 0; i < projection_.size(); ++i) projection_.data()[i] = weight(rng);
  bias_.resize(static_cast<Index>(kWidth));
  for (Index i = 0; i < bias_.size(); ++i) bias_(i) = offset(rng);
}

// Patch means ordered (py, px, c).
VectorXd ToyEmbedder::pooled_features(const ImageTensor& img) const {
  const std::size_t pw = width_ / kPatch;
  VectorXd f = VectorXd::Zero(static_cast<Index>((height_ / kPatch) * pw * channels_));
  const double inv = 1.0 / static_cast<double>(kPatch * kPatch);
  for (std::size_t y = 0; y < height_; ++y) {
    for (std::size_t x = 0; x < width_; ++x) {
      const std::size_t base = ((y / kPatch) * pw + x / kPatch) * channels_;
      for (std::size_t c = 0; c < channels_; ++c) {
        f(static_cast<Index>(base + c)) += inv * img.at(y, x, c);
      }
    }
  }
  return f;
}

SemanticEmbedding ToyEmbedder::do_embed(const ImageTensor& img) const {
  const VectorXd e = (projection_ * pooled_features(img) + bias_).array().tanh().matrix();
  return SemanticEmbedding{std::vector<double>(e.data(), e.data() + e.size())};
}

ImageTensor ToyEmbedder::do_embed_vjp(const ImageTensor& img,
                                      std::span<const double> embedding_grad) const {
  const VectorXd e = (projection_ * pooled_features(img) + bias_).array().tanh().matrix();
  const Eigen::Map<const VectorXd> g(embedding_grad.data(), static_cast<Index>(kWidth));
  const VectorXd d_pre = (g.array() * (1.0 - e.array().square())).matrix();
  const VectorXd d_feat = projection_.transpose() * d_pre;

  const std::size_t pw = width_ / kPatch;
  const double inv = 1.0 / static_cast<double>(kPatch * kPatch);
  ImageTensor out(height_, width_, channels_);
  for (std::size_t y = 0; y < height_; ++y) {
    for (std::size_t x = 0; x < width_; ++x) {
      const std::size_t base = ((y / kPatch) * pw + x / kPatch) * channels_;
      for (std::size_t c = 0; c < channels_; ++c) {
        out.at(y, x, c) = inv * d_feat(static_cast<Index>(base + c));
      }
    }
  }
  return out;
}

}  // namespace ganshift

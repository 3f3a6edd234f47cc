#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ganshift/backends.hpp"

namespace ganshift {

// Desk-scale style-based generator.
//
// Mapping: z (8) -> act(W0 z + b0) -> W1 h + b1 = w (8). The first bias is
// zero-initialized so map_latent(0) equals the second bias.
//
// Synthesis: a learned 2x2 constant is carried through 12 blocks, three per
// resolution (2, 4, 8, 16). Each block computes
//   X <- act(K diag(A w_l + a) X + n (x) N_l + b 1^T)
// where N_l is a fixed seeded spatial basis. Moving to a finer resolution
// applies nearest upsampling followed by a [1 2 1] blur. A 1x1 output-color
// projection at the end of each resolution feeds a skip accumulator whose
// tanh is the 16x16x3 image.
class ToyGeneratorBackend final : public GeneratorBackend {
 public:
  static constexpr std::size_t kZDim = 8;
  static constexpr std::size_t kLatentWidth = 8;
  static constexpr std::size_t kFeatures = 8;
  static constexpr std::size_t kBlocksPerResolution = 3;
  static constexpr std::size_t kResolutions = 4;
  static constexpr std::size_t kLayerCount = kBlocksPerResolution * kResolutions;
  static constexpr std::size_t kBaseResolution = 2;
  static constexpr std::size_t kImageSize = 16;
  static constexpr std::size_t kChannels = 3;

  explicit ToyGeneratorBackend(std::uint64_t seed);

  std::string name() const override { return "toy"; }
  std::uint64_t seed() const override { return seed_; }
  GeneratorShape shape() const override;
  GeneratorParams initial_params() const override;

  static std::size_t resolution_of_block(std::size_t block);

 protected:
  WCode do_map_latent(const GeneratorParams& params, std::span<const double> z) const override;
  ImageTensor do_generate(const GeneratorParams& params, const WPlusCode& w) const override;
  GeneratorGradient do_backward(const GeneratorParams& params, const WPlusCode& w,
                                const ImageTensor& image_grad,
                                GradientRequest request) const override;

 private:
  struct Forward;
  Forward run_forward(const GeneratorParams& params, const WPlusCode& w) const;

  std::uint64_t seed_;
  std::vector<Eigen::RowVectorXd> spatial_basis_;  // one per block
};

// Stand-in semantic embedder: 4x4 patch mean pooling, a fixed seeded linear
// map, then tanh. Width 32.
class ToyEmbedder final : public EmbedderBackend {
 public:
  static constexpr std::size_t kWidth = 32;
  static constexpr std::size_t kPatch = 4;

  ToyEmbedder(std::uint64_t seed, std::size_t height = 16, std::size_t width = 16,
              std::size_t channels = 3);

  std::string name() const override { return "toy"; }
  std::size_t width() const override { return kWidth; }
  std::size_t input_height() const override { return height_; }
  std::size_t input_width() const override { return width_; }
  std::size_t input_channels() const override { return channels_; }

 protected:
  SemanticEmbedding do_embed(const ImageTensor& img) const override;
  ImageTensor do_embed_vjp(const ImageTensor& img,
                           std::span<const double> embedding_grad) const override;

 private:
  Eigen::VectorXd pooled_features(const ImageTensor& img) const;

  std::size_t height_;
  std::size_t width_;
  std::size_t channels_;
  Eigen::MatrixXd projection_;
  Eigen::VectorXd bias_;
};

// Mean squared difference of blurred multi-scale pyramids, averaged over
// `levels` levels (full resolution, then repeated 2x average pooling).
class ToyPerceptualMetric final : public PerceptualMetric {
 public:
  explicit ToyPerceptualMetric(std::size_t levels = 4) : levels_(levels) {}

  std::string name() const override { return "toy"; }
  double distance(const ImageTensor& a, const ImageTensor& b) const override;
  MetricGradient gradient(const ImageTensor& a, const ImageTensor& b) const override;

 private:
  std::size_t levels_;
};

BackendSet make_toy_backends(std::uint64_t seed);

}  // namespace ganshift

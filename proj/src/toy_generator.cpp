#include <cmath>
#include <random>
#include <string>

#include "ganshift/error.hpp"
#include "ganshift/image_ops.hpp"
#include "ganshift/toy_backends.hpp"

namespace ganshift {
namespace {

using Eigen::Index;
using Eigen::Map;
using Eigen::MatrixXd;
using Eigen::RowVectorXd;
using Eigen::VectorXd;

using Toy = ToyGeneratorBackend;

constexpr std::size_t kMappingLeaves = 4;
constexpr std::size_t kConstLeaf = kMappingLeaves;
constexpr std::size_t kFirstBlockLeaf = kConstLeaf + 1;
constexpr std::size_t kLeavesPerBlock = 5;
constexpr std::size_t kFirstColorLeaf = kFirstBlockLeaf + kLeavesPerBlock * Toy::kLayerCount;
constexpr std::size_t kLeafCount = kFirstColorLeaf + 2 * Toy::kResolutions;

enum BlockLeaf : std::size_t { kAffineW, kAffineB, kConvW, kNoise, kBias };

// Smooth leaky activation: 0.2 x + 0.8 (softplus(x) - ln 2); act(0) = 0.
double act(double x) {
  const double sp = x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
  return 0.2 * x + 0.8 * (sp - std::log(2.0));
}

double act_grad(double x) { return 0.2 + 0.8 / (1.0 + std::exp(-x)); }

MatrixXd apply_act(const MatrixXd& z) { return z.unaryExpr([](double v) { return act(v); }); }

Map<const MatrixXd> view(const ParamLeaf& leaf) {
  return Map<const MatrixXd>(leaf.values.data(), static_cast<Index>(leaf.rows),
                             static_cast<Index>(leaf.cols));
}

Map<MatrixXd> view(ParamLeaf& leaf) {
  return Map<MatrixXd>(leaf.values.data(), static_cast<Index>(leaf.rows),
                       static_cast<Index>(leaf.cols));
}

std::size_t block_leaf(std::size_t block, BlockLeaf which) {
  return kFirstBlockLeaf + block * kLeavesPerBlock + which;
}

std::size_t color_leaf(std::size_t res_index, bool bias) {
  return kFirstColorLeaf + 2 * res_index + (bias ? 1 : 0);
}

bool is_first_of_resolution(std::size_t block) {
  return block % Toy::kBlocksPerResolution == 0;
}

bool is_last_of_resolution(std::size_t block) {
  return block % Toy::kBlocksPerResolution == Toy::kBlocksPerResolution - 1;
}

std::size_t resolution_index(std::size_t block) { return block / Toy::kBlocksPerResolution; }

void check_params(const GeneratorParams& params) {
  if (params.leaf_count() != kLeafCount) {
    throw DimensionError("toy generator expects " + std::to_string(kLeafCount) +
                         " parameter leaves, got " + std::to_string(params.leaf_count()));
  }
}

ParamLeaf gaussian_leaf(std::string name, ParamGroup group, std::size_t rows, std::size_t cols,
                        double stddev, std::mt19937_64& rng, double mean = 0.0) {
  ParamLeaf leaf{std::move(name), group, rows, cols, std::vector<double>(rows * cols)};
  std::normal_distribution<double> normal(mean, stddev);
  for (auto& v : leaf.values) v = stddev > 0 ? normal(rng) : mean;
  return leaf;
}

}  // namespace

struct ToyGeneratorBackend::Forward {
  std::vector<MatrixXd> block_in;
  std::vector<VectorXd> style;
  std::vector<MatrixXd> pre;
  std::vector<MatrixXd> block_out;
  MatrixXd acc;  // C x P, before tanh
};

ToyGeneratorBackend::ToyGeneratorBackend(std::uint64_t seed) : seed_(seed) {
  std::seed_seq seq{seed, std::uint64_t{0x5eed}, std::uint64_t{1}};
  std::mt19937_64 rng(seq);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (std::size_t l = 0; l < kLayerCount; ++l) {
    const std::size_t r = resolution_of_block(l);
    MatrixXd basis(1, static_cast<Index>(r * r));
    for (Index i = 0; i < basis.cols(); ++i) basis(0, i) = normal(rng);
    spatial_basis_.push_back(image_ops::blur(basis, r).row(0));
  }
}

std::size_t ToyGeneratorBackend::resolution_of_block(std::size_t block) {
  return kBaseResolution << resolution_index(block);
}

GeneratorShape ToyGeneratorBackend::shape() const {
  return {kZDim, kLatentWidth, kLayerCount, kImageSize, kImageSize, kChannels};
}

GeneratorParams ToyGeneratorBackend::initial_params() const {
  std::seed_seq seq{seed_, std::uint64_t{0x5eed}, std::uint64_t{2}};
  std::mt19937_64 rng(seq);
  const double d = static_cast<double>(kLatentWidth);
  const double f = static_cast<double>(kFeatures);

  GeneratorParams p;
  p.add(gaussian_leaf("mapping.fc0.weight", ParamGroup::kMapping, kLatentWidth, kZDim,
                      1.0 / std::sqrt(static_cast<double>(kZDim)), rng));
  p.add(gaussian_leaf("mapping.fc0.bias", ParamGroup::kMapping, kLatentWidth, 1, 0.0, rng));
  p.add(gaussian_leaf("mapping.fc1.weight", ParamGroup::kMapping, kLatentWidth, kLatentWidth,
                      1.0 / std::sqrt(d), rng));
  p.add(gaussian_leaf("mapping.fc1.bias", ParamGroup::kMapping, kLatentWidth, 1, 0.5, rng));

  p.add(gaussian_leaf("synthesis.const", ParamGroup::kSynthesis, kFeatures,
                      kBaseResolution * kBaseResolution, 1.0, rng));
  for (std::size_t l = 0; l < kLayerCount; ++l) {
    const std::string prefix = "synthesis.b" + std::to_string(l) + ".";
    p.add(gaussian_leaf(prefix + "affine.weight", ParamGroup::kSynthesis, kFeatures,
                        kLatentWidth, 0.6 / std::sqrt(d), rng));
    p.add(gaussian_leaf(prefix + "affine.bias", ParamGroup::kSynthesis, kFeatures, 1, 0.0, rng,
                        1.0));
    p.add(gaussian_leaf(prefix + "conv.weight", ParamGroup::kSynthesis, kFeatures, kFeatures,
                        1.4 / std::sqrt(f), rng));
    p.add(gaussian_leaf(prefix + "noise_strength", ParamGroup::kSynthesis, kFeatures, 1, 0.3,
                        rng));
    p.add(gaussian_leaf(prefix + "bias", ParamGroup::kSynthesis, kFeatures, 1, 0.0, rng));
  }
  for (std::size_t ri = 0; ri < kResolutions; ++ri) {
    const std::string prefix = "output_color.r" + std::to_string(kBaseResolution << ri) + ".";
    p.add(gaussian_leaf(prefix + "weight", ParamGroup::kOutputColor, kChannels, kFeatures,
                        0.7 / std::sqrt(f), rng));
    p.add(gaussian_leaf(prefix + "bias", ParamGroup::kOutputColor, kChannels, 1, 0.0, rng));
  }
  return p;
}

WCode ToyGeneratorBackend::do_map_latent(const GeneratorParams& params,
                                         std::span<const double> z) const {
  check_params(params);
  const auto leaves = params.leaves();
  const Map<const VectorXd> zv(z.data(), static_cast<Index>(z.size()));
  const VectorXd hidden = (view(leaves[0]) * zv + view(leaves[1])).unaryExpr(
      [](double v) { return act(v); });
  const VectorXd w = view(leaves[2]) * hidden + view(leaves[3]);
  return WCode{std::vector<double>(w.data(), w.data() + w.size())};
}

ToyGeneratorBackend::Forward ToyGeneratorBackend::run_forward(const GeneratorParams& params,
                                                              const WPlusCode& w) const {
  check_params(params);
  const auto leaves = params.leaves();
  Forward fw;
  MatrixXd x = view(leaves[kConstLeaf]);
  std::size_t r = kBaseResolution;
  for (std::size_t l = 0; l < kLayerCount; ++l) {
    if (l > 0 && is_first_of_resolution(l)) {
      x = image_ops::blur(image_ops::upsample2(x, r), 2 * r);
      r *= 2;
    }
    const Map<const VectorXd> wl(w.block(l).data(), static_cast<Index>(kLatentWidth));
    VectorXd s = view(leaves[block_leaf(l, kAffineW)]) * wl +
                 VectorXd(view(leaves[block_leaf(l, kAffineB)]));
    MatrixXd z = view(leaves[block_leaf(l, kConvW)]) * (s.asDiagonal() * x);
    z += VectorXd(view(leaves[block_leaf(l, kNoise)])) * spatial_basis_[l];
    z.colwise() += VectorXd(view(leaves[block_leaf(l, kBias)]));

    fw.block_in.push_back(std::move(x));
    fw.style.push_back(std::move(s));
    x = apply_act(z);
    fw.pre.push_back(std::move(z));
    fw.block_out.push_back(x);

    if (is_last_of_resolution(l)) {
      const std::size_t ri = resolution_index(l);
      MatrixXd rgb = view(leaves[color_leaf(ri, false)]) * x;
      rgb.colwise() += VectorXd(view(leaves[color_leaf(ri, true)]));
      if (ri == 0) {
        fw.acc = std::move(rgb);
      } else {
        fw.acc = image_ops::blur(image_ops::upsample2(fw.acc, r / 2), r) + rgb;
      }
    }
  }
  return fw;
}

ImageTensor ToyGeneratorBackend::do_generate(const GeneratorParams& params,
                                             const WPlusCode& w) const {
  const Forward fw = run_forward(params, w);
  return image_ops::from_planes(fw.acc.array().tanh().matrix(), kImageSize, kImageSize);
}

GeneratorGradient ToyGeneratorBackend::do_backward(const GeneratorParams& params,
                                                   const WPlusCode& w,
                                                   const ImageTensor& image_grad,
                                                   GradientRequest request) const {
  const Forward fw = run_forward(params, w);
  const auto leaves = params.leaves();

  GeneratorGradient out;
  if (request.params) out.params = params.zeros_like();
  if (request.latent) out.latent = WPlusCode(kLayerCount, kLatentWidth);

  // Skip-accumulator gradients per resolution, finest first.
  const MatrixXd t = fw.acc.array().tanh().matrix();
  MatrixXd d_acc =
      (image_ops::to_planes(image_grad).array() * (1.0 - t.array().square())).matrix();
  std::vector<MatrixXd> d_rgb(kResolutions);
  for (std::size_t ri = kResolutions; ri-- > 0;) {
    const std::size_t r = kBaseResolution << ri;
    d_rgb[ri] = d_acc;
    if (ri > 0) {
      d_acc = image_ops::upsample2_adjoint(image_ops::blur_adjoint(d_acc, r), r / 2);
    }
  }

  MatrixXd dx = MatrixXd::Zero(static_cast<Index>(kFeatures),
                               static_cast<Index>(kImageSize * kImageSize));
  for (std::size_t l = kLayerCount; l-- > 0;) {
    const std::size_t r = resolution_of_block(l);
    if (is_last_of_resolution(l)) {
      const std::size_t ri = resolution_index(l);
      dx += view(leaves[color_leaf(ri, false)]).transpose() * d_rgb[ri];
      if (request.params) {
        auto params_out = out.params.leaves();
        view(params_out[color_leaf(ri, false)]) += d_rgb[ri] * fw.block_out[l].transpose();
        view(params_out[color_leaf(ri, true)]) += d_rgb[ri].rowwise().sum();
      }
    }

    const MatrixXd dz = (dx.array() * fw.pre[l].unaryExpr([](double v) {
                                        return act_grad(v);
                                      }).array())
                            .matrix();
    const MatrixXd& x_in = fw.block_in[l];
    const VectorXd& s = fw.style[l];
    const auto conv = view(leaves[block_leaf(l, kConvW)]);
    const auto affine = view(leaves[block_leaf(l, kAffineW)]);

    const MatrixXd dm = conv.transpose() * dz;
    const VectorXd ds = (dm.array() * x_in.array()).rowwise().sum();
    const MatrixXd dx_in = s.asDiagonal() * dm;
    const Map<const VectorXd> wl(w.block(l).data(), static_cast<Index>(kLatentWidth));

    if (request.params) {
      auto params_out = out.params.leaves();
      view(params_out[block_leaf(l, kConvW)]) += dz * (s.asDiagonal() * x_in).transpose();
      view(params_out[block_leaf(l, kAffineW)]) += ds * wl.transpose();
      view(params_out[block_leaf(l, kAffineB)]) += ds;
      view(params_out[block_leaf(l, kNoise)]) += dz * spatial_basis_[l].transpose();
      view(params_out[block_leaf(l, kBias)]) += dz.rowwise().sum();
    }
    if (request.latent) {
      const VectorXd dw = affine.transpose() * ds;
      auto blk = out.latent.block(l);
      for (std::size_t k = 0; k < kLatentWidth; ++k) blk[k] = dw(static_cast<Index>(k));
    }

    if (l == 0) {
      if (request.params) view(out.params.leaves()[kConstLeaf]) += dx_in;
    } else if (is_first_of_resolution(l)) {
      dx = image_ops::upsample2_adjoint(image_ops::blur_adjoint(dx_in, r), r / 2);
    } else {
      dx = dx_in;
    }
  }
  return out;
}

}  // namespace ganshift

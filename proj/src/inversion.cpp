#include "ganshift/inversion.hpp"

#include <cmath>
#include <random>
#include <string>

#include <Eigen/Eigenvalues>

#include "ganshift/adam.hpp"
#include "ganshift/error.hpp"
#include "ganshift/log.hpp"

namespace ganshift {
namespace {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

void check_stats(const WPlusCode& w, const LatentPriorStats& stats) {
  if (w.width() != stats.dim()) {
    throw DimensionError("latent width " + std::to_string(w.width()) +
                         " does not match prior dimension " + std::to_string(stats.dim()));
  }
}

VectorXd block_deviation(const WPlusCode& w, std::size_t block, const LatentPriorStats& stats) {
  const auto b = w.block(block);
  return Eigen::Map<const VectorXd>(b.data(), static_cast<Index>(b.size())) - stats.mean;
}

}  // namespace

LatentPriorStats estimate_latent_prior(const Generator& generator, std::size_t n_samples,
                                       std::uint64_t seed) {
  if (n_samples < kMinPriorSamples) {
    throw ConfigError("latent prior needs at least " + std::to_string(kMinPriorSamples) +
                      " samples, got " + std::to_string(n_samples));
  }
  const auto shape = generator.shape();
  const Index d = static_cast<Index>(shape.latent_width);

  std::seed_seq seq{seed, std::uint64_t{0x9210}};
  std::mt19937_64 rng(seq);
  std::normal_distribution<double> normal(0.0, 1.0);
  MatrixXd samples(d, static_cast<Index>(n_samples));
  std::vector<double> z(shape.z_dim);
  for (std::size_t i = 0; i < n_samples; ++i) {
    for (double& v : z) v = normal(rng);
    const WCode w = generator.map_latent(z);
    for (Index k = 0; k < d; ++k) samples(k, static_cast<Index>(i)) = w.values[k];
  }

  LatentPriorStats stats;
  stats.sample_count = n_samples;
  stats.mean = samples.rowwise().mean();
  const MatrixXd centered = samples.colwise() - stats.mean;
  MatrixXd cov = centered * centered.transpose() / static_cast<double>(n_samples - 1);

  Eigen::SelfAdjointEigenSolver<MatrixXd> eig(cov);
  const double max_eig = std::max(eig.eigenvalues().maxCoeff(), 0.0);
  const double min_eig = eig.eigenvalues().minCoeff();
  const double floor = 1e-9 * std::max(max_eig, 1e-12);
  if (!(min_eig > floor)) {
    stats.jitter = std::max(1e-6 * max_eig, 1e-9);
    cov += stats.jitter * MatrixXd::Identity(d, d);
    eig.compute(cov);
    log_warning("latent covariance is rank-deficient (min eigenvalue " + std::to_string(min_eig) +
                "); added diagonal jitter " + std::to_string(stats.jitter));
  }
  const VectorXd inv_sqrt = eig.eigenvalues().array().rsqrt();
  stats.whitening = eig.eigenvectors() * inv_sqrt.asDiagonal() * eig.eigenvectors().transpose();
  stats.whitening = 0.5 * (stats.whitening + stats.whitening.transpose()).eval();
  return stats;
}

double latent_prior_penalty(const WPlusCode& w, const LatentPriorStats& stats) {
  check_stats(w, stats);
  if (w.layer_count() == 0) return 0.0;
  double total = 0.0;
  for (std::size_t l = 0; l < w.layer_count(); ++l) {
    total += (stats.whitening * block_deviation(w, l, stats)).squaredNorm();
  }
  return total / static_cast<double>(w.layer_count());
}

WPlusCode latent_prior_penalty_gradient(const WPlusCode& w, const LatentPriorStats& stats) {
  check_stats(w, stats);
  WPlusCode grad(w.layer_count(), w.width());
  const MatrixXd precision = stats.whitening * stats.whitening;
  const double scale = 2.0 / static_cast<double>(w.layer_count());
  for (std::size_t l = 0; l < w.layer_count(); ++l) {
    const VectorXd g = scale * (precision * block_deviation(w, l, stats));
    std::copy(g.data(), g.data() + g.size(), grad.block(l).begin());
  }
  return grad;
}

InversionObjective inversion_objective(const ImageTensor& target, const Generator& generator,
                                       const PerceptualMetric& metric,
                                       const LatentPriorStats& stats, double lambda,
                                       const WPlusCode& w) {
  const ImageTensor img = generator.generate(w);
  InversionObjective out;
  out.reconstruction = metric.distance(target, img) + mean_squared_error(target, img);
  out.penalty = latent_prior_penalty(w, stats);
  out.value = out.reconstruction + lambda * out.penalty;

  ImageTensor d_img = metric.gradient(target, img).b;
  const double scale = 2.0 / static_cast<double>(img.size());
  auto dp = d_img.pixels();
  auto tp = target.pixels();
  auto ip = img.pixels();
  for (std::size_t i = 0; i < dp.size(); ++i) dp[i] += scale * (ip[i] - tp[i]);

  out.gradient = generator.backend->backward(generator.params, w, d_img, {false, true}).latent;
  const WPlusCode prior_grad = latent_prior_penalty_gradient(w, stats);
  auto g = out.gradient.data();
  auto pg = prior_grad.data();
  for (std::size_t i = 0; i < g.size(); ++i) g[i] += lambda * pg[i];
  return out;
}

InversionResult invert(const ImageTensor& img, const Generator& generator,
                       const PerceptualMetric& metric, const InversionOptions& options) {
  generator.backend->check_image(img);
  if (!(options.lambda > 0.0) || !std::isfinite(options.lambda)) {
    throw ConfigError("inversion lambda must be positive");
  }
  if (options.steps < 1) throw ConfigError("inversion needs at least one step");

  const LatentPriorStats stats =
      options.prior ? *options.prior
                    : estimate_latent_prior(generator, options.prior_samples, options.seed);
  const auto shape = generator.shape();

  InversionResult result;
  if (options.init) {
    generator.backend->check_latent(*options.init);
    result.initial = *options.init;
  } else {
    WCode mean{std::vector<double>(stats.mean.data(), stats.mean.data() + stats.mean.size())};
    result.initial = broadcast_w(mean, shape.layer_count, shape.latent_width);
  }
  WPlusCode w = result.initial;

  Adam adam({options.learning_rate, options.beta1, options.beta2, options.epsilon}, 1);
  result.objective_history.reserve(options.steps + 1);
  for (std::size_t step = 0; step <= options.steps; ++step) {
    const InversionObjective obj =
        inversion_objective(img, generator, metric, stats, options.lambda, w);
    if (!std::isfinite(obj.value) || !obj.gradient.all_finite()) {
      throw NumericalError("inversion objective became non-finite at step " +
                           std::to_string(step));
    }
    result.objective_history.push_back(obj.value);
    if (step == options.steps) {
      result.final_penalty = obj.penalty;
      result.final_reconstruction = obj.reconstruction;
      break;
    }
    adam.begin_step();
    adam.update(0, w.data(), obj.gradient.data());
  }
  result.latent = std::move(w);
  return result;
}

}  // namespace ganshift

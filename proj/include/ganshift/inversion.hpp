#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "ganshift/backends.hpp"
#include "ganshift/core.hpp"

namespace ganshift {

// Gaussian statistics of mapping-network outputs: the prior an inverted code
// is pulled towards.
struct LatentPriorStats {
  Eigen::VectorXd mean;
  Eigen::MatrixXd whitening;  // symmetric (Sigma + jitter I)^(-1/2)
  std::size_t sample_count = 0;
  double jitter = 0.0;        // diagonal regularization applied, 0 if none

  std::size_t dim() const { return static_cast<std::size_t>(mean.size()); }
};

inline constexpr std::size_t kMinPriorSamples = 1000;
inline constexpr std::size_t kDefaultPriorSamples = 4096;

// Draws n_samples z ~ N(0, I), maps them and estimates mean and whitening.
// A rank-deficient covariance is regularized with diagonal jitter and a
// warning is logged.
LatentPriorStats estimate_latent_prior(const Generator& generator, std::size_t n_samples,
                                       std::uint64_t seed);

// Mean over blocks of the squared whitened deviation from the prior mean.
double latent_prior_penalty(const WPlusCode& w, const LatentPriorStats& stats);
// Gradient of latent_prior_penalty with respect to w.
WPlusCode latent_prior_penalty_gradient(const WPlusCode& w, const LatentPriorStats& stats);

struct InversionOptions {
  double lambda = 1e-2;
  std::size_t steps = 400;
  double learning_rate = 1e-2;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  // Seeds the prior estimate when `prior` is not supplied.
  std::uint64_t seed = 0;
  std::size_t prior_samples = kDefaultPriorSamples;
  std::optional<LatentPriorStats> prior;
  // Starting code; defaults to the broadcast prior mean.
  std::optional<WPlusCode> init;
};

struct InversionObjective {
  double value = 0.0;
  double reconstruction = 0.0;  // metric + pixel MSE
  double penalty = 0.0;         // unweighted prior penalty
  WPlusCode gradient;
};

// metric(target, G(w)) + MSE(target, G(w)) + lambda * penalty(w), with its
// gradient in w.
InversionObjective inversion_objective(const ImageTensor& target, const Generator& generator,
                                       const PerceptualMetric& metric,
                                       const LatentPriorStats& stats, double lambda,
                                       const WPlusCode& w);

struct InversionResult {
  WPlusCode latent;
  WPlusCode initial;
  // Objective at the iterate before each update, plus the final value; steps + 1 entries.
  std::vector<double> objective_history;
  double final_penalty = 0.0;
  double final_reconstruction = 0.0;
};

// Regularized W+ inversion with adaptive-moment descent over all blocks.
// Throws NumericalError naming the step when the objective goes non-finite.
InversionResult invert(const ImageTensor& img, const Generator& generator,
                       const PerceptualMetric& metric, const InversionOptions& options);

}  // namespace ganshift

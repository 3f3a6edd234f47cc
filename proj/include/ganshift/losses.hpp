#pragma once

#include <span>
#include <vector>

#include "ganshift/backends.hpp"
#include "ganshift/config.hpp"
#include "ganshift/core.hpp"

namespace ganshift {

// Norms below this make cosine_sim return 0.
inline constexpr double kCosineZeroNorm = 1e-8;

double cosine_sim(std::span<const double> a, std::span<const double> b);

struct CosineGradient {
  double value = 0.0;
  std::vector<double> d_a;
  std::vector<double> d_b;
};

// Cosine similarity with its partial derivatives. Under the zero guard both
// derivatives are zero.
CosineGradient cosine_sim_gradient(std::span<const double> a, std::span<const double> b);

// embed(to) - embed(from).
SemanticEmbedding directional_gap(const EmbedderBackend& embedder, const ImageTensor& from,
                                  const ImageTensor& to);

// 1 - sim(v_ref, v_samp).
double loss_clip_across(const SemanticEmbedding& v_ref, const SemanticEmbedding& v_samp);
// 1 - sim(E(I_B), E(G_B(w_ref))).
double loss_ref_clip(const SemanticEmbedding& embed_b, const SemanticEmbedding& embed_recon);
// metric(I_B, recon) + mean squared pixel difference.
double loss_ref_rec(const ImageTensor& img_b, const ImageTensor& img_recon,
                    const PerceptualMetric& metric);
// 1 - sim(v_A, v_B).
double loss_clip_within(const SemanticEmbedding& v_a, const SemanticEmbedding& v_b);

struct LossParts {
  double clip_across = 0.0;
  double clip_within = 0.0;
  double ref_clip = 0.0;
  double ref_rec = 0.0;
};

// Effective multipliers of the three weighted terms; a disabled term is 0.
struct LossWeights {
  double clip_within = 0.0;
  double ref_clip = 0.0;
  double ref_rec = 0.0;

  static LossWeights from_config(const AdaptConfig& config);
  bool operator==(const LossWeights&) const = default;
};

struct LossBreakdown {
  double clip_across = 0.0;
  double clip_within = 0.0;
  double ref_clip = 0.0;
  double ref_rec = 0.0;
  double total = 0.0;
  LossWeights weights;

  // total recomputed from parts and the weight snapshot.
  double recompute_total() const;
};

// Weighted sum. Throws NumericalError naming the first non-finite part.
LossBreakdown total_loss(const LossParts& parts, const AdaptConfig& config);

}  // namespace ganshift

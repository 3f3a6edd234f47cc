#include "ganshift/losses.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "ganshift/error.hpp"

namespace ganshift {

double cosine_sim(std::span<const double> a, std::span<const double> b) {
  const double na = l2_norm(a);
  const double nb = l2_norm(b);
  if (na < kCosineZeroNorm || nb < kCosineZeroNorm) return 0.0;
  const double c = dot(a, b) / (na * nb);
  return std::clamp(c, -1.0, 1.0);
}

CosineGradient cosine_sim_gradient(std::span<const double> a, std::span<const double> b) {
  CosineGradient out{0.0, std::vector<double>(a.size(), 0.0), std::vector<double>(b.size(), 0.0)};
  const double na = l2_norm(a);
  const double nb = l2_norm(b);
  if (na < kCosineZeroNorm || nb < kCosineZeroNorm) return out;
  const double inv = 1.0 / (na * nb);
  const double c = dot(a, b) * inv;
  out.value = std::clamp(c, -1.0, 1.0);
  for (std::size_t i = 0; i < a.size(); ++i) {
    out.d_a[i] = b[i] * inv - c * a[i] / (na * na);
    out.d_b[i] = a[i] * inv - c * b[i] / (nb * nb);
  }
  return out;
}

SemanticEmbedding directional_gap(const EmbedderBackend& embedder, const ImageTensor& from,
                                  const ImageTensor& to) {
  return embedder.embed(to) - embedder.embed(from);
}

double loss_clip_across(const SemanticEmbedding& v_ref, const SemanticEmbedding& v_samp) {
  return 1.0 - cosine_sim(v_ref.values, v_samp.values);
}

double loss_ref_clip(const SemanticEmbedding& embed_b, const SemanticEmbedding& embed_recon) {
  return 1.0 - cosine_sim(embed_b.values, embed_recon.values);
}

double loss_ref_rec(const ImageTensor& img_b, const ImageTensor& img_recon,
                    const PerceptualMetric& metric) {
  return metric.distance(img_b, img_recon) + mean_squared_error(img_b, img_recon);
}

double loss_clip_within(const SemanticEmbedding& v_a, const SemanticEmbedding& v_b) {
  return 1.0 - cosine_sim(v_a.values, v_b.values);
}

LossWeights LossWeights::from_config(const AdaptConfig& config) {
  return {config.enable_clip_within ? config.lambda_clip_within : 0.0,
          config.enable_ref_clip ? config.lambda_ref_clip : 0.0,
          config.enable_ref_rec ? config.lambda_ref_rec : 0.0};
}

double LossBreakdown::recompute_total() const {
  return clip_across + weights.clip_within * clip_within + weights.ref_clip * ref_clip +
         weights.ref_rec * ref_rec;
}

LossBreakdown total_loss(const LossParts& parts, const AdaptConfig& config) {
  const std::pair<const char*, double> named[] = {{"clip_across", parts.clip_across},
                                                  {"clip_within", parts.clip_within},
                                                  {"ref_clip", parts.ref_clip},
                                                  {"ref_rec", parts.ref_rec}};
  for (const auto& [name, value] : named) {
    if (!std::isfinite(value)) {
      throw NumericalError(std::string("non-finite loss term ") + name + " = " +
                           std::to_string(value));
    }
  }
  LossBreakdown out;
  out.clip_across = parts.clip_across;
  out.clip_within = parts.clip_within;
  out.ref_clip = parts.ref_clip;
  out.ref_rec = parts.ref_rec;
  out.weights = LossWeights::from_config(config);
  out.total = out.recompute_total();
  return out;
}

}  // namespace ganshift

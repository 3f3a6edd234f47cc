#include "ganshift/objective.hpp"

#include <cmath>

#include "ganshift/error.hpp"

namespace ganshift {
namespace {

bool degenerate(std::span<const double> a, std::span<const double> b) {
  return l2_norm(a) < kCosineZeroNorm || l2_norm(b) < kCosineZeroNorm;
}

}  // namespace

TermWeights TermWeights::from_config(const AdaptConfig& config) {
  const LossWeights w = LossWeights::from_config(config);
  return {1.0, w.clip_within, w.ref_clip, w.ref_rec};
}

double TermWeights::combine(const LossParts& parts) const {
  return clip_across * parts.clip_across + clip_within * parts.clip_within +
         ref_clip * parts.ref_clip + ref_rec * parts.ref_rec;
}

AdaptationObjective::AdaptationObjective(const Generator& g_a, const EmbedderBackend& embedder,
                                         const PerceptualMetric& metric,
                                         const ReferenceBundle& bundle)
    : g_a_(g_a), embedder_(embedder), metric_(metric), bundle_(bundle) {}

FrozenBatch AdaptationObjective::freeze_batch(std::vector<WPlusCode> codes) const {
  FrozenBatch batch;
  batch.embed_a.reserve(codes.size());
  for (const auto& w : codes) batch.embed_a.push_back(embedder_.embed(g_a_.generate(w)));
  batch.codes = std::move(codes);
  return batch;
}

LossParts AdaptationObjective::evaluate(const GeneratorParams& g_b,
                                        const FrozenBatch& batch) const {
  if (batch.codes.empty()) throw ConfigError("objective needs a non-empty batch");
  const double inv_batch = 1.0 / static_cast<double>(batch.codes.size());
  LossParts parts;
  for (std::size_t i = 0; i < batch.codes.size(); ++i) {
    const SemanticEmbedding e_b = embedder_.embed(g_a_.backend->generate(g_b, batch.codes[i]));
    const SemanticEmbedding v_samp = e_b - batch.embed_a[i];
    const SemanticEmbedding v_a = batch.embed_a[i] - bundle_.embed_anchor;
    const SemanticEmbedding v_b = e_b - bundle_.embed_b;
    parts.clip_across += inv_batch * loss_clip_across(bundle_.v_ref, v_samp);
    parts.clip_within += inv_batch * loss_clip_within(v_a, v_b);
  }
  const ImageTensor recon = g_a_.backend->generate(g_b, bundle_.w_ref);
  parts.ref_clip = loss_ref_clip(bundle_.embed_b, embedder_.embed(recon));
  parts.ref_rec = loss_ref_rec(bundle_.image_b, recon, metric_);
  return parts;
}

ObjectiveEvaluation AdaptationObjective::evaluate_with_gradient(const GeneratorParams& g_b,
                                                                const FrozenBatch& batch,
                                                                const TermWeights& weights) const {
  if (batch.codes.empty()) throw ConfigError("objective needs a non-empty batch");
  const auto& backend = *g_a_.backend;
  const double inv_batch = 1.0 / static_cast<double>(batch.codes.size());

  ObjectiveEvaluation out;
  out.gradient = g_b.zeros_like();
  const bool want_directional = weights.clip_across != 0.0 || weights.clip_within != 0.0;

  for (std::size_t i = 0; i < batch.codes.size(); ++i) {
    const WPlusCode& w = batch.codes[i];
    const ImageTensor img_b = backend.generate(g_b, w);
    const SemanticEmbedding e_b = embedder_.embed(img_b);
    const SemanticEmbedding v_samp = e_b - batch.embed_a[i];
    const SemanticEmbedding v_a = batch.embed_a[i] - bundle_.embed_anchor;
    const SemanticEmbedding v_b = e_b - bundle_.embed_b;

    const CosineGradient across = cosine_sim_gradient(bundle_.v_ref.values, v_samp.values);
    const CosineGradient within = cosine_sim_gradient(v_a.values, v_b.values);
    out.parts.clip_across += inv_batch * (1.0 - across.value);
    out.parts.clip_within += inv_batch * (1.0 - within.value);
    if (degenerate(bundle_.v_ref.values, v_samp.values) ||
        degenerate(v_a.values, v_b.values)) {
      ++out.degenerate_samples;
    }
    if (!want_directional) continue;

    // v_samp and v_b both move with E(G_B(w)) one-for-one.
    std::vector<double> d_embed(e_b.dim());
    for (std::size_t k = 0; k < d_embed.size(); ++k) {
      d_embed[k] = -inv_batch * (weights.clip_across * across.d_b[k] +
                                 weights.clip_within * within.d_b[k]);
    }
    const ImageTensor d_img = embedder_.embed_vjp(img_b, d_embed);
    out.gradient.axpy(1.0, backend.backward(g_b, w, d_img, {true, false}).params);
  }

  const ImageTensor recon = backend.generate(g_b, bundle_.w_ref);
  const SemanticEmbedding e_rec = embedder_.embed(recon);
  const CosineGradient ref_cos = cosine_sim_gradient(bundle_.embed_b.values, e_rec.values);
  out.parts.ref_clip = 1.0 - ref_cos.value;
  out.parts.ref_rec = loss_ref_rec(bundle_.image_b, recon, metric_);

  if (weights.ref_clip != 0.0 || weights.ref_rec != 0.0) {
    ImageTensor d_recon(recon.height(), recon.width(), recon.channels());
    if (weights.ref_clip != 0.0) {
      std::vector<double> d_embed(e_rec.dim());
      for (std::size_t k = 0; k < d_embed.size(); ++k) {
        d_embed[k] = -weights.ref_clip * ref_cos.d_b[k];
      }
      d_recon = embedder_.embed_vjp(recon, d_embed);
    }
    if (weights.ref_rec != 0.0) {
      const ImageTensor d_metric = metric_.gradient(bundle_.image_b, recon).b;
      const double mse_scale = 2.0 / static_cast<double>(recon.size());
      auto dr = d_recon.pixels();
      auto dm = d_metric.pixels();
      auto rp = recon.pixels();
      auto bp = bundle_.image_b.pixels();
      for (std::size_t k = 0; k < dr.size(); ++k) {
        dr[k] += weights.ref_rec * (dm[k] + mse_scale * (rp[k] - bp[k]));
      }
    }
    out.gradient.axpy(1.0, backend.backward(g_b, bundle_.w_ref, d_recon, {true, false}).params);
  }

  out.value = weights.combine(out.parts);
  return out;
}

}  // namespace ganshift

#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "ganshift/backends.hpp"
#include "ganshift/config.hpp"
#include "ganshift/core.hpp"
#include "ganshift/losses.hpp"

namespace ganshift {

// Multipliers applied when differentiating the composite objective. The
// trainer uses from_config(); gradient checks isolate single terms.
struct TermWeights {
  double clip_across = 1.0;
  double clip_within = 0.0;
  double ref_clip = 0.0;
  double ref_rec = 0.0;

  static TermWeights from_config(const AdaptConfig& config);
  static TermWeights only_clip_across() { return {1.0, 0.0, 0.0, 0.0}; }
  static TermWeights only_clip_within() { return {0.0, 1.0, 0.0, 0.0}; }
  static TermWeights only_ref_clip() { return {0.0, 0.0, 1.0, 0.0}; }
  static TermWeights only_ref_rec() { return {0.0, 0.0, 0.0, 1.0}; }

  double combine(const LossParts& parts) const;
};

// Per-step quantities derived from G_A on a batch; G_A never takes part in
// differentiation.
struct FrozenBatch {
  std::vector<WPlusCode> codes;
  std::vector<SemanticEmbedding> embed_a;  // E(G_A(w)) per code
};

struct ObjectiveEvaluation {
  LossParts parts;   // batch-averaged directional terms, reference terms
  double value = 0.0;
  GeneratorParams gradient;
  std::size_t degenerate_samples = 0;  // samples where a cosine hit the zero guard
};

// The composite adaptation objective as a function of G_B's parameters.
class AdaptationObjective {
 public:
  AdaptationObjective(const Generator& g_a, const EmbedderBackend& embedder,
                      const PerceptualMetric& metric, const ReferenceBundle& bundle);

  FrozenBatch freeze_batch(std::vector<WPlusCode> codes) const;

  LossParts evaluate(const GeneratorParams& g_b, const FrozenBatch& batch) const;

  ObjectiveEvaluation evaluate_with_gradient(const GeneratorParams& g_b,
                                             const FrozenBatch& batch,
                                             const TermWeights& weights) const;

 private:
  const Generator& g_a_;
  const EmbedderBackend& embedder_;
  const PerceptualMetric& metric_;
  const ReferenceBundle& bundle_;
};

}  // namespace ganshift

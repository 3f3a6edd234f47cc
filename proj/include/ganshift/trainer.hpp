#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "ganshift/adam.hpp"
#include "ganshift/backends.hpp"
#include "ganshift/config.hpp"
#include "ganshift/core.hpp"
#include "ganshift/inversion.hpp"
#include "ganshift/losses.hpp"

namespace ganshift {

// Minimum gap-vector norm before the domains count as indistinguishable.
inline constexpr double kMinGapNorm = 1e-6;

// Inverts I_B into domain A and forms the gap vector. Throws DomainGapError
// when the gap vector vanishes.
ReferenceBundle prepare_reference(const ImageTensor& img_b, const Generator& g_a,
                                  const EmbedderBackend& embedder,
                                  const PerceptualMetric& metric, const AdaptConfig& config,
                                  const std::optional<LatentPriorStats>& prior = std::nullopt);

// Builds the bundle around an already inverted reference code. Throws
// DomainGapError when the gap vector vanishes.
ReferenceBundle assemble_reference(const ImageTensor& img_b, const WPlusCode& w_ref,
                                   const Generator& g_a, const EmbedderBackend& embedder,
                                   const AdaptConfig& config);

// Mean embedding of `count` seeded domain-A samples.
SemanticEmbedding domain_mean_embedding(const Generator& g_a, const EmbedderBackend& embedder,
                                        std::size_t count, std::uint64_t seed);

// Recomputable checks: image_a = G_A(w_ref) and, for the inverted anchor,
// v_ref = E(image_b) - E(image_a). Tolerance is absolute per element.
bool verify_reference_bundle(const ReferenceBundle& bundle, const Generator& g_a,
                             const EmbedderBackend& embedder, AnchorMode mode,
                             double tolerance = 1e-12);

// Broadcast W codes from z ~ N(0, I) drawn from `rng`.
std::vector<WPlusCode> sample_codes(const Generator& generator, std::mt19937_64& rng,
                                    std::size_t count);
std::vector<WPlusCode> sample_codes(const Generator& generator, std::uint64_t seed,
                                    std::size_t count);

struct TrainState {
  std::int64_t step = 0;
  GeneratorParams g_b;
  Adam optimizer;
  std::string rng_state;  // serialized std::mt19937_64
  std::vector<LossBreakdown> history;
};

TrainState initial_train_state(const Generator& g_a, const AdaptConfig& config);

struct AdaptHooks {
  std::function<void(const TrainState&)> on_step;
  // Called every `checkpoint_every` steps, once after the last step and once
  // when a run is stopped early.
  std::function<void(const TrainState&)> on_checkpoint;
  std::int64_t checkpoint_every = 100;
  // Polled before each step; returning true ends the run early.
  std::function<bool()> should_stop;
};

struct AdaptResult {
  GeneratorParams g_b;
  std::vector<LossBreakdown> history;
  bool completed = false;
};

// Refinement learning of G_B from a clone of G_A. Only synthesis leaves are
// updated. Throws NumericalError with the step index and breakdown on a
// non-finite loss. Pass `resume` to continue from a captured state.
AdaptResult adapt(const Generator& g_a, const EmbedderBackend& embedder,
                  const PerceptualMetric& metric, const ReferenceBundle& bundle,
                  const AdaptConfig& config, const AdaptHooks& hooks = {},
                  std::optional<TrainState> resume = std::nullopt);

struct HeldOutReport {
  double mean_cos_samp_ref = 0.0;  // mean sim(v_samp, v_ref)
  double mean_cos_within = 0.0;    // mean sim(v_A, v_B)
};

HeldOutReport evaluate_held_out(const Generator& g_a, const GeneratorParams& g_b,
                                const EmbedderBackend& embedder,
                                const ReferenceBundle& bundle,
                                const std::vector<WPlusCode>& codes);

}  // namespace ganshift

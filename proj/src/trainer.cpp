#include "ganshift/trainer.hpp"

#include <cmath>
#include <sstream>
#include <string>

#include "ganshift/error.hpp"
#include "ganshift/log.hpp"
#include "ganshift/objective.hpp"

namespace ganshift {
namespace {

std::string serialize_rng(const std::mt19937_64& rng) {
  std::ostringstream out;
  out << rng;
  return out.str();
}

std::mt19937_64 restore_rng(const std::string& text) {
  std::mt19937_64 rng;
  std::istringstream in(text);
  in >> rng;
  if (!in) throw ConfigError("corrupt RNG state in train state");
  return rng;
}

std::string describe(const LossParts& p) {
  std::ostringstream out;
  out << "clip_across=" << p.clip_across << " clip_within=" << p.clip_within
      << " ref_clip=" << p.ref_clip << " ref_rec=" << p.ref_rec;
  return out.str();
}

}  // namespace

std::vector<WPlusCode> sample_codes(const Generator& generator, std::mt19937_64& rng,
                                    std::size_t count) {
  const auto shape = generator.shape();
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<WPlusCode> codes;
  codes.reserve(count);
  std::vector<double> z(shape.z_dim);
  for (std::size_t i = 0; i < count; ++i) {
    for (double& v : z) v = normal(rng);
    codes.push_back(broadcast_w(generator.map_latent(z), shape.layer_count, shape.latent_width));
  }
  return codes;
}

std::vector<WPlusCode> sample_codes(const Generator& generator, std::uint64_t seed,
                                    std::size_t count) {
  std::seed_seq seq{seed, std::uint64_t{0xc0de}};
  std::mt19937_64 rng(seq);
  return sample_codes(generator, rng, count);
}

SemanticEmbedding domain_mean_embedding(const Generator& g_a, const EmbedderBackend& embedder,
                                        std::size_t count, std::uint64_t seed) {
  if (count == 0) throw ConfigError("domain mean needs at least one sample");
  std::seed_seq seq{seed, std::uint64_t{0xa7c4}};
  std::mt19937_64 rng(seq);
  SemanticEmbedding mean{std::vector<double>(embedder.width(), 0.0)};
  for (const auto& w : sample_codes(g_a, rng, count)) {
    const SemanticEmbedding e = embedder.embed(g_a.generate(w));
    for (std::size_t k = 0; k < e.dim(); ++k) mean.values[k] += e.values[k];
  }
  for (double& v : mean.values) v /= static_cast<double>(count);
  return mean;
}

ReferenceBundle assemble_reference(const ImageTensor& img_b, const WPlusCode& w_ref,
                                   const Generator& g_a, const EmbedderBackend& embedder,
                                   const AdaptConfig& config) {
  g_a.backend->check_image(img_b);
  g_a.backend->check_latent(w_ref);

  ReferenceBundle bundle;
  bundle.image_b = img_b;
  bundle.w_ref = w_ref;
  bundle.image_a = g_a.generate(bundle.w_ref);
  bundle.embed_b = embedder.embed(img_b);
  bundle.embed_anchor =
      config.anchor_mode == AnchorMode::kInverted
          ? embedder.embed(bundle.image_a)
          : domain_mean_embedding(g_a, embedder, static_cast<std::size_t>(config.anchor_samples),
                                  config.seed);
  bundle.v_ref = bundle.embed_b - bundle.embed_anchor;

  const double gap = l2_norm(bundle.v_ref.values);
  if (gap < kMinGapNorm) {
    throw DomainGapError("domains indistinguishable: gap vector norm " + std::to_string(gap) +
                         " is below " + std::to_string(kMinGapNorm) +
                         "; check that the reference image lies outside the base domain");
  }
  return bundle;
}

ReferenceBundle prepare_reference(const ImageTensor& img_b, const Generator& g_a,
                                  const EmbedderBackend& embedder,
                                  const PerceptualMetric& metric, const AdaptConfig& config,
                                  const std::optional<LatentPriorStats>& prior) {
  g_a.backend->check_image(img_b);
  config.validate(g_a.shape().layer_count);

  InversionOptions inv;
  inv.lambda = config.inversion_lambda;
  inv.steps = static_cast<std::size_t>(config.inversion_steps);
  inv.seed = config.seed;
  inv.prior = prior;
  return assemble_reference(img_b, invert(img_b, g_a, metric, inv).latent, g_a, embedder, config);
}

bool verify_reference_bundle(const ReferenceBundle& bundle, const Generator& g_a,
                             const EmbedderBackend& embedder, AnchorMode mode,
                             double tolerance) {
  const ImageTensor regenerated = g_a.generate(bundle.w_ref);
  if (!regenerated.same_shape(bundle.image_a)) return false;
  for (std::size_t i = 0; i < regenerated.size(); ++i) {
    if (std::abs(regenerated.pixels()[i] - bundle.image_a.pixels()[i]) > tolerance) return false;
  }
  if (mode != AnchorMode::kInverted) return true;
  const SemanticEmbedding expected = embedder.embed(bundle.image_b) - embedder.embed(bundle.image_a);
  if (expected.dim() != bundle.v_ref.dim()) return false;
  for (std::size_t k = 0; k < expected.dim(); ++k) {
    if (std::abs(expected.values[k] - bundle.v_ref.values[k]) > tolerance) return false;
  }
  return true;
}

TrainState initial_train_state(const Generator& g_a, const AdaptConfig& config) {
  TrainState state;
  state.g_b = g_a.params;
  state.optimizer =
      Adam({config.learning_rate, config.beta1, config.beta2, 1e-8}, g_a.params.leaf_count());
  std::seed_seq seq{config.seed, std::uint64_t{0x7a11}};
  state.rng_state = serialize_rng(std::mt19937_64(seq));
  return state;
}

AdaptResult adapt(const Generator& g_a, const EmbedderBackend& embedder,
                  const PerceptualMetric& metric, const ReferenceBundle& bundle,
                  const AdaptConfig& config, const AdaptHooks& hooks,
                  std::optional<TrainState> resume) {
  config.validate(g_a.shape().layer_count);
  TrainState state = resume ? std::move(*resume) : initial_train_state(g_a, config);
  if (!state.g_b.same_structure(g_a.params)) {
    throw DimensionError("resumed G_B parameters do not match the base generator");
  }
  if (state.step > config.iterations) {
    throw ConfigError("resumed step " + std::to_string(state.step) + " exceeds iterations");
  }
  const TrainableMask mask = trainable_mask(state.g_b);
  std::mt19937_64 rng = restore_rng(state.rng_state);

  const AdaptationObjective objective(g_a, embedder, metric, bundle);
  const TermWeights weights = TermWeights::from_config(config);
  const auto batch_size = static_cast<std::size_t>(config.batch_size);
  std::int64_t last_checkpoint = -1;

  AdaptResult result;
  while (state.step < config.iterations) {
    if (hooks.should_stop && hooks.should_stop()) {
      if (hooks.on_checkpoint && last_checkpoint != state.step) hooks.on_checkpoint(state);
      result.g_b = state.g_b;
      result.history = state.history;
      return result;
    }
    const FrozenBatch batch = objective.freeze_batch(sample_codes(g_a, rng, batch_size));
    ObjectiveEvaluation eval = objective.evaluate_with_gradient(state.g_b, batch, weights);

    const std::int64_t step = state.step + 1;
    LossBreakdown breakdown;
    try {
      breakdown = total_loss(eval.parts, config);
    } catch (const NumericalError& e) {
      throw NumericalError("step " + std::to_string(step) + ": " + e.what() + " (" +
                           describe(eval.parts) + ")");
    }
    for (const auto& leaf : eval.gradient.leaves()) {
      if (!all_finite(leaf.values)) {
        throw NumericalError("step " + std::to_string(step) + ": non-finite gradient in '" +
                             leaf.name + "' (" + describe(eval.parts) + ")");
      }
    }
    if (eval.degenerate_samples > 0) {
      log(LogLevel::kDebug, "step " + std::to_string(step) + ": " +
                                std::to_string(eval.degenerate_samples) +
                                " degenerate sample(s) hit the cosine zero guard");
    }

    state.optimizer.begin_step();
    auto leaves = state.g_b.leaves();
    const auto grads = eval.gradient.leaves();
    for (std::size_t i = 0; i < leaves.size(); ++i) {
      if (mask(i)) state.optimizer.update(i, leaves[i].values, grads[i].values);
    }

    state.step = step;
    state.rng_state = serialize_rng(rng);
    state.history.push_back(breakdown);
    if (hooks.on_step) hooks.on_step(state);
    if (hooks.on_checkpoint && hooks.checkpoint_every > 0 &&
        state.step % hooks.checkpoint_every == 0) {
      hooks.on_checkpoint(state);
      last_checkpoint = state.step;
    }
  }
  if (hooks.on_checkpoint && last_checkpoint != state.step) hooks.on_checkpoint(state);

  result.g_b = std::move(state.g_b);
  result.history = std::move(state.history);
  result.completed = true;
  return result;
}

HeldOutReport evaluate_held_out(const Generator& g_a, const GeneratorParams& g_b,
                                const EmbedderBackend& embedder,
                                const ReferenceBundle& bundle,
                                const std::vector<WPlusCode>& codes) {
  HeldOutReport report;
  if (codes.empty()) return report;
  for (const auto& w : codes) {
    const SemanticEmbedding e_a = embedder.embed(g_a.generate(w));
    const SemanticEmbedding e_b = embedder.embed(g_a.backend->generate(g_b, w));
    report.mean_cos_samp_ref += cosine_sim(bundle.v_ref.values, (e_b - e_a).values);
    report.mean_cos_within +=
        cosine_sim((e_a - bundle.embed_anchor).values, (e_b - bundle.embed_b).values);
  }
  report.mean_cos_samp_ref /= static_cast<double>(codes.size());
  report.mean_cos_within /= static_cast<double>(codes.size());
  return report;
}

}  // namespace ganshift

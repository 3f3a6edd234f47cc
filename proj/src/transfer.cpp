#include "ganshift/transfer.hpp"

#include <cmath>
#include <string>

#include "ganshift/error.hpp"

namespace ganshift {

WPlusCode style_mix(const WPlusCode& w, const WPlusCode& w_ref, double alpha, std::size_t m) {
  if (!w.same_shape(w_ref)) throw DimensionError("style_mix needs equal block structure");
  if (m > w.layer_count()) {
    throw ConfigError("mix boundary m=" + std::to_string(m) + " exceeds layer count " +
                      std::to_string(w.layer_count()));
  }
  if (!(alpha >= 0.0 && alpha <= 1.0)) {
    throw ConfigError("alpha must lie in [0, 1], got " + std::to_string(alpha));
  }
  WPlusCode out = w;
  for (std::size_t l = m; l < w.layer_count(); ++l) {
    auto dst = out.block(l);
    const auto ref = w_ref.block(l);
    for (std::size_t k = 0; k < dst.size(); ++k) {
      dst[k] = (1.0 - alpha) * dst[k] + alpha * ref[k];
    }
  }
  return out;
}

WPlusCode apply_edit(const WPlusCode& w, const WPlusCode& direction, double magnitude) {
  if (!w.same_shape(direction)) throw DimensionError("edit direction shape differs from latent");
  WPlusCode out = w;
  auto dst = out.data();
  const auto dir = direction.data();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += magnitude * dir[i];
  return out;
}

TransferResult transfer_latent(const WPlusCode& w_real, const Generator& g_b,
                               const WPlusCode& w_ref, const TransferOptions& options) {
  auto edit_all = [&](WPlusCode w) {
    for (const auto& e : options.edits) w = apply_edit(w, e.direction, e.magnitude);
    return w;
  };
  auto mix = [&](const WPlusCode& w) {
    return options.enable_mixing ? style_mix(w, w_ref, options.alpha, options.m) : w;
  };

  TransferResult result;
  result.w_real = w_real;
  result.w_hat = options.order == EditOrder::kEditsThenMix ? mix(edit_all(w_real))
                                                           : edit_all(mix(w_real));
  result.image = g_b.generate(result.w_hat);
  return result;
}

TransferResult transfer_image(const ImageTensor& img_real, const Generator& g_a,
                              const Generator& g_b, const PerceptualMetric& metric,
                              const WPlusCode& w_ref, const TransferOptions& options) {
  if (!g_a.params.same_structure(g_b.params) || !(g_a.shape() == g_b.shape())) {
    throw DimensionError("adapted generator does not share the base latent space");
  }
  const WPlusCode w_real = invert(img_real, g_a, metric, options.inversion).latent;
  return transfer_latent(w_real, g_b, w_ref, options);
}

}  // namespace ganshift

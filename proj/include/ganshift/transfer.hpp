#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "ganshift/backends.hpp"
#include "ganshift/core.hpp"
#include "ganshift/inversion.hpp"

namespace ganshift {

inline constexpr std::size_t kDefaultMixBoundary = 7;

// Blocks [0, m) from w; blocks [m, L) interpolated (1 - alpha) w + alpha w_ref.
WPlusCode style_mix(const WPlusCode& w, const WPlusCode& w_ref, double alpha,
                    std::size_t m = kDefaultMixBoundary);

// w + magnitude * direction.
WPlusCode apply_edit(const WPlusCode& w, const WPlusCode& direction, double magnitude);

struct LatentEdit {
  std::string name;
  WPlusCode direction;
  double magnitude = 0.0;
};

enum class EditOrder { kEditsThenMix, kMixThenEdits };

struct TransferOptions {
  double alpha = 0.0;
  std::size_t m = kDefaultMixBoundary;
  bool enable_mixing = true;
  std::vector<LatentEdit> edits;
  EditOrder order = EditOrder::kEditsThenMix;
  InversionOptions inversion;
};

struct TransferResult {
  WPlusCode w_real;  // inversion in domain A
  WPlusCode w_hat;   // after edits and mixing
  ImageTensor image; // G_B(w_hat)
};

// Edits and mixing applied to an existing code, rendered with G_B.
TransferResult transfer_latent(const WPlusCode& w_real, const Generator& g_b,
                               const WPlusCode& w_ref, const TransferOptions& options);

// Inverts a real image with G_A, then transfer_latent.
TransferResult transfer_image(const ImageTensor& img_real, const Generator& g_a,
                              const Generator& g_b, const PerceptualMetric& metric,
                              const WPlusCode& w_ref, const TransferOptions& options);

}  // namespace ganshift

#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <string_view>

namespace ganshift {

// Which embedding anchors the domain-gap vector.
enum class AnchorMode {
  kInverted,    // embedding of the inverted reference I_A
  kDomainMean,  // mean embedding of sampled domain-A images
};

std::string_view to_string(AnchorMode mode);
AnchorMode anchor_mode_from_string(std::string_view text);

// Hyperparameters and ablation toggles for one adaptation run.
// Defaults reproduce the published configuration; learning_rate and
// optimizer_betas follow the conventional StyleGAN fine-tuning settings.
struct AdaptConfig {
  std::int64_t iterations = 600;
  std::int64_t batch_size = 4;
  double learning_rate = 2e-3;
  double beta1 = 0.0;
  double beta2 = 0.99;

  double lambda_clip_within = 0.5;
  double lambda_ref_clip = 30.0;
  double lambda_ref_rec = 10.0;

  double inversion_lambda = 1e-2;
  std::int64_t inversion_steps = 400;

  std::int64_t mix_boundary_m = 7;
  std::uint64_t seed = 0;

  AnchorMode anchor_mode = AnchorMode::kInverted;
  std::int64_t anchor_samples = 256;
  bool enable_ref_clip = true;
  bool enable_clip_within = true;
  bool enable_ref_rec = true;
  bool enable_style_mixing = true;

  // Throws ConfigError. `layer_count` of 0 skips the m <= L check.
  void validate(std::size_t layer_count = 0) const;

  bool operator==(const AdaptConfig&) const = default;
};

// Flat key/value form. Keys are the field names above, except the betas which
// appear as a single `optimizer_betas = b1,b2` entry.
using ConfigEntries = std::map<std::string, std::string>;

ConfigEntries to_entries(const AdaptConfig& config);

// Applies entries on top of `base`. Unknown keys and unparsable values throw.
AdaptConfig apply_entries(AdaptConfig base, const ConfigEntries& entries);

// `key = value` lines, `#` comments, blank lines ignored.
ConfigEntries parse_config_text(std::string_view text);
std::string format_config_text(const AdaptConfig& config);

AdaptConfig load_config_file(const std::string& path);

// Shortest round-trip decimal form of a double ("30", "0.01", "0.002").
std::string format_number(double value);

}  // namespace ganshift

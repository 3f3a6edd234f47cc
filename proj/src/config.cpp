#include "ganshift/config.hpp"

#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <string>

#include "ganshift/error.hpp"

namespace ganshift {
namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

double parse_double(const std::string& key, std::string_view text) {
  text = trim(text);
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size() || !std::isfinite(value)) {
    throw ConfigError("config key '" + key + "': not a finite number: '" + std::string(text) + "'");
  }
  return value;
}

template <typename Int>
Int parse_int(const std::string& key, std::string_view text) {
  text = trim(text);
  Int value{};
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    throw ConfigError("config key '" + key + "': not an integer: '" + std::string(text) + "'");
  }
  return value;
}

bool parse_bool(const std::string& key, std::string_view text) {
  text = trim(text);
  if (text == "true" || text == "1") return true;
  if (text == "false" || text == "0") return false;
  throw ConfigError("config key '" + key + "': expected true or false, got '" +
                    std::string(text) + "'");
}

std::string format_bool(bool b) { return b ? "true" : "false"; }

}  // namespace

std::string_view to_string(AnchorMode mode) {
  return mode == AnchorMode::kInverted ? "inverted" : "domain_mean";
}

AnchorMode anchor_mode_from_string(std::string_view text) {
  if (text == "inverted") return AnchorMode::kInverted;
  if (text == "domain_mean") return AnchorMode::kDomainMean;
  throw ConfigError("anchor_mode must be 'inverted' or 'domain_mean', got '" + std::string(text) +
                    "'");
}

std::string format_number(double value) {
  std::array<char, 64> buf{};
  auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), value);
  if (ec != std::errc()) throw ConfigError("cannot format number");
  return std::string(buf.data(), ptr);
}

void AdaptConfig::validate(std::size_t layer_count) const {
  auto require = [](bool ok, const std::string& what) {
    if (!ok) throw ConfigError("invalid config: " + what);
  };
  require(iterations >= 0, "iterations must be >= 0");
  require(batch_size >= 1, "batch_size must be positive");
  require(std::isfinite(learning_rate) && learning_rate > 0, "learning_rate must be positive");
  require(beta1 >= 0 && beta1 < 1 && beta2 >= 0 && beta2 < 1, "optimizer_betas must lie in [0, 1)");
  require(lambda_clip_within >= 0 && lambda_ref_clip >= 0 && lambda_ref_rec >= 0,
          "loss weights must be non-negative");
  require(std::isfinite(lambda_clip_within) && std::isfinite(lambda_ref_clip) &&
              std::isfinite(lambda_ref_rec),
          "loss weights must be finite");
  require(std::isfinite(inversion_lambda) && inversion_lambda > 0,
          "inversion_lambda must be positive");
  require(inversion_steps >= 1, "inversion_steps must be positive");
  require(mix_boundary_m >= 0, "mix_boundary_m must be >= 0");
  require(layer_count == 0 || static_cast<std::size_t>(mix_boundary_m) <= layer_count,
          "mix_boundary_m=" + std::to_string(mix_boundary_m) + " exceeds layer count " +
              std::to_string(layer_count));
  require(anchor_samples >= 1, "anchor_samples must be positive");
}

ConfigEntries to_entries(const AdaptConfig& c) {
  return {
      {"iterations", std::to_string(c.iterations)},
      {"batch_size", std::to_string(c.batch_size)},
      {"learning_rate", format_number(c.learning_rate)},
      {"optimizer_betas", format_number(c.beta1) + "," + format_number(c.beta2)},
      {"lambda_clip_within", format_number(c.lambda_clip_within)},
      {"lambda_ref_clip", format_number(c.lambda_ref_clip)},
      {"lambda_ref_rec", format_number(c.lambda_ref_rec)},
      {"inversion_lambda", format_number(c.inversion_lambda)},
      {"inversion_steps", std::to_string(c.inversion_steps)},
      {"mix_boundary_m", std::to_string(c.mix_boundary_m)},
      {"seed", std::to_string(c.seed)},
      {"anchor_mode", std::string(to_string(c.anchor_mode))},
      {"anchor_samples", std::to_string(c.anchor_samples)},
      {"enable_ref_clip", format_bool(c.enable_ref_clip)},
      {"enable_clip_within", format_bool(c.enable_clip_within)},
      {"enable_ref_rec", format_bool(c.enable_ref_rec)},
      {"enable_style_mixing", format_bool(c.enable_style_mixing)},
  };
}

AdaptConfig apply_entries(AdaptConfig c, const ConfigEntries& entries) {
  for (const auto& [key, raw] : entries) {
    const std::string_view value = trim(raw);
    if (key == "iterations") {
      c.iterations = parse_int<std::int64_t>(key, value);
    } else if (key == "batch_size") {
      c.batch_size = parse_int<std::int64_t>(key, value);
    } else if (key == "learning_rate") {
      c.learning_rate = parse_double(key, value);
    } else if (key == "optimizer_betas") {
      const auto comma = value.find(',');
      if (comma == std::string_view::npos) {
        throw ConfigError("config key 'optimizer_betas': expected 'b1,b2'");
      }
      c.beta1 = parse_double(key, value.substr(0, comma));
      c.beta2 = parse_double(key, value.substr(comma + 1));
    } else if (key == "lambda_clip_within") {
      c.lambda_clip_within = parse_double(key, value);
    } else if (key == "lambda_ref_clip") {
      c.lambda_ref_clip = parse_double(key, value);
    } else if (key == "lambda_ref_rec") {
      c.lambda_ref_rec = parse_double(key, value);
    } else if (key == "inversion_lambda") {
      c.inversion_lambda = parse_double(key, value);
    } else if (key == "inversion_steps") {
      c.inversion_steps = parse_int<std::int64_t>(key, value);
    } else if (key == "mix_boundary_m") {
      c.mix_boundary_m = parse_int<std::int64_t>(key, value);
    } else if (key == "seed") {
      c.seed = parse_int<std::uint64_t>(key, value);
    } else if (key == "anchor_mode") {
      c.anchor_mode = anchor_mode_from_string(value);
    } else if (key == "anchor_samples") {
      c.anchor_samples = parse_int<std::int64_t>(key, value);
    } else if (key == "enable_ref_clip") {
      c.enable_ref_clip = parse_bool(key, value);
    } else if (key == "enable_clip_within") {
      c.enable_clip_within = parse_bool(key, value);
    } else if (key == "enable_ref_rec") {
      c.enable_ref_rec = parse_bool(key, value);
    } else if (key == "enable_style_mixing") {
      c.enable_style_mixing = parse_bool(key, value);
    } else {
      throw ConfigError("unknown config key '" + key + "'");
    }
  }
  return c;
}

ConfigEntries parse_config_text(std::string_view text) {
  ConfigEntries entries;
  std::size_t line_no = 0;
  while (!text.empty()) {
    ++line_no;
    const auto eol = text.find('\n');
    std::string_view line = text.substr(0, eol);
    text = eol == std::string_view::npos ? std::string_view{} : text.substr(eol + 1);

    if (const auto hash = line.find('#'); hash != std::string_view::npos) {
      line = line.substr(0, hash);
    }
    line = trim(line);
    if (line.empty()) continue;

    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError("config line " + std::to_string(line_no) + ": expected 'key = value'");
    }
    std::string key(trim(line.substr(0, eq)));
    std::string value(trim(line.substr(eq + 1)));
    if (key.empty()) throw ConfigError("config line " + std::to_string(line_no) + ": empty key");
    if (!entries.emplace(key, value).second) {
      throw ConfigError("config key '" + key + "' given twice");
    }
  }
  return entries;
}

std::string format_config_text(const AdaptConfig& config) {
  std::ostringstream out;
  for (const auto& [key, value] : to_entries(config)) out << key << " = " << value << '\n';
  return out.str();
}

AdaptConfig load_config_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open config file '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return apply_entries(AdaptConfig{}, parse_config_text(buf.str()));
}

}  // namespace ganshift

#pragma once

#include <string>

#include "json.hpp"

#include "ganshift/core.hpp"

namespace ganshift::service {

inline constexpr int kLatentFormatVersion = 1;

// {format_version, L, D, blocks: [[...D values] x L], name}. Used for
// latent codes and for edit directions alike.
struct LatentFile {
  WPlusCode latent;
  std::string name;
};

nlohmann::json latent_to_json(const WPlusCode& w, const std::string& name);
WPlusCode latent_from_json(const nlohmann::json& j, std::string* name = nullptr);

LatentFile read_latent_file(const std::string& path);
// Atomic write (temporary sibling then rename).
void write_latent_file(const std::string& path, const WPlusCode& w, const std::string& name = "");

// Unique temporary name next to `path` for write-then-rename.
std::string temp_sibling(const std::string& path);

// Writes text to `path` through a temporary sibling and a rename.
void write_text_atomic(const std::string& path, const std::string& text);
std::string read_text_file(const std::string& path);

}  // namespace ganshift::service

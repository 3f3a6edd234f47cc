#include "ganshift/service/latent_io.hpp"

#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <unistd.h>

#include "ganshift/error.hpp"

namespace ganshift::service {
namespace fs = std::filesystem;
using nlohmann::json;

json latent_to_json(const WPlusCode& w, const std::string& name) {
  json blocks = json::array();
  for (std::size_t l = 0; l < w.layer_count(); ++l) {
    const auto b = w.block(l);
    blocks.push_back(std::vector<double>(b.begin(), b.end()));
  }
  json j = {{"format_version", kLatentFormatVersion},
            {"L", w.layer_count()},
            {"D", w.width()},
            {"blocks", std::move(blocks)}};
  if (!name.empty()) j["name"] = name;
  return j;
}

WPlusCode latent_from_json(const json& j, std::string* name) {
  try {
    const int version = j.at("format_version").get<int>();
    if (version != kLatentFormatVersion) {
      throw IoError("unsupported latent format_version " + std::to_string(version));
    }
    const auto layers = j.at("L").get<std::size_t>();
    const auto width = j.at("D").get<std::size_t>();
    const json& blocks = j.at("blocks");
    if (!blocks.is_array() || blocks.size() != layers) {
      throw DimensionError("latent declares L=" + std::to_string(layers) + " but has " +
                           std::to_string(blocks.size()) + " blocks");
    }
    std::vector<double> data;
    data.reserve(layers * width);
    for (std::size_t l = 0; l < layers; ++l) {
      const json& block = blocks[l];
      if (!block.is_array() || block.size() != width) {
        throw DimensionError("latent block " + std::to_string(l) + " does not have D=" +
                             std::to_string(width) + " values");
      }
      for (const auto& v : block) data.push_back(v.get<double>());
    }
    WPlusCode w(layers, width, std::move(data));
    if (!w.all_finite()) throw NumericalError("latent contains non-finite values");
    if (name) *name = j.value("name", "");
    return w;
  } catch (const json::exception& e) {
    throw IoError(std::string("malformed latent JSON: ") + e.what());
  }
}

LatentFile read_latent_file(const std::string& path) {
  json j;
  try {
    j = json::parse(read_text_file(path));
  } catch (const json::exception& e) {
    throw IoError("'" + path + "': " + e.what());
  }
  LatentFile f;
  try {
    f.latent = latent_from_json(j, &f.name);
  } catch (const Error& e) {
    throw IoError("'" + path + "': " + e.what());
  }
  return f;
}

void write_latent_file(const std::string& path, const WPlusCode& w, const std::string& name) {
  write_text_atomic(path, latent_to_json(w, name).dump(1) + "\n");
}

std::string temp_sibling(const std::string& path) {
  static std::atomic<unsigned long> counter{0};
  return path + ".tmp." + std::to_string(::getpid()) + "." + std::to_string(++counter);
}

void write_text_atomic(const std::string& path, const std::string& text) {
  const fs::path target(path);
  if (target.has_parent_path()) fs::create_directories(target.parent_path());
  const fs::path tmp = temp_sibling(target.string());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write '" + tmp.string() + "'");
    out << text;
    out.flush();
    if (!out) {
      out.close();
      fs::remove(tmp);
      throw IoError("short write to '" + tmp.string() + "'");
    }
  }
  std::error_code ec;
  fs::rename(tmp, target, ec);
  if (ec) {
    fs::remove(tmp);
    throw IoError("cannot move file into '" + path + "': " + ec.message());
  }
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace ganshift::service

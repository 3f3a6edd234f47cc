#include "ganshift/params.hpp"

#include <string>

#include "ganshift/error.hpp"

namespace ganshift {

std::string_view to_string(ParamGroup group) {
  switch (group) {
    case ParamGroup::kMapping: return "mapping";
    case ParamGroup::kSynthesis: return "synthesis";
    case ParamGroup::kOutputColor: return "output_color";
    case ParamGroup::kUnlabeled: break;
  }
  return "unlabeled";
}

ParamGroup param_group_from_string(std::string_view text) {
  if (text == "mapping") return ParamGroup::kMapping;
  if (text == "synthesis") return ParamGroup::kSynthesis;
  if (text == "output_color") return ParamGroup::kOutputColor;
  return ParamGroup::kUnlabeled;
}

GeneratorParams::GeneratorParams(std::vector<ParamLeaf> leaves) {
  for (auto& leaf : leaves) add(std::move(leaf));
}

void GeneratorParams::add(ParamLeaf leaf) {
  if (leaf.values.size() != leaf.rows * leaf.cols) {
    throw DimensionError("leaf '" + leaf.name + "' has " + std::to_string(leaf.values.size()) +
                         " values for shape " + std::to_string(leaf.rows) + "x" +
                         std::to_string(leaf.cols));
  }
  if (index_of(leaf.name)) throw ConfigError("duplicate parameter leaf '" + leaf.name + "'");
  leaves_.push_back(std::move(leaf));
}

std::size_t GeneratorParams::value_count() const {
  std::size_t n = 0;
  for (const auto& leaf : leaves_) n += leaf.size();
  return n;
}

std::optional<std::size_t> GeneratorParams::index_of(std::string_view name) const {
  for (std::size_t i = 0; i < leaves_.size(); ++i) {
    if (leaves_[i].name == name) return i;
  }
  return std::nullopt;
}

const ParamLeaf& GeneratorParams::at(std::string_view name) const {
  auto idx = index_of(name);
  if (!idx) throw ConfigError("no parameter leaf named '" + std::string(name) + "'");
  return leaves_[*idx];
}

ParamLeaf& GeneratorParams::at(std::string_view name) {
  auto idx = index_of(name);
  if (!idx) throw ConfigError("no parameter leaf named '" + std::string(name) + "'");
  return leaves_[*idx];
}

GeneratorParams GeneratorParams::zeros_like() const {
  GeneratorParams out = *this;
  for (auto& leaf : out.leaves_) std::fill(leaf.values.begin(), leaf.values.end(), 0.0);
  return out;
}

bool GeneratorParams::same_structure(const GeneratorParams& other) const {
  if (leaves_.size() != other.leaves_.size()) return false;
  for (std::size_t i = 0; i < leaves_.size(); ++i) {
    const auto& a = leaves_[i];
    const auto& b = other.leaves_[i];
    if (a.name != b.name || a.group != b.group || a.rows != b.rows || a.cols != b.cols) {
      return false;
    }
  }
  return true;
}

void GeneratorParams::axpy(double scale, const GeneratorParams& other) {
  if (!same_structure(other)) throw DimensionError("parameter trees differ in structure");
  for (std::size_t i = 0; i < leaves_.size(); ++i) {
    auto& dst = leaves_[i].values;
    const auto& src = other.leaves_[i].values;
    for (std::size_t k = 0; k < dst.size(); ++k) dst[k] += scale * src[k];
  }
}

std::size_t TrainableMask::count() const {
  std::size_t n = 0;
  for (bool t : trainable) n += t ? 1 : 0;
  return n;
}

TrainableMask trainable_mask(const GeneratorParams& params) {
  TrainableMask mask;
  mask.trainable.reserve(params.leaf_count());
  for (const auto& leaf : params.leaves()) {
    if (leaf.group == ParamGroup::kUnlabeled) {
      throw ConfigError("parameter leaf '" + leaf.name + "' carries no group label");
    }
    mask.trainable.push_back(leaf.group == ParamGroup::kSynthesis);
  }
  return mask;
}

}  // namespace ganshift

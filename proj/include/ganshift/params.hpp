#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace ganshift {

enum class ParamGroup { kUnlabeled, kMapping, kSynthesis, kOutputColor };

std::string_view to_string(ParamGroup group);
ParamGroup param_group_from_string(std::string_view text);

// One named array of the generator's parameter tree. Values are stored
// column-major with shape rows x cols.
struct ParamLeaf {
  std::string name;
  ParamGroup group = ParamGroup::kUnlabeled;
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> values;

  std::size_t size() const { return values.size(); }
  bool operator==(const ParamLeaf&) const = default;
};

class GeneratorParams {
 public:
  GeneratorParams() = default;
  explicit GeneratorParams(std::vector<ParamLeaf> leaves);

  void add(ParamLeaf leaf);

  std::span<ParamLeaf> leaves() { return leaves_; }
  std::span<const ParamLeaf> leaves() const { return leaves_; }
  std::size_t leaf_count() const { return leaves_.size(); }
  std::size_t value_count() const;

  std::optional<std::size_t> index_of(std::string_view name) const;
  const ParamLeaf& at(std::string_view name) const;
  ParamLeaf& at(std::string_view name);

  // Same names, groups and shapes with every value zeroed.
  GeneratorParams zeros_like() const;
  bool same_structure(const GeneratorParams& other) const;

  // Adds `scale * other` leafwise; structures must match.
  void axpy(double scale, const GeneratorParams& other);

  bool operator==(const GeneratorParams&) const = default;

 private:
  std::vector<ParamLeaf> leaves_;
};

// Predicate over leaf indices: true for leaves updated during adaptation.
struct TrainableMask {
  std::vector<bool> trainable;

  bool operator()(std::size_t leaf_index) const { return trainable.at(leaf_index); }
  std::size_t count() const;
};

// Selects synthesis leaves only; mapping and output_color stay frozen.
// Throws ConfigError on an unlabeled leaf.
TrainableMask trainable_mask(const GeneratorParams& params);

}  // namespace ganshift

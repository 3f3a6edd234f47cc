#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace ganshift {

struct AdamSettings {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  bool operator==(const AdamSettings&) const = default;
};

// Bias-corrected adaptive-moment update over a set of flat slots. A slot is
// created lazily with the size of the first gradient it sees.
class Adam {
 public:
  Adam() = default;
  Adam(AdamSettings settings, std::size_t slot_count)
      : settings_(settings), first_(slot_count), second_(slot_count) {}

  // Advances the shared step counter; call once per optimizer step.
  void begin_step() { ++step_; }

  void update(std::size_t slot, std::span<double> values, std::span<const double> grad);

  const AdamSettings& settings() const { return settings_; }
  std::size_t step() const { return step_; }
  std::size_t slot_count() const { return first_.size(); }

  std::span<const double> first_moment(std::size_t slot) const { return first_.at(slot); }
  std::span<const double> second_moment(std::size_t slot) const { return second_.at(slot); }

  // Restores a previously captured state.
  void restore(std::size_t step, std::vector<std::vector<double>> first,
               std::vector<std::vector<double>> second);

  bool operator==(const Adam&) const = default;

 private:
  AdamSettings settings_;
  std::size_t step_ = 0;
  std::vector<std::vector<double>> first_;
  std::vector<std::vector<double>> second_;
};

}  // namespace ganshift

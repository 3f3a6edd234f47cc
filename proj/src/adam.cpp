#include "ganshift/adam.hpp"

#include <cmath>

#include "ganshift/error.hpp"

namespace ganshift {

void Adam::update(std::size_t slot, std::span<double> values, std::span<const double> grad) {
  if (step_ == 0) throw ConfigError("Adam::update called before begin_step");
  if (values.size() != grad.size()) throw DimensionError("Adam value/gradient size mismatch");
  auto& m = first_.at(slot);
  auto& v = second_.at(slot);
  if (m.empty()) {
    m.assign(values.size(), 0.0);
    v.assign(values.size(), 0.0);
  }
  if (m.size() != values.size()) throw DimensionError("Adam slot size changed");

  const double b1 = settings_.beta1;
  const double b2 = settings_.beta2;
  const double t = static_cast<double>(step_);
  const double c1 = 1.0 - std::pow(b1, t);
  const double c2 = 1.0 - std::pow(b2, t);
  for (std::size_t i = 0; i < values.size(); ++i) {
    m[i] = b1 * m[i] + (1.0 - b1) * grad[i];
    v[i] = b2 * v[i] + (1.0 - b2) * grad[i] * grad[i];
    const double m_hat = m[i] / c1;
    const double v_hat = v[i] / c2;
    values[i] -= settings_.learning_rate * m_hat / (std::sqrt(v_hat) + settings_.epsilon);
  }
}

void Adam::restore(std::size_t step, std::vector<std::vector<double>> first,
                   std::vector<std::vector<double>> second) {
  if (first.size() != second.size()) throw DimensionError("Adam moment slot counts differ");
  step_ = step;
  first_ = std::move(first);
  second_ = std::move(second);
}

}  // namespace ganshift

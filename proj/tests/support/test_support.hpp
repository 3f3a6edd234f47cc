#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <initializer_list>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "ganshift/backends.hpp"
#include "ganshift/core.hpp"
#include "ganshift/toy_backends.hpp"
#include "ganshift/trainer.hpp"

namespace ganshift::testing {

// Fixed channel-mixing transform defining the synthetic domain B.
inline ImageTensor channel_mix(const ImageTensor& in) {
  static constexpr double kMix[3][3] = {{0.1, 0.2, 0.7}, {0.7, 0.1, 0.2}, {0.2, 0.7, 0.1}};
  ImageTensor out = in;
  for (std::size_t y = 0; y < in.height(); ++y) {
    for (std::size_t x = 0; x < in.width(); ++x) {
      for (std::size_t c = 0; c < 3; ++c) {
        double s = 0.0;
        for (std::size_t k = 0; k < 3; ++k) s += kMix[c][k] * in.at(y, x, k);
        out.at(y, x, c) = s;
      }
    }
  }
  return out;
}

struct ToyPair {
  BackendSet backends;
  Generator g_a;
};

inline ToyPair make_toy_pair(std::uint64_t seed) {
  BackendSet set = make_toy_backends(seed);
  Generator g{set.generator, set.generator->initial_params()};
  return {set, g};
}

// Domain-B reference: the channel-mixed render of one seeded domain-A sample.
inline ImageTensor synthetic_reference(const Generator& g_a, std::uint64_t seed) {
  return channel_mix(g_a.generate(sample_codes(g_a, 100 + seed, 1)[0]));
}

inline WPlusCode random_latent(std::size_t layers, std::size_t width, std::mt19937_64& rng,
                               double scale = 1.0) {
  std::normal_distribution<double> normal(0.0, scale);
  WPlusCode w(layers, width);
  for (double& v : w.data()) v = normal(rng);
  return w;
}

inline ImageTensor random_image(std::size_t h, std::size_t w, std::size_t c, std::mt19937_64& rng,
                                double scale = 0.5) {
  std::uniform_real_distribution<double> u(-scale, scale);
  ImageTensor img(h, w, c);
  for (double& v : img.pixels()) v = u(rng);
  return img;
}

// |a - b| / max(|a|, |b|).
inline double relative_error(double a, double b) {
  const double denom = std::max(std::abs(a), std::abs(b));
  return denom == 0.0 ? 0.0 : std::abs(a - b) / denom;
}

inline bool bit_equal(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (std::bit_cast<std::uint64_t>(a[i]) != std::bit_cast<std::uint64_t>(b[i])) return false;
  }
  return true;
}

struct GradientCheck {
  double max_relative_error = 0.0;
  std::size_t checked = 0;   // entries with |grad| above the floor
  std::size_t failures = 0;  // checked entries over tolerance, or tiny ones off by more than the floor
};

// Central finite differences of `f` around `x`, compared entrywise against
// `analytic`. Entries whose magnitude stays below `floor` are compared
// absolutely instead.
inline GradientCheck check_gradient(const std::function<double(std::span<const double>)>& f,
                                    std::vector<double> x, std::span<const double> analytic,
                                    double step = 1e-5, double tolerance = 1e-3,
                                    double floor = 1e-8) {
  GradientCheck out;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double saved = x[i];
    x[i] = saved + step;
    const double up = f(x);
    x[i] = saved - step;
    const double down = f(x);
    x[i] = saved;
    const double fd = (up - down) / (2.0 * step);
    const double g = analytic[i];
    if (std::max(std::abs(g), std::abs(fd)) > floor) {
      ++out.checked;
      const double rel = relative_error(g, fd);
      out.max_relative_error = std::max(out.max_relative_error, rel);
      if (rel >= tolerance) ++out.failures;
    } else if (std::abs(g - fd) > floor) {
      ++out.failures;
    }
  }
  return out;
}

// Flattened view of every value of the selected leaves.
inline std::vector<double> flatten(const GeneratorParams& p, const std::vector<std::size_t>& leaves) {
  std::vector<double> out;
  for (std::size_t i : leaves) {
    const auto& v = p.leaves()[i].values;
    out.insert(out.end(), v.begin(), v.end());
  }
  return out;
}

inline void unflatten(GeneratorParams& p, const std::vector<std::size_t>& leaves,
                      std::span<const double> flat) {
  std::size_t k = 0;
  for (std::size_t i : leaves) {
    for (double& v : p.leaves()[i].values) v = flat[k++];
  }
}

inline std::vector<std::size_t> leaves_in_groups(const GeneratorParams& p,
                                                 std::initializer_list<ParamGroup> groups) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < p.leaf_count(); ++i) {
    for (ParamGroup g : groups) {
      if (p.leaves()[i].group == g) out.push_back(i);
    }
  }
  return out;
}

// Fresh directory removed on destruction.
class TempDir {
 public:
  TempDir() {
    static std::mt19937_64 rng{std::random_device{}()};
    path_ = std::filesystem::temp_directory_path() /
            ("ganshift_test_" + std::to_string(rng()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::string file(const std::string& name) const { return (path_ / name).string(); }

 private:
  std::filesystem::path path_;
};

}  // namespace ganshift::testing

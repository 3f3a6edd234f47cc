#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "ganshift/core.hpp"
#include "ganshift/params.hpp"

namespace ganshift {

// Architecture dimensions a generator backend declares.
struct GeneratorShape {
  std::size_t z_dim = 0;         // mapping-network input width
  std::size_t latent_width = 0;  // D
  std::size_t layer_count = 0;   // L
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t channels = 0;

  bool operator==(const GeneratorShape&) const = default;
};

struct GradientRequest {
  bool params = true;
  bool latent = true;
};

struct GeneratorGradient {
  GeneratorParams params;  // empty tree when not requested
  WPlusCode latent;        // empty code when not requested
};

// A style-based generator architecture. Instances hold only fixed,
// seed-derived structure; learnable weights are passed in as GeneratorParams
// so one backend serves G_A and G_B concurrently.
class GeneratorBackend {
 public:
  virtual ~GeneratorBackend() = default;

  virtual std::string name() const = 0;
  virtual std::uint64_t seed() const = 0;
  virtual GeneratorShape shape() const = 0;
  virtual GeneratorParams initial_params() const = 0;

  WCode map_latent(const GeneratorParams& params, std::span<const double> z) const;
  ImageTensor generate(const GeneratorParams& params, const WPlusCode& w) const;

  // Gradient of a scalar loss given dLoss/dImage, with respect to the
  // parameters and/or the latent code.
  GeneratorGradient backward(const GeneratorParams& params, const WPlusCode& w,
                             const ImageTensor& image_grad,
                             GradientRequest request = {}) const;

  void check_latent(const WPlusCode& w) const;
  void check_image(const ImageTensor& img) const;

 protected:
  virtual WCode do_map_latent(const GeneratorParams& params,
                              std::span<const double> z) const = 0;
  virtual ImageTensor do_generate(const GeneratorParams& params,
                                  const WPlusCode& w) const = 0;
  virtual GeneratorGradient do_backward(const GeneratorParams& params,
                                        const WPlusCode& w,
                                        const ImageTensor& image_grad,
                                        GradientRequest request) const = 0;
};

// Image embedder standing in for a CLIP image encoder.
class EmbedderBackend {
 public:
  virtual ~EmbedderBackend() = default;

  virtual std::string name() const = 0;
  virtual std::size_t width() const = 0;
  virtual std::size_t input_height() const = 0;
  virtual std::size_t input_width() const = 0;
  virtual std::size_t input_channels() const = 0;

  SemanticEmbedding embed(const ImageTensor& img) const;
  // dLoss/dImage given dLoss/dEmbedding.
  ImageTensor embed_vjp(const ImageTensor& img, std::span<const double> embedding_grad) const;

 protected:
  virtual SemanticEmbedding do_embed(const ImageTensor& img) const = 0;
  virtual ImageTensor do_embed_vjp(const ImageTensor& img,
                                   std::span<const double> embedding_grad) const = 0;

 private:
  void check_input(const ImageTensor& img) const;
};

struct MetricGradient {
  ImageTensor a;
  ImageTensor b;
};

// Symmetric, non-negative image distance; zero on identical inputs.
class PerceptualMetric {
 public:
  virtual ~PerceptualMetric() = default;

  virtual std::string name() const = 0;
  virtual double distance(const ImageTensor& a, const ImageTensor& b) const = 0;
  virtual MetricGradient gradient(const ImageTensor& a, const ImageTensor& b) const = 0;
};

// A generator architecture paired with one parameter tree.
struct Generator {
  std::shared_ptr<const GeneratorBackend> backend;
  GeneratorParams params;

  GeneratorShape shape() const { return backend->shape(); }
  WCode map_latent(std::span<const double> z) const { return backend->map_latent(params, z); }
  ImageTensor generate(const WPlusCode& w) const { return backend->generate(params, w); }
};

struct BackendSet {
  std::shared_ptr<const GeneratorBackend> generator;
  std::shared_ptr<const EmbedderBackend> embedder;
  std::shared_ptr<const PerceptualMetric> metric;
};

using BackendFactory = std::function<BackendSet(std::uint64_t seed)>;

// Name -> factory table. "toy" is always present. Unknown names are looked up
// as plugins: a shared library `libganshift_backend_<name>.so` found on the
// colon-separated GANSHIFT_PLUGIN_PATH that exports
//   extern "C" void ganshift_register_backends(ganshift::BackendRegistry&);
class BackendRegistry {
 public:
  static BackendRegistry& instance();

  void register_backend(const std::string& name, BackendFactory factory);
  bool contains(const std::string& name) const;
  std::vector<std::string> names() const;

  // Throws ConfigError when the name is neither registered nor loadable.
  BackendSet create(const std::string& name, std::uint64_t seed);

 private:
  BackendRegistry();
  bool try_load_plugin(const std::string& name);

  mutable std::mutex mutex_;
  std::vector<std::pair<std::string, BackendFactory>> factories_;
};

inline constexpr const char* kPluginEntryPoint = "ganshift_register_backends";

}  // namespace ganshift

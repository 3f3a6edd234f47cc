#include "ganshift/backends.hpp"

#include <string>

#include "ganshift/error.hpp"

namespace ganshift {
namespace {

std::string shape_text(std::size_t h, std::size_t w, std::size_t c) {
  return std::to_string(h) + "x" + std::to_string(w) + "x" + std::to_string(c);
}

}  // namespace

void GeneratorBackend::check_latent(const WPlusCode& w) const {
  const auto s = shape();
  if (w.layer_count() != s.layer_count || w.width() != s.latent_width) {
    throw DimensionError("latent code is " + std::to_string(w.layer_count()) + "x" +
                         std::to_string(w.width()) + ", backend '" + name() + "' declares " +
                         std::to_string(s.layer_count) + "x" + std::to_string(s.latent_width));
  }
}

void GeneratorBackend::check_image(const ImageTensor& img) const {
  const auto s = shape();
  if (img.height() != s.height || img.width() != s.width || img.channels() != s.channels) {
    throw DimensionError("image is " + shape_text(img.height(), img.width(), img.channels()) +
                         ", backend '" + name() + "' declares " +
                         shape_text(s.height, s.width, s.channels));
  }
}

WCode GeneratorBackend::map_latent(const GeneratorParams& params,
                                   std::span<const double> z) const {
  if (z.size() != shape().z_dim) {
    throw DimensionError("seed vector has " + std::to_string(z.size()) +
                         " elements, mapping expects " + std::to_string(shape().z_dim));
  }
  return do_map_latent(params, z);
}

ImageTensor GeneratorBackend::generate(const GeneratorParams& params, const WPlusCode& w) const {
  check_latent(w);
  ImageTensor img = do_generate(params, w);
  if (!all_finite(img.pixels())) {
    throw NumericalError("generator '" + name() + "' produced non-finite pixels");
  }
  return img;
}

GeneratorGradient GeneratorBackend::backward(const GeneratorParams& params, const WPlusCode& w,
                                             const ImageTensor& image_grad,
                                             GradientRequest request) const {
  check_latent(w);
  check_image(image_grad);
  return do_backward(params, w, image_grad, request);
}

void EmbedderBackend::check_input(const ImageTensor& img) const {
  if (img.height() != input_height() || img.width() != input_width() ||
      img.channels() != input_channels()) {
    throw DimensionError("embedder '" + name() + "' expects " +
                         shape_text(input_height(), input_width(), input_channels()) +
                         " images, got " + shape_text(img.height(), img.width(), img.channels()));
  }
}

SemanticEmbedding EmbedderBackend::embed(const ImageTensor& img) const {
  check_input(img);
  return do_embed(img);
}

ImageTensor EmbedderBackend::embed_vjp(const ImageTensor& img,
                                       std::span<const double> embedding_grad) const {
  check_input(img);
  if (embedding_grad.size() != width()) {
    throw DimensionError("embedding gradient width mismatch");
  }
  return do_embed_vjp(img, embedding_grad);
}

}  // namespace ganshift

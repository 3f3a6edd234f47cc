#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "ganshift/core.hpp"

namespace ganshift::service {

// 8-bit RGB PNG <-> [-1, 1] tensors. Decoding accepts any PNG colour type and
// converts it to RGB; encoding clamps to [-1, 1] and rounds.
ImageTensor decode_png(const std::vector<unsigned char>& bytes);
std::vector<unsigned char> encode_png(const ImageTensor& img);

ImageTensor read_png(const std::string& path);
void write_png(const std::string& path, const ImageTensor& img);

// Bilinear resize to the given shape; returns the input unchanged when it
// already matches.
ImageTensor fit_image(const ImageTensor& img, std::size_t height, std::size_t width);

}  // namespace ganshift::service

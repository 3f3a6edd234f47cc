#pragma once

#include <cstddef>

#include <Eigen/Dense>

#include "ganshift/core.hpp"

namespace ganshift::image_ops {

// Planar maps: each row of the matrix is one square r x r plane, row-major.
// Every linear operator comes with its adjoint for backpropagation.

Eigen::MatrixXd upsample2(const Eigen::MatrixXd& planes, std::size_t r);
Eigen::MatrixXd upsample2_adjoint(const Eigen::MatrixXd& grad, std::size_t r);

// Separable [1 2 1]/4 blur with edge clamping.
Eigen::MatrixXd blur(const Eigen::MatrixXd& planes, std::size_t r);
Eigen::MatrixXd blur_adjoint(const Eigen::MatrixXd& grad, std::size_t r);

// 2x2 average pooling; `r` is the input resolution (must be even).
Eigen::MatrixXd avgpool2(const Eigen::MatrixXd& planes, std::size_t r);
Eigen::MatrixXd avgpool2_adjoint(const Eigen::MatrixXd& grad, std::size_t r);

// Conversions between HWC images and C x (H*W) planes.
Eigen::MatrixXd to_planes(const ImageTensor& img);
ImageTensor from_planes(const Eigen::MatrixXd& planes, std::size_t height,
                        std::size_t width, ValueRange range = {});

// Bilinear resample, pixel-center aligned.
ImageTensor resize_bilinear(const ImageTensor& img, std::size_t height, std::size_t width);

}  // namespace ganshift::image_ops

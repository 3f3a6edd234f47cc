#include "ganshift/image_ops.hpp"

#include <algorithm>
#include <cmath>

#include "ganshift/error.hpp"

namespace ganshift::image_ops {
namespace {

using Eigen::Index;
using Eigen::MatrixXd;

void check_planes(const MatrixXd& planes, std::size_t r) {
  if (static_cast<std::size_t>(planes.cols()) != r * r) {
    throw DimensionError("plane size does not match resolution");
  }
}

// One [1 2 1]/4 pass along x (horizontal) or y, forward or adjoint.
MatrixXd blur_pass(const MatrixXd& in, std::size_t r, bool horizontal, bool adjoint) {
  MatrixXd out = MatrixXd::Zero(in.rows(), in.cols());
  const Index n = static_cast<Index>(r);
  auto idx = [&](Index y, Index x) { return y * n + x; };
  for (Index y = 0; y < n; ++y) {
    for (Index x = 0; x < n; ++x) {
      const Index i = idx(y, x);
      Index prev, next;
      if (horizontal) {
        prev = idx(y, std::max<Index>(x - 1, 0));
        next = idx(y, std::min<Index>(x + 1, n - 1));
      } else {
        prev = idx(std::max<Index>(y - 1, 0), x);
        next = idx(std::min<Index>(y + 1, n - 1), x);
      }
      if (!adjoint) {
        out.col(i) = 0.25 * in.col(prev) + 0.5 * in.col(i) + 0.25 * in.col(next);
      } else {
        out.col(prev) += 0.25 * in.col(i);
        out.col(i) += 0.5 * in.col(i);
        out.col(next) += 0.25 * in.col(i);
      }
    }
  }
  return out;
}

}  // namespace

MatrixXd upsample2(const MatrixXd& planes, std::size_t r) {
  check_planes(planes, r);
  const Index n = static_cast<Index>(r);
  MatrixXd out(planes.rows(), 4 * n * n);
  for (Index y = 0; y < 2 * n; ++y) {
    for (Index x = 0; x < 2 * n; ++x) {
      out.col(y * 2 * n + x) = planes.col((y / 2) * n + x / 2);
    }
  }
  return out;
}

MatrixXd upsample2_adjoint(const MatrixXd& grad, std::size_t r) {
  check_planes(grad, 2 * r);
  const Index n = static_cast<Index>(r);
  MatrixXd out = MatrixXd::Zero(grad.rows(), n * n);
  for (Index y = 0; y < 2 * n; ++y) {
    for (Index x = 0; x < 2 * n; ++x) {
      out.col((y / 2) * n + x / 2) += grad.col(y * 2 * n + x);
    }
  }
  return out;
}

MatrixXd blur(const MatrixXd& planes, std::size_t r) {
  check_planes(planes, r);
  return blur_pass(blur_pass(planes, r, true, false), r, false, false);
}

MatrixXd blur_adjoint(const MatrixXd& grad, std::size_t r) {
  check_planes(grad, r);
  return blur_pass(blur_pass(grad, r, false, true), r, true, true);
}

MatrixXd avgpool2(const MatrixXd& planes, std::size_t r) {
  check_planes(planes, r);
  if (r % 2 != 0) throw DimensionError("avgpool2 needs an even resolution");
  const Index half = static_cast<Index>(r / 2);
  const Index n = static_cast<Index>(r);
  MatrixXd out = MatrixXd::Zero(planes.rows(), half * half);
  for (Index y = 0; y < n; ++y) {
    for (Index x = 0; x < n; ++x) {
      out.col((y / 2) * half + x / 2) += 0.25 * planes.col(y * n + x);
    }
  }
  return out;
}

MatrixXd avgpool2_adjoint(const MatrixXd& grad, std::size_t r) {
  if (r % 2 != 0) throw DimensionError("avgpool2 needs an even resolution");
  check_planes(grad, r / 2);
  const Index half = static_cast<Index>(r / 2);
  const Index n = static_cast<Index>(r);
  MatrixXd out(grad.rows(), n * n);
  for (Index y = 0; y < n; ++y) {
    for (Index x = 0; x < n; ++x) {
      out.col(y * n + x) = 0.25 * grad.col((y / 2) * half + x / 2);
    }
  }
  return out;
}

MatrixXd to_planes(const ImageTensor& img) {
  const Index c = static_cast<Index>(img.channels());
  const Index p = static_cast<Index>(img.height() * img.width());
  MatrixXd out(c, p);
  auto px = img.pixels();
  for (Index i = 0; i < p; ++i) {
    for (Index k = 0; k < c; ++k) out(k, i) = px[static_cast<std::size_t>(i * c + k)];
  }
  return out;
}

ImageTensor from_planes(const MatrixXd& planes, std::size_t height, std::size_t width,
                        ValueRange range) {
  if (static_cast<std::size_t>(planes.cols()) != height * width) {
    throw DimensionError("plane size does not match image shape");
  }
  const std::size_t c = static_cast<std::size_t>(planes.rows());
  ImageTensor img(height, width, c, 0.0, range);
  auto px = img.pixels();
  for (std::size_t i = 0; i < height * width; ++i) {
    for (std::size_t k = 0; k < c; ++k) {
      px[i * c + k] = planes(static_cast<Index>(k), static_cast<Index>(i));
    }
  }
  return img;
}

ImageTensor resize_bilinear(const ImageTensor& img, std::size_t height, std::size_t width) {
  if (img.height() == height && img.width() == width) return img;
  if (img.height() == 0 || img.width() == 0) throw DimensionError("cannot resize empty image");
  ImageTensor out(height, width, img.channels(), 0.0, img.range());
  const double sy = static_cast<double>(img.height()) / static_cast<double>(height);
  const double sx = static_cast<double>(img.width()) / static_cast<double>(width);
  for (std::size_t y = 0; y < height; ++y) {
    const double fy = std::clamp((static_cast<double>(y) + 0.5) * sy - 0.5, 0.0,
                                 static_cast<double>(img.height() - 1));
    const std::size_t y0 = static_cast<std::size_t>(std::floor(fy));
    const std::size_t y1 = std::min(y0 + 1, img.height() - 1);
    const double ty = fy - static_cast<double>(y0);
    for (std::size_t x = 0; x < width; ++x) {
      const double fx = std::clamp((static_cast<double>(x) + 0.5) * sx - 0.5, 0.0,
                                   static_cast<double>(img.width() - 1));
      const std::size_t x0 = static_cast<std::size_t>(std::floor(fx));
      const std::size_t x1 = std::min(x0 + 1, img.width() - 1);
      const double tx = fx - static_cast<double>(x0);
      for (std::size_t c = 0; c < img.channels(); ++c) {
        const double top = (1 - tx) * img.at(y0, x0, c) + tx * img.at(y0, x1, c);
        const double bottom = (1 - tx) * img.at(y1, x0, c) + tx * img.at(y1, x1, c);
        out.at(y, x, c) = (1 - ty) * top + ty * bottom;
      }
    }
  }
  return out;
}

}  // namespace ganshift::image_ops

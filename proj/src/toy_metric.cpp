#include <vector>

#include "ganshift/error.hpp"
#include "ganshift/image_ops.hpp"
#include "ganshift/toy_backends.hpp"

namespace ganshift {
namespace {

using Eigen::MatrixXd;

// Levels of the blurred pyramid of `planes`: g0 = blur(d), g{k+1} = blur(pool(g{k})).
std::vector<MatrixXd> pyramid(const MatrixXd& planes, std::size_t r, std::size_t levels) {
  std::vector<MatrixXd> out;
  out.push_back(image_ops::blur(planes, r));
  for (std::size_t k = 1; k < levels && r % 2 == 0 && r > 1; ++k) {
    out.push_back(image_ops::blur(image_ops::avgpool2(out.back(), r), r / 2));
    r /= 2;
  }
  return out;
}

MatrixXd difference_planes(const ImageTensor& a, const ImageTensor& b) {
  if (!a.same_shape(b)) throw DimensionError("perceptual metric needs equal image shapes");
  if (a.height() != a.width()) throw DimensionError("toy perceptual metric needs square images");
  return image_ops::to_planes(a) - image_ops::to_planes(b);
}

}  // namespace

double ToyPerceptualMetric::distance(const ImageTensor& a, const ImageTensor& b) const {
  const auto levels = pyramid(difference_planes(a, b), a.height(), levels_);
  double total = 0.0;
  for (const auto& g : levels) total += g.squaredNorm() / static_cast<double>(g.size());
  return total / static_cast<double>(levels.size());
}

MetricGradient ToyPerceptualMetric::gradient(const ImageTensor& a, const ImageTensor& b) const {
  const std::size_t r0 = a.height();
  const auto levels = pyramid(difference_planes(a, b), r0, levels_);
  const double n_levels = static_cast<double>(levels.size());

  // Reverse through the pyramid chain, finest level last.
  std::vector<std::size_t> res(levels.size());
  res[0] = r0;
  for (std::size_t k = 1; k < levels.size(); ++k) res[k] = res[k - 1] / 2;

  MatrixXd carry;
  for (std::size_t k = levels.size(); k-- > 0;) {
    MatrixXd g = (2.0 / (n_levels * static_cast<double>(levels[k].size()))) * levels[k];
    if (carry.size() != 0) g += carry;
    if (k == 0) {
      carry = image_ops::blur_adjoint(g, res[0]);
    } else {
      carry = image_ops::avgpool2_adjoint(image_ops::blur_adjoint(g, res[k]), res[k - 1]);
    }
  }
  ImageTensor da = image_ops::from_planes(carry, a.height(), a.width(), a.range());
  ImageTensor db = da;
  for (double& v : db.pixels()) v = -v;
  return {std::move(da), std::move(db)};
}

BackendSet make_toy_backends(std::uint64_t seed) {
  auto generator = std::make_shared<const ToyGeneratorBackend>(seed);
  const auto s = generator->shape();
  return {generator, std::make_shared<const ToyEmbedder>(seed, s.height, s.width, s.channels),
          std::make_shared<const ToyPerceptualMetric>()};
}

}  // namespace ganshift

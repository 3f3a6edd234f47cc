#include <chrono>
#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "ganshift/error.hpp"
#include "ganshift/losses.hpp"
#include "ganshift/toy_backends.hpp"
#include "ganshift/trainer.hpp"
#include "test_support.hpp"

namespace ganshift {
namespace {

using testing::bit_equal;
using testing::check_gradient;
using testing::make_toy_pair;
using Toy = ToyGeneratorBackend;

std::vector<double> luminance(const ImageTensor& img) {
  std::vector<double> out(img.height() * img.width());
  for (std::size_t y = 0; y < img.height(); ++y) {
    for (std::size_t x = 0; x < img.width(); ++x) {
      double s = 0.0;
      for (std::size_t c = 0; c < img.channels(); ++c) s += img.at(y, x, c);
      out[y * img.width() + x] = s / static_cast<double>(img.channels());
    }
  }
  return out;
}

double pearson(const std::vector<double>& a, const std::vector<double>& b) {
  double ma = 0.0, mb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= static_cast<double>(a.size());
  mb /= static_cast<double>(b.size());
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  return sab / std::sqrt(saa * sbb);
}

ImageTensor gradient_fixture() {
  ImageTensor img(16, 16, 3);
  for (std::size_t y = 0; y < 16; ++y) {
    for (std::size_t x = 0; x < 16; ++x) {
      img.at(y, x, 0) = -1.0 + 2.0 * static_cast<double>(x) / 15.0;
      img.at(y, x, 1) = -1.0 + 2.0 * static_cast<double>(y) / 15.0;
      img.at(y, x, 2) = 0.0;
    }
  }
  return img;
}

ImageTensor checker_fixture() {
  ImageTensor img(16, 16, 3);
  for (std::size_t y = 0; y < 16; ++y) {
    for (std::size_t x = 0; x < 16; ++x) {
      const double v = ((x / 4 + y / 4) % 2 == 0) ? 0.8 : -0.8;
      for (std::size_t c = 0; c < 3; ++c) img.at(y, x, c) = c == 1 ? -v : v;
    }
  }
  return img;
}

TEST(ToyGenerator, DeclaredShape) {
  const Toy g(1);
  const GeneratorShape s = g.shape();
  EXPECT_EQ(s.z_dim, 8u);
  EXPECT_EQ(s.latent_width, 8u);
  EXPECT_EQ(s.layer_count, 12u);
  EXPECT_EQ(s.height, 16u);
  EXPECT_EQ(s.width, 16u);
  EXPECT_EQ(s.channels, 3u);
  EXPECT_EQ(Toy::resolution_of_block(0), 2u);
  EXPECT_EQ(Toy::resolution_of_block(11), 16u);
}

TEST(ToyGenerator, SameSeedSameWeights) {
  EXPECT_EQ(Toy(9).initial_params(), Toy(9).initial_params());
  EXPECT_NE(Toy(9).initial_params(), Toy(10).initial_params());
}

TEST(ToyGenerator, MapLatentIsDeterministic) {
  auto pair = make_toy_pair(2);
  const std::vector<double> z{0.1, -0.4, 2.0, 0.0, 1.5, -1.0, 0.3, 0.7};
  EXPECT_EQ(pair.g_a.map_latent(z), pair.g_a.map_latent(z));
  EXPECT_THROW(pair.g_a.map_latent(std::vector<double>(7, 0.0)), DimensionError);
}

// act(0) = 0 and the first bias is zero, so the zero seed maps to fc1's bias.
TEST(ToyGenerator, ZeroSeedMapsToOutputBias) {
  auto pair = make_toy_pair(5);
  const WCode w = pair.g_a.map_latent(std::vector<double>(8, 0.0));
  const ParamLeaf& fc0_bias = pair.g_a.params.at("mapping.fc0.bias");
  for (double v : fc0_bias.values) EXPECT_EQ(v, 0.0);
  const ParamLeaf& bias = pair.g_a.params.at("mapping.fc1.bias");
  ASSERT_EQ(w.values.size(), bias.values.size());
  for (std::size_t i = 0; i < w.values.size(); ++i) EXPECT_NEAR(w.values[i], bias.values[i], 1e-15);
}

TEST(ToyGenerator, GenerateIsPureAndInRange) {
  auto pair = make_toy_pair(3);
  for (const WPlusCode& w : sample_codes(pair.g_a, 7, 8)) {
    const ImageTensor a = pair.g_a.generate(w);
    const ImageTensor b = pair.g_a.generate(w);
    EXPECT_TRUE(bit_equal(a.pixels(), b.pixels()));
    EXPECT_EQ(a.height(), 16u);
    EXPECT_EQ(a.channels(), 3u);
    EXPECT_TRUE(a.within_range(0.0));
  }
}

TEST(ToyGenerator, RejectsWrongLatentShape) {
  auto pair = make_toy_pair(3);
  EXPECT_THROW(pair.g_a.generate(WPlusCode(11, 8)), DimensionError);
  EXPECT_THROW(pair.g_a.generate(WPlusCode(12, 7)), DimensionError);
}

TEST(ToyGenerator, DistinctCodesGiveDistinctImages) {
  auto pair = make_toy_pair(3);
  const auto codes = sample_codes(pair.g_a, 8, 2);
  EXPECT_GT(mean_squared_error(pair.g_a.generate(codes[0]), pair.g_a.generate(codes[1])), 1e-4);
}

// Swapping the last block for another sample's keeps spatial layout.
TEST(ToyGenerator, LastBlockKeepsSpatialStructure) {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    auto pair = make_toy_pair(seed);
    const auto codes = sample_codes(pair.g_a, 42, 16);
    double mean_corr = 0.0;
    for (std::size_t i = 0; i < 8; ++i) {
      WPlusCode w = codes[i];
      const ImageTensor before = pair.g_a.generate(w);
      const auto donor = codes[i + 8].block(11);
      std::copy(donor.begin(), donor.end(), w.block(11).begin());
      mean_corr += pearson(luminance(before), luminance(pair.g_a.generate(w)));
    }
    mean_corr /= 8.0;
    EXPECT_GT(mean_corr, 0.9) << "seed " << seed;
  }
}

TEST(ToyGenerator, ParamGradientOfPixelSumMatchesFiniteDifferences) {
  auto pair = make_toy_pair(11);
  const WPlusCode w = sample_codes(pair.g_a, 3, 1)[0];
  const ImageTensor ones(16, 16, 3, 1.0, ValueRange{-1e300, 1e300});
  const GeneratorGradient grad = pair.backends.generator->backward(pair.g_a.params, w, ones,
                                                                   {.params = true, .latent = false});
  const auto leaves = testing::leaves_in_groups(pair.g_a.params,
                                                {ParamGroup::kSynthesis, ParamGroup::kOutputColor});
  GeneratorParams probe = pair.g_a.params;
  auto f = [&](std::span<const double> x) {
    testing::unflatten(probe, leaves, x);
    double s = 0.0;
    for (double v : pair.backends.generator->generate(probe, w).pixels()) s += v;
    return s;
  };
  const auto check = check_gradient(f, testing::flatten(pair.g_a.params, leaves),
                                    testing::flatten(grad.params, leaves));
  EXPECT_EQ(check.failures, 0u) << "max rel err " << check.max_relative_error;
  EXPECT_GT(check.checked, 1000u);

  // The image does not depend on the mapping network once w is given.
  for (std::size_t i : testing::leaves_in_groups(grad.params, {ParamGroup::kMapping})) {
    for (double v : grad.params.leaves()[i].values) EXPECT_EQ(v, 0.0);
  }
}

TEST(ToyGenerator, LatentGradientMatchesFiniteDifferences) {
  auto pair = make_toy_pair(12);
  std::mt19937_64 rng(4);
  const WPlusCode w0 = testing::random_latent(12, 8, rng);
  const ImageTensor weights = testing::random_image(16, 16, 3, rng, 1.0);
  ImageTensor upstream = weights;
  const GeneratorGradient grad = pair.backends.generator->backward(
      pair.g_a.params, w0, upstream, {.params = false, .latent = true});
  EXPECT_EQ(grad.params.leaf_count(), 0u);
  auto f = [&](std::span<const double> x) {
    WPlusCode w(12, 8, std::vector<double>(x.begin(), x.end()));
    const ImageTensor img = pair.g_a.generate(w);
    return dot(img.pixels(), weights.pixels());
  };
  const auto data = w0.data();
  const auto check = check_gradient(f, {data.begin(), data.end()}, grad.latent.data());
  EXPECT_EQ(check.failures, 0u) << "max rel err " << check.max_relative_error;
}

TEST(ToyGenerator, ForwardWithinTimeBudget) {
  auto pair = make_toy_pair(1);
  const auto codes = sample_codes(pair.g_a, 1, 20);
  const auto start = std::chrono::steady_clock::now();
  for (const auto& w : codes) (void)pair.g_a.generate(w);
  const double ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  EXPECT_LT(ms / 20.0, 50.0);
}

TEST(ToyEmbedder, SelfGapIsZeroAndOutputFinite) {
  auto pair = make_toy_pair(1);
  const ImageTensor img = gradient_fixture();
  const SemanticEmbedding e = pair.backends.embedder->embed(img);
  EXPECT_EQ(e.dim(), ToyEmbedder::kWidth);
  EXPECT_TRUE(all_finite(e.values));
  for (double v : (e - pair.backends.embedder->embed(img)).values) EXPECT_EQ(v, 0.0);
}

TEST(ToyEmbedder, SeparatesDistinctFixtures) {
  auto pair = make_toy_pair(1);
  const auto& emb = *pair.backends.embedder;
  EXPECT_LT(cosine_sim(emb.embed(gradient_fixture()).values, emb.embed(checker_fixture()).values),
            1.0 - 1e-6);
  const auto codes = sample_codes(pair.g_a, 2, 2);
  EXPECT_LT(cosine_sim(emb.embed(pair.g_a.generate(codes[0])).values,
                       emb.embed(pair.g_a.generate(codes[1])).values),
            1.0 - 1e-6);
}

TEST(ToyEmbedder, RejectsWrongShape) {
  auto pair = make_toy_pair(1);
  EXPECT_THROW(pair.backends.embedder->embed(ImageTensor(8, 8, 3)), DimensionError);
}

TEST(ToyEmbedder, VjpMatchesFiniteDifferences) {
  auto pair = make_toy_pair(6);
  std::mt19937_64 rng(8);
  const ImageTensor img = testing::random_image(16, 16, 3, rng, 0.9);
  std::normal_distribution<double> normal;
  std::vector<double> u(ToyEmbedder::kWidth);
  for (double& v : u) v = normal(rng);
  const ImageTensor grad = pair.backends.embedder->embed_vjp(img, u);
  auto f = [&](std::span<const double> x) {
    ImageTensor probe(16, 16, 3, std::vector<double>(x.begin(), x.end()));
    return dot(pair.backends.embedder->embed(probe).values, u);
  };
  const auto px = img.pixels();
  const auto check = check_gradient(f, {px.begin(), px.end()}, grad.pixels());
  EXPECT_EQ(check.failures, 0u) << "max rel err " << check.max_relative_error;
}

TEST(ToyMetric, SymmetricNonNegativeZeroOnIdentical) {
  const ToyPerceptualMetric metric;
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 10; ++trial) {
    const ImageTensor a = testing::random_image(16, 16, 3, rng);
    const ImageTensor b = testing::random_image(16, 16, 3, rng);
    EXPECT_EQ(metric.distance(a, a), 0.0);
    EXPECT_GT(metric.distance(a, b), 0.0);
    EXPECT_DOUBLE_EQ(metric.distance(a, b), metric.distance(b, a));
  }
}

TEST(ToyMetric, GradientMatchesFiniteDifferences) {
  const ToyPerceptualMetric metric;
  std::mt19937_64 rng(3);
  const ImageTensor a = testing::random_image(16, 16, 3, rng);
  const ImageTensor b = testing::random_image(16, 16, 3, rng);
  const MetricGradient grad = metric.gradient(a, b);
  auto fa = [&](std::span<const double> x) {
    return metric.distance(ImageTensor(16, 16, 3, std::vector<double>(x.begin(), x.end())), b);
  };
  auto fb = [&](std::span<const double> x) {
    return metric.distance(a, ImageTensor(16, 16, 3, std::vector<double>(x.begin(), x.end())));
  };
  const auto pa = a.pixels();
  const auto pb = b.pixels();
  const auto ca = check_gradient(fa, {pa.begin(), pa.end()}, grad.a.pixels());
  const auto cb = check_gradient(fb, {pb.begin(), pb.end()}, grad.b.pixels());
  EXPECT_EQ(ca.failures, 0u) << ca.max_relative_error;
  EXPECT_EQ(cb.failures, 0u) << cb.max_relative_error;
}

}  // namespace
}  // namespace ganshift

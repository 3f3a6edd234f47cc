#include <random>

#include <gtest/gtest.h>

#include "ganshift/error.hpp"
#include "ganshift/losses.hpp"
#include "ganshift/trainer.hpp"
#include "ganshift/transfer.hpp"
#include "test_support.hpp"

namespace ganshift {
namespace {

using testing::bit_equal;

TEST(StyleMix, AlphaZeroIsIdentity) {
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 100; ++trial) {
    const WPlusCode w = testing::random_latent(12, 8, rng);
    const WPlusCode ref = testing::random_latent(12, 8, rng);
    EXPECT_TRUE(bit_equal(style_mix(w, ref, 0.0).data(), w.data()));
  }
}

TEST(StyleMix, AlphaOneTakesReferenceStyle) {
  std::mt19937_64 rng(2);
  std::uniform_int_distribution<std::size_t> pick_m(0, 12);
  for (int trial = 0; trial < 100; ++trial) {
    const WPlusCode w = testing::random_latent(12, 8, rng);
    const WPlusCode ref = testing::random_latent(12, 8, rng);
    const std::size_t m = pick_m(rng);
    const WPlusCode out = style_mix(w, ref, 1.0, m);
    for (std::size_t l = 0; l < 12; ++l) {
      EXPECT_TRUE(bit_equal(out.block(l), l < m ? w.block(l) : ref.block(l))) << "block " << l;
    }
  }
}

TEST(StyleMix, ContentBlocksInvariantForAnyAlpha) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> pick_alpha(0.0, 1.0);
  for (int trial = 0; trial < 100; ++trial) {
    const WPlusCode w = testing::random_latent(12, 8, rng);
    const WPlusCode ref = testing::random_latent(12, 8, rng);
    const WPlusCode out = style_mix(w, ref, pick_alpha(rng));
    for (std::size_t l = 0; l < kDefaultMixBoundary; ++l) EXPECT_TRUE(bit_equal(out.block(l), w.block(l)));
  }
}

TEST(StyleMix, Midpoint) {
  const WPlusCode w(12, 8, 0.0), ref(12, 8, 1.0);
  const WPlusCode out = style_mix(w, ref, 0.5);
  for (std::size_t l = 0; l < 12; ++l) {
    for (double v : out.block(l)) EXPECT_EQ(v, l < 7 ? 0.0 : 0.5);
  }
}

TEST(StyleMix, Errors) {
  const WPlusCode w(12, 8), ref(12, 8);
  EXPECT_THROW(style_mix(w, ref, -0.1), ConfigError);
  EXPECT_THROW(style_mix(w, ref, 1.5), ConfigError);
  EXPECT_THROW(style_mix(w, ref, NAN), ConfigError);
  EXPECT_THROW(style_mix(w, ref, 0.5, 13), ConfigError);
  EXPECT_THROW(style_mix(w, WPlusCode(11, 8), 0.5), DimensionError);
}

TEST(ApplyEdit, ZeroMagnitudeAndInverse) {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 20; ++trial) {
    const WPlusCode w = testing::random_latent(12, 8, rng);
    const WPlusCode d = testing::random_latent(12, 8, rng);
    EXPECT_TRUE(bit_equal(apply_edit(w, d, 0.0).data(), w.data()));
    const WPlusCode back = apply_edit(apply_edit(w, d, 1.7), d, -1.7);
    for (std::size_t i = 0; i < w.size(); ++i) EXPECT_NEAR(back.data()[i], w.data()[i], 1e-12);
  }
  EXPECT_THROW(apply_edit(WPlusCode(12, 8), WPlusCode(12, 4), 1.0), DimensionError);
}

TEST(TransferLatent, OrderMatters) {
  auto pair = testing::make_toy_pair(1);
  std::mt19937_64 rng(5);
  const WPlusCode w = testing::random_latent(12, 8, rng);
  const WPlusCode ref = testing::random_latent(12, 8, rng);
  const WPlusCode dir = testing::random_latent(12, 8, rng);
  TransferOptions options;
  options.alpha = 0.5;
  options.edits.push_back({"d", dir, 0.8});
  const TransferResult edit_first = transfer_latent(w, pair.g_a, ref, options);
  EXPECT_EQ(edit_first.w_hat, style_mix(apply_edit(w, dir, 0.8), ref, 0.5));
  options.order = EditOrder::kMixThenEdits;
  const TransferResult mix_first = transfer_latent(w, pair.g_a, ref, options);
  EXPECT_EQ(mix_first.w_hat, apply_edit(style_mix(w, ref, 0.5), dir, 0.8));
  EXPECT_NE(edit_first.w_hat, mix_first.w_hat);
  EXPECT_EQ(mix_first.image, pair.g_a.generate(mix_first.w_hat));

  options.enable_mixing = false;
  EXPECT_EQ(transfer_latent(w, pair.g_a, ref, options).w_hat, apply_edit(w, dir, 0.8));
}

TEST(TransferImage, IdentityPipelineReconstructs) {
  auto pair = testing::make_toy_pair(3);
  const WPlusCode w = sample_codes(pair.g_a, 40, 1)[0];
  const ImageTensor img = pair.g_a.generate(w);
  AdaptConfig config;
  config.iterations = 0;
  config.seed = 3;
  const ImageTensor ref_img = testing::synthetic_reference(pair.g_a, 3);
  const ReferenceBundle bundle = prepare_reference(ref_img, pair.g_a, *pair.backends.embedder,
                                                   *pair.backends.metric, config);
  const AdaptResult trained = adapt(pair.g_a, *pair.backends.embedder, *pair.backends.metric,
                                    bundle, config);
  const Generator g_b{pair.g_a.backend, trained.g_b};
  TransferOptions options;
  options.alpha = 0.0;
  options.inversion.lambda = 1e-3;
  const TransferResult r = transfer_image(img, pair.g_a, g_b, *pair.backends.metric, bundle.w_ref,
                                          options);
  EXPECT_EQ(r.w_hat, r.w_real);
  EXPECT_LT(mean_squared_error(r.image, img), 1e-3);
}

// A toy run on the synthetic domain pair shared by the property checks below.
class TrainedTransferTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    pair_ = new testing::ToyPair(testing::make_toy_pair(1));
    AdaptConfig config;
    config.iterations = 300;
    config.seed = 1;
    bundle_ = new ReferenceBundle(prepare_reference(testing::synthetic_reference(pair_->g_a, 1),
                                                    pair_->g_a, *pair_->backends.embedder,
                                                    *pair_->backends.metric, config));
    g_b_ = new Generator{pair_->g_a.backend,
                         adapt(pair_->g_a, *pair_->backends.embedder, *pair_->backends.metric,
                               *bundle_, config)
                             .g_b};
  }
  static void TearDownTestSuite() {
    delete g_b_;
    delete bundle_;
    delete pair_;
  }

  static testing::ToyPair* pair_;
  static ReferenceBundle* bundle_;
  static Generator* g_b_;
};

testing::ToyPair* TrainedTransferTest::pair_ = nullptr;
ReferenceBundle* TrainedTransferTest::bundle_ = nullptr;
Generator* TrainedTransferTest::g_b_ = nullptr;

// Averaged over held-out codes, similarity to the reference grows with alpha.
TEST_F(TrainedTransferTest, AlphaSweepRaisesReferenceSimilarity) {
  const auto held_out = sample_codes(pair_->g_a, 999, 16);
  const auto& emb = *pair_->backends.embedder;
  double previous = -2.0;
  for (double alpha : {0.0, 0.25, 0.5, 0.75, 1.0}) {
    TransferOptions options;
    options.alpha = alpha;
    double mean = 0.0;
    for (const auto& w : held_out) {
      const TransferResult r = transfer_latent(w, *g_b_, bundle_->w_ref, options);
      mean += cosine_sim(emb.embed(r.image).values, bundle_->embed_b.values) / 16.0;
    }
    EXPECT_GE(mean, previous) << "alpha " << alpha;
    previous = mean;
  }
}

TEST_F(TrainedTransferTest, EditsCarryOverToAdaptedDomain) {
  const LatentPriorStats stats = estimate_latent_prior(pair_->g_a, 4096, 5);
  const auto held_out = sample_codes(pair_->g_a, 999, 8);
  const auto targets = sample_codes(pair_->g_a, 555, 8);
  const auto& emb = *pair_->backends.embedder;
  for (std::size_t i = 0; i < 8; ++i) {
    WPlusCode dir = targets[i];
    for (std::size_t l = 0; l < 12; ++l) {
      for (std::size_t k = 0; k < 8; ++k) dir.block(l)[k] -= stats.mean(static_cast<Eigen::Index>(k));
    }
    const WPlusCode& w = held_out[i];
    const WPlusCode edited = apply_edit(w, dir, 1.0);
    const auto change_a = emb.embed(pair_->g_a.generate(edited)) - emb.embed(pair_->g_a.generate(w));
    const auto change_b = emb.embed(g_b_->generate(edited)) - emb.embed(g_b_->generate(w));
    EXPECT_GT(cosine_sim(change_a.values, change_b.values), 0.0) << "code " << i;
  }
}

TEST_F(TrainedTransferTest, TransferIsPure) {
  const WPlusCode w = sample_codes(pair_->g_a, 7, 1)[0];
  TransferOptions options;
  options.alpha = 0.6;
  const TransferResult a = transfer_latent(w, *g_b_, bundle_->w_ref, options);
  options.alpha = 1.0;
  (void)transfer_latent(w, *g_b_, bundle_->w_ref, options);
  options.alpha = 0.6;
  const TransferResult b = transfer_latent(w, *g_b_, bundle_->w_ref, options);
  EXPECT_TRUE(bit_equal(a.image.pixels(), b.image.pixels()));
}

}  // namespace
}  // namespace ganshift

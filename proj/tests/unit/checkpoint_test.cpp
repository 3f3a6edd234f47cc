#include <filesystem>
#include <fstream>
#include <iterator>
#include <random>

#include <gtest/gtest.h>

#include "ganshift/error.hpp"
#include "ganshift/service/checkpoint.hpp"
#include "ganshift/service/hashing.hpp"
#include "ganshift/service/image_io.hpp"
#include "ganshift/service/latent_io.hpp"
#include "ganshift/trainer.hpp"
#include "test_support.hpp"

namespace ganshift::service {
namespace {

using ganshift::testing::bit_equal;
using ganshift::testing::TempDir;
namespace fs = std::filesystem;

std::vector<char> slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void dump(const std::string& path, const std::vector<char>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

Checkpoint toy_checkpoint(std::uint64_t seed) {
  const ToyGeneratorBackend backend(seed);
  Checkpoint ck;
  ck.info.backend = "toy";
  ck.info.backend_seed = seed;
  ck.info.shape = backend.shape();
  ck.params = backend.initial_params();
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  for (auto& leaf : ck.params.leaves()) {
    for (double& v : leaf.values) v += 1e-3 * normal(rng);
  }
  return ck;
}

TEST(Hashing, KnownDigests) {
  EXPECT_EQ(sha256_hex(std::string_view("")),
            "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  EXPECT_EQ(sha256_hex(std::string_view("abc")),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST(Checkpoint, Float64RoundTripIsBitExact) {
  TempDir dir;
  Checkpoint ck = toy_checkpoint(3);
  AdaptConfig config;
  config.iterations = 77;
  config.lambda_clip_within = 0.123456789;
  ck.info.config = config;
  ck.info.parent_hash = std::string(64, 'a');
  std::mt19937_64 rng(1);
  ck.info.reference_latent = ganshift::testing::random_latent(12, 8, rng);
  ck.info.reference_sha256 = std::string(64, 'b');
  const std::string hash = save_checkpoint(dir.file("g.ckpt"), ck);

  const Checkpoint loaded = load_checkpoint(dir.file("g.ckpt"));
  ASSERT_TRUE(loaded.params.same_structure(ck.params));
  for (std::size_t i = 0; i < ck.params.leaf_count(); ++i) {
    EXPECT_TRUE(bit_equal(loaded.params.leaves()[i].values, ck.params.leaves()[i].values));
  }
  EXPECT_EQ(loaded.info.body_sha256, hash);
  EXPECT_EQ(loaded.info.backend, "toy");
  EXPECT_EQ(loaded.info.backend_seed, 3u);
  EXPECT_EQ(loaded.info.shape, ck.info.shape);
  ASSERT_TRUE(loaded.info.config);
  EXPECT_EQ(*loaded.info.config, config);
  EXPECT_EQ(loaded.info.parent_hash, ck.info.parent_hash);
  ASSERT_TRUE(loaded.info.reference_latent);
  EXPECT_TRUE(bit_equal(loaded.info.reference_latent->data(), ck.info.reference_latent->data()));
  EXPECT_FALSE(loaded.info.created.empty());

  // Same content, same body hash.
  EXPECT_EQ(save_checkpoint(dir.file("h.ckpt"), ck), hash);
}

TEST(Checkpoint, Float32StoresRoundedValues) {
  TempDir dir;
  const Checkpoint ck = toy_checkpoint(4);
  save_checkpoint(dir.file("g32.ckpt"), ck, ValueType::kFloat32);
  save_checkpoint(dir.file("g64.ckpt"), ck, ValueType::kFloat64);
  EXPECT_LT(fs::file_size(dir.file("g32.ckpt")), fs::file_size(dir.file("g64.ckpt")));
  const Checkpoint loaded = load_checkpoint(dir.file("g32.ckpt"));
  for (std::size_t i = 0; i < ck.params.leaf_count(); ++i) {
    const auto& a = ck.params.leaves()[i].values;
    const auto& b = loaded.params.leaves()[i].values;
    for (std::size_t k = 0; k < a.size(); ++k) {
      EXPECT_EQ(b[k], static_cast<double>(static_cast<float>(a[k])));
    }
  }
  EXPECT_EQ(read_container_header(dir.file("g32.ckpt")).at("dtype"), "f32");
}

TEST(Checkpoint, DetectsCorruption) {
  TempDir dir;
  const std::string path = dir.file("g.ckpt");
  save_checkpoint(path, toy_checkpoint(5));
  const std::vector<char> good = slurp(path);

  std::vector<char> flipped = good;
  flipped[flipped.size() - 9] ^= 0x01;
  dump(path, flipped);
  EXPECT_THROW(load_checkpoint(path), IoError);

  std::vector<char> truncated(good.begin(), good.end() - 8);
  dump(path, truncated);
  EXPECT_THROW(load_checkpoint(path), IoError);

  std::vector<char> trailing = good;
  trailing.push_back('x');
  dump(path, trailing);
  EXPECT_THROW(load_checkpoint(path), IoError);

  std::vector<char> magic = good;
  magic[0] = 'X';
  dump(path, magic);
  EXPECT_THROW(load_checkpoint(path), IoError);

  std::vector<char> version = good;
  version[4] = 9;
  dump(path, version);
  EXPECT_THROW(load_checkpoint(path), IoError);

  dump(path, good);
  EXPECT_NO_THROW(load_checkpoint(path));
  EXPECT_THROW(load_checkpoint(dir.file("missing.ckpt")), IoError);
}

// A dims mismatch is reported even when the body is unreadable, so it is
// caught before any tensor is loaded.
TEST(Checkpoint, DimsMismatchFailsBeforeBodyIsRead) {
  TempDir dir;
  const std::string path = dir.file("g.ckpt");
  Checkpoint ck = toy_checkpoint(6);
  ck.info.shape.layer_count = 13;
  save_checkpoint(path, ck);
  std::vector<char> bytes = slurp(path);
  bytes[bytes.size() - 1] ^= 0x40;
  dump(path, bytes);
  EXPECT_THROW(load_generator(path), DimensionError);
}

TEST(Checkpoint, LoadGeneratorChecksStructure) {
  TempDir dir;
  Checkpoint ck = toy_checkpoint(7);
  save_checkpoint(dir.file("ok.ckpt"), ck);
  BackendSet set;
  CheckpointInfo info;
  const Generator g = load_generator(dir.file("ok.ckpt"), &set, &info);
  EXPECT_EQ(g.params, ck.params);
  EXPECT_EQ(set.generator->seed(), 7u);
  EXPECT_EQ(info.backend, "toy");

  GeneratorParams fewer;
  for (std::size_t i = 0; i + 1 < ck.params.leaf_count(); ++i) fewer.add(ck.params.leaves()[i]);
  ck.params = fewer;
  save_checkpoint(dir.file("bad.ckpt"), ck);
  EXPECT_THROW(load_generator(dir.file("bad.ckpt")), DimensionError);

  Checkpoint other = toy_checkpoint(7);
  other.info.backend = "no_such_backend";
  save_checkpoint(dir.file("unknown.ckpt"), other);
  EXPECT_THROW(load_generator(dir.file("unknown.ckpt")), ConfigError);
}

TEST(TrainState, RoundTripRestoresEverything) {
  TempDir dir;
  auto pair = ganshift::testing::make_toy_pair(8);
  AdaptConfig config;
  config.seed = 8;
  config.iterations = 6;
  config.inversion_steps = 50;
  const ReferenceBundle bundle = prepare_reference(
      ganshift::testing::synthetic_reference(pair.g_a, 8), pair.g_a, *pair.backends.embedder,
      *pair.backends.metric, config);
  std::optional<TrainState> captured;
  AdaptHooks hooks;
  hooks.checkpoint_every = 4;
  hooks.on_checkpoint = [&](const TrainState& s) {
    if (s.step == 4) captured = s;
  };
  adapt(pair.g_a, *pair.backends.embedder, *pair.backends.metric, bundle, config, hooks);
  ASSERT_TRUE(captured);

  const std::string path = dir.file("state.ckpt");
  save_train_state(path, *captured, config);
  AdaptConfig longer = config;
  longer.iterations = 100;
  const TrainState loaded = load_train_state(path, longer);
  EXPECT_EQ(loaded.step, 4);
  EXPECT_EQ(loaded.g_b, captured->g_b);
  EXPECT_EQ(loaded.optimizer, captured->optimizer);
  EXPECT_EQ(loaded.rng_state, captured->rng_state);
  ASSERT_EQ(loaded.history.size(), 4u);
  for (std::size_t k = 0; k < 4; ++k) {
    EXPECT_EQ(loaded.history[k].total, captured->history[k].total);
    EXPECT_EQ(loaded.history[k].weights, captured->history[k].weights);
  }

  AdaptConfig different = config;
  different.lambda_ref_clip = 31.0;
  EXPECT_THROW(load_train_state(path, different), ConfigError);
  EXPECT_THROW(load_checkpoint(path), IoError);
}

TEST(ConfigJson, RoundTripAndOverrides) {
  AdaptConfig config;
  config.seed = 12345678901234ull;
  config.anchor_mode = AnchorMode::kDomainMean;
  config.enable_style_mixing = false;
  const nlohmann::json j = config_to_json(config);
  EXPECT_EQ(j.at("iterations"), 600);
  EXPECT_EQ(j.at("optimizer_betas"), nlohmann::json::array({0.0, 0.99}));
  EXPECT_EQ(config_from_json(j), config);

  const AdaptConfig o = config_from_json({{"iterations", 10}, {"lambda_ref_clip", 5.5}});
  EXPECT_EQ(o.iterations, 10);
  EXPECT_EQ(o.lambda_ref_clip, 5.5);
  EXPECT_THROW(config_from_json({{"no_such_key", 1}}), ConfigError);
  EXPECT_THROW(config_from_json(nlohmann::json::array()), ConfigError);
}

TEST(LossJson, RoundTrip) {
  const LossBreakdown b = total_loss({0.5, 0.25, 0.125, 1.0 / 3.0}, AdaptConfig{});
  const nlohmann::json j = loss_to_json(b, 7);
  EXPECT_EQ(j.at("step"), 7);
  const LossBreakdown back = loss_from_json(j);
  EXPECT_EQ(back.total, b.total);
  EXPECT_EQ(back.ref_rec, b.ref_rec);
  EXPECT_EQ(back.weights, b.weights);
}

TEST(LatentJson, RoundTripAndValidation) {
  TempDir dir;
  std::mt19937_64 rng(9);
  const WPlusCode w = ganshift::testing::random_latent(12, 8, rng);
  write_latent_file(dir.file("w.json"), w, "probe");
  const LatentFile f = read_latent_file(dir.file("w.json"));
  EXPECT_TRUE(bit_equal(f.latent.data(), w.data()));
  EXPECT_EQ(f.name, "probe");

  nlohmann::json j = latent_to_json(w, "x");
  EXPECT_EQ(j.at("L"), 12);
  EXPECT_EQ(j.at("D"), 8);
  j["L"] = 11;
  EXPECT_THROW(latent_from_json(j), DimensionError);
  j = latent_to_json(w, "x");
  j["blocks"][3].erase(0);
  EXPECT_THROW(latent_from_json(j), DimensionError);
  j = latent_to_json(w, "x");
  j["format_version"] = 2;
  EXPECT_THROW(latent_from_json(j), IoError);
  EXPECT_THROW(latent_from_json(nlohmann::json{{"L", "twelve"}}), IoError);
  EXPECT_THROW(read_latent_file(dir.file("missing.json")), IoError);
}

TEST(AtomicWrite, LeavesNoTemporaryFiles) {
  TempDir dir;
  write_text_atomic(dir.file("a.txt"), "hello");
  write_text_atomic(dir.file("a.txt"), "world");
  EXPECT_EQ(read_text_file(dir.file("a.txt")), "world");
  std::size_t count = 0;
  for (const auto& e : fs::directory_iterator(dir.path())) {
    (void)e;
    ++count;
  }
  EXPECT_EQ(count, 1u);
  EXPECT_NE(temp_sibling("x"), temp_sibling("x"));
}

TEST(Png, RoundTripWithinQuantization) {
  TempDir dir;
  std::mt19937_64 rng(10);
  const ImageTensor img = ganshift::testing::random_image(16, 16, 3, rng, 1.0);
  write_png(dir.file("img.png"), img);
  const ImageTensor back = read_png(dir.file("img.png"));
  ASSERT_TRUE(back.same_shape(img));
  for (std::size_t i = 0; i < img.size(); ++i) {
    EXPECT_NEAR(back.pixels()[i], img.pixels()[i], 1.0 / 127.5);
  }
  // Already quantized values survive exactly.
  EXPECT_EQ(decode_png(encode_png(back)), back);
}

TEST(Png, ClampsAndRejects) {
  ImageTensor img(2, 2, 3, 5.0, ValueRange{-10.0, 10.0});
  const ImageTensor back = decode_png(encode_png(img));
  for (double v : back.pixels()) EXPECT_EQ(v, 1.0);
  EXPECT_THROW(decode_png({1, 2, 3, 4}), IoError);
  EXPECT_THROW(encode_png(ImageTensor(2, 2, 1)), DimensionError);
  img.pixels()[0] = NAN;
  EXPECT_THROW(encode_png(img), NumericalError);
}

TEST(Png, FitImageResizes) {
  const ImageTensor img(32, 24, 3, 0.5);
  const ImageTensor fitted = fit_image(img, 16, 16);
  EXPECT_EQ(fitted.height(), 16u);
  EXPECT_EQ(fitted.width(), 16u);
  for (double v : fitted.pixels()) EXPECT_NEAR(v, 0.5, 1e-12);
  const ImageTensor same(16, 16, 3, 0.1);
  EXPECT_EQ(fit_image(same, 16, 16), same);
}

}  // namespace
}  // namespace ganshift::service

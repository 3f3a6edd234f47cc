#include <sys/wait.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <gtest/gtest.h>

#include "ganshift/service/checkpoint.hpp"
#include "ganshift/service/hashing.hpp"
#include "ganshift/service/image_io.hpp"
#include "ganshift/service/latent_io.hpp"
#include "ganshift/service/workflows.hpp"
#include "ganshift/transfer.hpp"
#include "test_support.hpp"

namespace ganshift::service {
namespace {

namespace fs = std::filesystem;
using ganshift::testing::TempDir;

struct CommandResult {
  int exit_code = -1;
  std::string out;
  std::string err;
};

CommandResult run_cli(const std::string& args, const TempDir& dir) {
  const std::string err_path = dir.file("stderr.txt");
  const std::string cmd = std::string("'") + GANSHIFT_CLI_PATH + "' " + args + " 2>'" + err_path + "'";
  CommandResult r;
  FILE* pipe = popen(cmd.c_str(), "r");
  if (!pipe) return r;
  char buf[512];
  while (std::fgets(buf, sizeof buf, pipe)) r.out += buf;
  const int status = pclose(pipe);
  r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.err = read_text_file(err_path);
  return r;
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    auto pair = ganshift::testing::make_toy_pair(1);
    write_png(dir_.file("ref.png"), ganshift::testing::synthetic_reference(pair.g_a, 1));
    write_png(dir_.file("real.png"), pair.g_a.generate(sample_codes(pair.g_a, 31, 1)[0]));
    ASSERT_EQ(run_cli("init-base --seed 1 --out '" + dir_.file("base.ckpt") + "'", dir_).exit_code, 0);
  }

  std::string q(const std::string& name) const { return "'" + dir_.file(name) + "'"; }

  TempDir dir_;
};

TEST_F(CliTest, DefaultAdaptRecordsPublishedConfiguration) {
  const auto r = run_cli("adapt --reference " + q("ref.png") + " --base " + q("base.ckpt") +
                             " --out " + q("run") + " --seed 4",
                         dir_);
  ASSERT_EQ(r.exit_code, 0) << r.err;
  EXPECT_NE(r.out.find("manifest "), std::string::npos);
  EXPECT_NE(r.out.find(" seed 4"), std::string::npos);

  const auto manifest = nlohmann::json::parse(read_text_file(dir_.file("run/manifest.json")));
  const auto& config = manifest.at("config");
  EXPECT_EQ(config.at("iterations"), 600);
  EXPECT_EQ(config.at("batch_size"), 4);
  EXPECT_EQ(config.at("lambda_clip_within"), 0.5);
  EXPECT_EQ(config.at("lambda_ref_clip"), 30.0);
  EXPECT_EQ(config.at("lambda_ref_rec"), 10.0);
  EXPECT_EQ(config.at("mix_boundary_m"), 7);
  EXPECT_EQ(config.at("inversion_lambda"), 0.01);
  EXPECT_EQ(manifest.at("seed"), 4);
  EXPECT_EQ(manifest.at("reference_sha256"), sha256_file(dir_.file("ref.png")));

  std::ifstream history(dir_.file("run/history.jsonl"));
  std::size_t lines = 0;
  for (std::string line; std::getline(history, line);) lines += !line.empty();
  EXPECT_EQ(lines, 600u);
  EXPECT_TRUE(fs::exists(dir_.file("run/checkpoints/step_000600.ckpt")));
  const CheckpointInfo info = load_checkpoint_info(dir_.file("run/adapted.ckpt"));
  EXPECT_EQ(info.manifest_sha256, manifest_hash(manifest));
  EXPECT_EQ(info.parent_hash, load_checkpoint_info(dir_.file("base.ckpt")).body_sha256);
}

TEST_F(CliTest, AdaptThenTransferWritesPng) {
  auto r = run_cli("adapt --reference " + q("ref.png") + " --base " + q("base.ckpt") + " --out " +
                       q("run") + " --iterations 60 --seed 2 --inversion_steps 100",
                   dir_);
  ASSERT_EQ(r.exit_code, 0) << r.err;
  r = run_cli("transfer --image " + q("real.png") + " --base " + q("base.ckpt") + " --adapted " +
                  q("run/adapted.ckpt") + " --alpha 0.5 --steps 50 --latent-out " + q("w.json") +
                  " --out " + q("out.png"),
              dir_);
  ASSERT_EQ(r.exit_code, 0) << r.err;
  const ImageTensor img = read_png(dir_.file("out.png"));
  EXPECT_EQ(img.height(), 16u);
  EXPECT_EQ(img.width(), 16u);
  EXPECT_EQ(img.channels(), 3u);
  EXPECT_EQ(read_latent_file(dir_.file("w.json")).latent.layer_count(), 12u);

  // render of the written latent reproduces the transfer output.
  r = run_cli("render --ckpt " + q("run/adapted.ckpt") + " --latent " + q("w.json") + " --out " +
                  q("again.png"),
              dir_);
  ASSERT_EQ(r.exit_code, 0) << r.err;
  EXPECT_EQ(read_text_file(dir_.file("again.png")), read_text_file(dir_.file("out.png")));
}

TEST_F(CliTest, InvertMixAndEdit) {
  auto r = run_cli("invert --image " + q("real.png") + " --ckpt " + q("base.ckpt") +
                       " --steps 30 --seed 1 --out " + q("w.json"),
                   dir_);
  ASSERT_EQ(r.exit_code, 0) << r.err;
  r = run_cli("invert --image " + q("ref.png") + " --ckpt " + q("base.ckpt") +
                  " --steps 30 --seed 1 --out " + q("ref.json"),
              dir_);
  ASSERT_EQ(r.exit_code, 0) << r.err;

  r = run_cli("mix --latent " + q("w.json") + " --ref-latent " + q("ref.json") +
                  " --alpha 0 --out " + q("mixed.json"),
              dir_);
  ASSERT_EQ(r.exit_code, 0) << r.err;
  const WPlusCode w = read_latent_file(dir_.file("w.json")).latent;
  const WPlusCode ref = read_latent_file(dir_.file("ref.json")).latent;
  EXPECT_TRUE(ganshift::testing::bit_equal(read_latent_file(dir_.file("mixed.json")).latent.data(),
                                           w.data()));

  r = run_cli("mix --latent " + q("w.json") + " --ref-latent " + q("ref.json") +
                  " --alpha 0.5 --m 3 --out " + q("half.json"),
              dir_);
  ASSERT_EQ(r.exit_code, 0) << r.err;
  EXPECT_EQ(read_latent_file(dir_.file("half.json")).latent, style_mix(w, ref, 0.5, 3));

  r = run_cli("edit --latent " + q("w.json") + " --direction " + q("ref.json") +
                  " --magnitude 0.25 --out " + q("edited.json"),
              dir_);
  ASSERT_EQ(r.exit_code, 0) << r.err;
  EXPECT_EQ(read_latent_file(dir_.file("edited.json")).latent, apply_edit(w, ref, 0.25));
}

bool has_error_line(const std::string& err) {
  return err.rfind("ganshift: error: ", 0) == 0 || err.find("\nganshift: error: ") != std::string::npos;
}

TEST_F(CliTest, ErrorsExitNonZeroWithoutPartialOutputs) {
  auto r = run_cli("adapt --reference " + q("ref.png") + " --base " + q("base.ckpt") + " --out " +
                       q("bad_m") + " --mix_boundary_m 40",
                   dir_);
  EXPECT_EQ(r.exit_code, 1);
  EXPECT_TRUE(has_error_line(r.err)) << r.err;
  EXPECT_FALSE(fs::exists(dir_.file("bad_m")));

  r = run_cli("adapt --reference " + q("ref.png") + " --base " + q("base.ckpt") + " --out " +
                  q("bad_key") + " --iterations -5",
              dir_);
  EXPECT_EQ(r.exit_code, 1);
  EXPECT_FALSE(fs::exists(dir_.file("bad_key")));

  r = run_cli("invert --image " + q("real.png") + " --ckpt " + q("base.ckpt") +
                  " --steps 5 --seed 1 --out " + q("w.json"),
              dir_);
  ASSERT_EQ(r.exit_code, 0) << r.err;
  r = run_cli("mix --latent " + q("w.json") + " --ref-latent " + q("w.json") +
                  " --alpha 2 --out " + q("never.json"),
              dir_);
  EXPECT_EQ(r.exit_code, 1);
  EXPECT_NE(r.err.find("alpha"), std::string::npos) << r.err;
  EXPECT_FALSE(fs::exists(dir_.file("never.json")));

  r = run_cli("render --ckpt " + q("ref.png") + " --latent " + q("w.json") + " --out " +
                  q("never.png"),
              dir_);
  EXPECT_EQ(r.exit_code, 1);
  EXPECT_FALSE(fs::exists(dir_.file("never.png")));

  r = run_cli("transfer --image " + q("real.png") + " --base " + q("base.ckpt") + " --adapted " +
                  q("base.ckpt") + " --alpha 0.5 --out " + q("never.png"),
              dir_);
  EXPECT_EQ(r.exit_code, 1);
  EXPECT_NE(r.err.find("reference latent"), std::string::npos) << r.err;
  EXPECT_FALSE(fs::exists(dir_.file("never.png")));
}

// A run stopped at step 20 and resumed to 30 matches an uninterrupted 30-step run.
TEST_F(CliTest, ResumeMatchesUninterruptedRun) {
  const std::string common = "adapt --reference " + q("ref.png") + " --base " + q("base.ckpt") +
                             " --inversion_steps 50 --checkpoint-every 10";
  auto r = run_cli(common + " --out " + q("full") + " --iterations 30 --seed 3", dir_);
  ASSERT_EQ(r.exit_code, 0) << r.err;
  r = run_cli(common + " --out " + q("part") + " --iterations 20 --seed 3", dir_);
  ASSERT_EQ(r.exit_code, 0) << r.err;
  r = run_cli(common + " --out " + q("part") + " --iterations 30 --resume", dir_);
  ASSERT_EQ(r.exit_code, 0) << r.err;
  EXPECT_NE(r.out.find(" seed 3"), std::string::npos) << r.out;

  EXPECT_EQ(load_checkpoint(dir_.file("part/adapted.ckpt")).params,
            load_checkpoint(dir_.file("full/adapted.ckpt")).params);
  EXPECT_EQ(read_text_file(dir_.file("part/history.jsonl")),
            read_text_file(dir_.file("full/history.jsonl")));
}

}  // namespace
}  // namespace ganshift::service

#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "ganshift/backends.hpp"
#include "ganshift/config.hpp"
#include "ganshift/service/checkpoint.hpp"
#include "ganshift/trainer.hpp"
#include "ganshift/transfer.hpp"

namespace ganshift::service {

// File names inside an adaptation output directory.
inline constexpr const char* kManifestFile = "manifest.json";
inline constexpr const char* kHistoryFile = "history.jsonl";
inline constexpr const char* kReferenceLatentFile = "reference_latent.json";
inline constexpr const char* kTrainStateFile = "train_state.ckpt";
inline constexpr const char* kAdaptedFile = "adapted.ckpt";
inline constexpr const char* kCheckpointDir = "checkpoints";

// Seed derived from the wall clock, for runs that were not given one.
std::uint64_t time_seed();

// Writes the base generator of a backend as a checkpoint. Returns its body hash.
std::string init_base_checkpoint(const std::string& path, const std::string& backend,
                                 std::uint64_t backend_seed, ValueType type = ValueType::kFloat64);

nlohmann::json make_manifest(const AdaptConfig& config, const CheckpointInfo& base,
                             const std::string& reference_sha256);
std::string manifest_hash(const nlohmann::json& manifest);

struct AdaptRun {
  std::string base_checkpoint;
  ImageTensor reference;         // any size; resized to the backend's output
  std::string reference_sha256;  // hash of the encoded reference file
  AdaptConfig config;
  std::string out_dir;
  // Required backend name; empty accepts whatever the base checkpoint names.
  std::string backend;
  bool resume = false;
  std::int64_t checkpoint_every = 100;
  ValueType dtype = ValueType::kFloat64;
  std::function<void(const TrainState&)> on_step;
  std::function<bool()> should_stop;
};

struct AdaptRunResult {
  bool completed = false;
  std::int64_t steps = 0;
  std::string adapted_checkpoint;  // empty unless completed
  std::string manifest_sha256;
  std::vector<LossBreakdown> history;
};

// prepare_reference + adapt with every artifact written to run.out_dir. With
// `resume`, continues from train_state.ckpt when present.
AdaptRunResult run_adaptation(const AdaptRun& run);

// Removes files an adaptation run writes into `dir`, and `dir` itself when it
// ends up empty.
void remove_adaptation_outputs(const std::string& dir);

struct LoadedModel {
  std::string path;
  CheckpointInfo info;
  BackendSet backends;
  Generator generator;
};

LoadedModel load_model(const std::string& path);

// Rejects pairs that do not share backend and dims; warns when the adapted
// checkpoint was not trained from this base.
void check_model_pair(const LoadedModel& base, const LoadedModel& adapted);

// Style boundary and mixing switch recorded in an adapted checkpoint.
TransferOptions transfer_defaults(const LoadedModel& adapted);
const WPlusCode& reference_latent(const LoadedModel& adapted);

}  // namespace ganshift::service

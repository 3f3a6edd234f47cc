#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "ganshift/backends.hpp"
#include "ganshift/config.hpp"
#include "ganshift/core.hpp"
#include "ganshift/params.hpp"
#include "ganshift/trainer.hpp"

namespace ganshift::service {

inline constexpr std::uint32_t kCheckpointVersion = 1;

enum class ValueType { kFloat64, kFloat32 };

std::string to_string(ValueType type);
ValueType value_type_from_string(const std::string& text);

// One named flat array in a container body.
struct ArrayRecord {
  std::string name;
  std::string group;
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> values;
};

// Binary container: "GSCK", u32 version, u64 header length, JSON header,
// then every array's values back to back in little-endian order. The header
// carries the array table and the SHA-256 of the body.
struct Container {
  nlohmann::json header = nlohmann::json::object();
  std::vector<ArrayRecord> arrays;
};

// Writes to a temporary sibling and renames it into place. Returns the body hash.
std::string write_container(const std::string& path, Container container,
                            ValueType type = ValueType::kFloat64);

// Verifies magic, version, body length and hash.
Container read_container(const std::string& path);
nlohmann::json read_container_header(const std::string& path);

struct CheckpointInfo {
  std::string backend;
  std::uint64_t backend_seed = 0;
  GeneratorShape shape;
  std::optional<AdaptConfig> config;
  std::string parent_hash;    // body hash of the checkpoint this was trained from
  std::string created;        // UTC, ISO 8601
  std::optional<WPlusCode> reference_latent;
  std::string reference_sha256;
  std::string manifest_sha256;
  std::string body_sha256;    // filled in on load
};

struct Checkpoint {
  CheckpointInfo info;
  GeneratorParams params;
};

std::string save_checkpoint(const std::string& path, const Checkpoint& checkpoint,
                            ValueType type = ValueType::kFloat64);
Checkpoint load_checkpoint(const std::string& path);
CheckpointInfo load_checkpoint_info(const std::string& path);

// Instantiates the checkpoint's backend and checks that its declared dims and
// parameter structure match the header. Dims are compared before any tensor
// is read into the generator.
Generator load_generator(const std::string& path, BackendSet* backends = nullptr,
                         CheckpointInfo* info = nullptr);

// Trainer state for resuming an interrupted run.
std::string save_train_state(const std::string& path, const TrainState& state,
                             const AdaptConfig& config);
TrainState load_train_state(const std::string& path, const AdaptConfig& config);

std::string utc_timestamp();

nlohmann::json shape_to_json(const GeneratorShape& shape);
GeneratorShape shape_from_json(const nlohmann::json& j);

nlohmann::json config_to_json(const AdaptConfig& config);
// Applies a JSON object of overrides; unknown keys throw ConfigError.
AdaptConfig config_from_json(const nlohmann::json& j, AdaptConfig base = {});

nlohmann::json loss_to_json(const LossBreakdown& loss, std::int64_t step);
LossBreakdown loss_from_json(const nlohmann::json& j);

}  // namespace ganshift::service

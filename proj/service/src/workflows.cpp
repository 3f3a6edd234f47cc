#include "ganshift/service/workflows.hpp"

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "ganshift/error.hpp"
#include "ganshift/log.hpp"
#include "ganshift/service/hashing.hpp"
#include "ganshift/service/image_io.hpp"
#include "ganshift/service/latent_io.hpp"

namespace ganshift::service {
namespace fs = std::filesystem;
using nlohmann::json;

std::uint64_t time_seed() {
  const auto ns = std::chrono::duration_cast<std::chrono::nanoseconds>(
                      std::chrono::system_clock::now().time_since_epoch())
                      .count();
  // splitmix64 finalizer so consecutive calls differ in every bit
  auto z = static_cast<std::uint64_t>(ns) + 0x9e3779b97f4a7c15ull;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

std::string init_base_checkpoint(const std::string& path, const std::string& backend,
                                 std::uint64_t backend_seed, ValueType type) {
  const BackendSet set = BackendRegistry::instance().create(backend, backend_seed);
  Checkpoint ck;
  ck.info.backend = backend;
  ck.info.backend_seed = backend_seed;
  ck.info.shape = set.generator->shape();
  ck.params = set.generator->initial_params();
  return save_checkpoint(path, ck, type);
}

json make_manifest(const AdaptConfig& config, const CheckpointInfo& base,
                   const std::string& reference_sha256) {
  return {{"format_version", 1},
          {"backend", base.backend},
          {"backend_seed", base.backend_seed},
          {"dims", shape_to_json(base.shape)},
          {"base_checkpoint_sha256", base.body_sha256},
          {"reference_sha256", reference_sha256},
          {"seed", config.seed},
          {"config", config_to_json(config)}};
}

std::string manifest_hash(const json& manifest) { return sha256_hex(manifest.dump()); }

namespace {

std::string step_name(std::int64_t step) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "step_%06lld.ckpt", static_cast<long long>(step));
  return buf;
}

}  // namespace

AdaptRunResult run_adaptation(const AdaptRun& run) {
  CheckpointInfo base_info;
  BackendSet backends;
  const Generator g_a = load_generator(run.base_checkpoint, &backends, &base_info);
  if (!run.backend.empty() && run.backend != base_info.backend) {
    throw ConfigError("base checkpoint uses backend '" + base_info.backend + "', not '" +
                      run.backend + "'");
  }
  const GeneratorShape shape = g_a.shape();
  run.config.validate(shape.layer_count);
  if (run.reference.channels() != shape.channels) {
    throw DimensionError("reference image has " + std::to_string(run.reference.channels()) +
                         " channels, backend expects " + std::to_string(shape.channels));
  }
  const ImageTensor img_b = fit_image(run.reference, shape.height, shape.width);

  const fs::path out(run.out_dir);
  fs::create_directories(out / kCheckpointDir);
  const json manifest = make_manifest(run.config, base_info, run.reference_sha256);
  AdaptRunResult result;
  result.manifest_sha256 = manifest_hash(manifest);

  const fs::path state_path = out / kTrainStateFile;
  const fs::path latent_path = out / kReferenceLatentFile;
  std::optional<TrainState> resume;
  ReferenceBundle bundle;
  if (run.resume && fs::exists(state_path)) {
    if (!fs::exists(latent_path)) {
      throw IoError("cannot resume: '" + latent_path.string() + "' is missing");
    }
    resume = load_train_state(state_path.string(), run.config);
    bundle = assemble_reference(img_b, read_latent_file(latent_path.string()).latent, g_a,
                                *backends.embedder, run.config);
    log_info("resuming from step " + std::to_string(resume->step));
  } else {
    bundle = prepare_reference(img_b, g_a, *backends.embedder, *backends.metric, run.config);
    write_latent_file(latent_path.string(), bundle.w_ref, "w_ref");
  }
  write_text_atomic((out / kManifestFile).string(), manifest.dump(2) + "\n");

  const fs::path history_path = out / kHistoryFile;
  std::ofstream history(history_path, std::ios::trunc);
  if (!history) throw IoError("cannot write '" + history_path.string() + "'");
  if (resume) {
    for (std::size_t k = 0; k < resume->history.size(); ++k) {
      history << loss_to_json(resume->history[k], static_cast<std::int64_t>(k + 1)).dump() << '\n';
    }
    history.flush();
  }

  CheckpointInfo adapted_info;
  adapted_info.backend = base_info.backend;
  adapted_info.backend_seed = base_info.backend_seed;
  adapted_info.shape = shape;
  adapted_info.config = run.config;
  adapted_info.parent_hash = base_info.body_sha256;
  adapted_info.reference_latent = bundle.w_ref;
  adapted_info.reference_sha256 = run.reference_sha256;
  adapted_info.manifest_sha256 = result.manifest_sha256;

  AdaptHooks hooks;
  hooks.checkpoint_every = run.checkpoint_every;
  hooks.should_stop = run.should_stop;
  hooks.on_step = [&](const TrainState& s) {
    history << loss_to_json(s.history.back(), s.step).dump() << '\n';
    history.flush();
    if (run.on_step) run.on_step(s);
  };
  hooks.on_checkpoint = [&](const TrainState& s) {
    save_train_state(state_path.string(), s, run.config);
    save_checkpoint((out / kCheckpointDir / step_name(s.step)).string(), {adapted_info, s.g_b},
                    run.dtype);
  };

  AdaptResult r = adapt(g_a, *backends.embedder, *backends.metric, bundle, run.config, hooks,
                        std::move(resume));
  history.close();
  result.completed = r.completed;
  result.steps = static_cast<std::int64_t>(r.history.size());
  result.history = std::move(r.history);
  if (r.completed) {
    result.adapted_checkpoint = (out / kAdaptedFile).string();
    save_checkpoint(result.adapted_checkpoint, {adapted_info, std::move(r.g_b)}, run.dtype);
  }
  return result;
}

void remove_adaptation_outputs(const std::string& dir) {
  const fs::path out(dir);
  std::error_code ec;
  for (const char* name : {kManifestFile, kHistoryFile, kReferenceLatentFile, kTrainStateFile,
                           kAdaptedFile}) {
    fs::remove(out / name, ec);
  }
  for (const auto& e : fs::directory_iterator(out, ec)) {
    if (e.path().filename().string().find(".tmp.") != std::string::npos) fs::remove(e.path(), ec);
  }
  fs::remove_all(out / kCheckpointDir, ec);
  if (fs::is_directory(out, ec) && fs::is_empty(out, ec)) fs::remove(out, ec);
}

LoadedModel load_model(const std::string& path) {
  LoadedModel m;
  m.path = path;
  m.generator = load_generator(path, &m.backends, &m.info);
  return m;
}

void check_model_pair(const LoadedModel& base, const LoadedModel& adapted) {
  if (base.info.backend != adapted.info.backend ||
      base.info.backend_seed != adapted.info.backend_seed ||
      !(base.info.shape == adapted.info.shape)) {
    throw DimensionError("adapted checkpoint '" + adapted.path +
                         "' does not share backend and dims with base '" + base.path + "'");
  }
  if (!adapted.info.parent_hash.empty() && adapted.info.parent_hash != base.info.body_sha256) {
    log_warning("adapted checkpoint '" + adapted.path + "' was trained from a different base");
  }
}

TransferOptions transfer_defaults(const LoadedModel& adapted) {
  TransferOptions options;
  if (adapted.info.config) {
    options.m = static_cast<std::size_t>(adapted.info.config->mix_boundary_m);
    options.enable_mixing = adapted.info.config->enable_style_mixing;
  }
  return options;
}

const WPlusCode& reference_latent(const LoadedModel& adapted) {
  if (!adapted.info.reference_latent) {
    throw ConfigError("'" + adapted.path + "' carries no reference latent; is it an adapted checkpoint?");
  }
  return *adapted.info.reference_latent;
}

}  // namespace ganshift::service

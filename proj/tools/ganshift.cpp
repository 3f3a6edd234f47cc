#include <atomic>
#include <csignal>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <iterator>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "ganshift/config.hpp"
#include "ganshift/error.hpp"
#include "ganshift/inversion.hpp"
#include "ganshift/log.hpp"
#include "ganshift/service/checkpoint.hpp"
#include "ganshift/service/hashing.hpp"
#include "ganshift/service/image_io.hpp"
#include "ganshift/service/latent_io.hpp"
#include "ganshift/service/server.hpp"
#include "ganshift/service/workflows.hpp"
#include "ganshift/transfer.hpp"

namespace fs = std::filesystem;
using namespace ganshift;
using namespace ganshift::service;

namespace {

std::atomic<bool> g_interrupted{false};

extern "C" void on_signal(int) { g_interrupted.store(true); }

// Exit code for an interrupted adaptation, as for SIGINT.
constexpr int kInterruptedExit = 130;

struct InterruptedRun : Error {
  using Error::Error;
};

std::string one_line(std::string text) {
  for (char& c : text) {
    if (c == '\n' || c == '\r') c = ' ';
  }
  return text;
}

std::string read_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "'");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

EditOrder parse_order(const std::string& text) {
  if (text == "edits_then_mix") return EditOrder::kEditsThenMix;
  if (text == "mix_then_edits") return EditOrder::kMixThenEdits;
  throw ConfigError("--order must be edits_then_mix or mix_then_edits");
}

// "path=magnitude" or "path:magnitude".
LatentEdit parse_edit(const std::string& text) {
  const auto sep = text.find_last_of("=:");
  if (sep == std::string::npos || sep == 0 || sep + 1 == text.size()) {
    throw ConfigError("--edit expects <direction.json>=<magnitude>, got '" + text + "'");
  }
  const std::string path = text.substr(0, sep);
  double magnitude = 0.0;
  try {
    std::size_t used = 0;
    magnitude = std::stod(text.substr(sep + 1), &used);
    if (used != text.size() - sep - 1) throw std::invalid_argument("trailing");
  } catch (const std::exception&) {
    throw ConfigError("--edit magnitude is not a number in '" + text + "'");
  }
  LatentFile f = read_latent_file(path);
  return {f.name.empty() ? fs::path(path).stem().string() : f.name, std::move(f.latent), magnitude};
}

struct AdaptArgs {
  std::string reference;
  std::string backend;
  std::string base;
  std::string out;
  std::string config_file;
  std::map<std::string, std::string> overrides;
  bool resume = false;
  std::int64_t checkpoint_every = 100;
  std::string dtype = "f64";
};

int run_adapt(const AdaptArgs& a) {
  AdaptConfig config = a.config_file.empty() ? AdaptConfig{} : load_config_file(a.config_file);
  ConfigEntries entries;
  for (const auto& [key, value] : a.overrides) {
    if (!value.empty()) entries[key] = value;
  }
  config = apply_entries(config, entries);
  bool seed_given = entries.count("seed") > 0;
  if (!seed_given && !a.config_file.empty()) {
    seed_given = parse_config_text(read_text_file(a.config_file)).count("seed") > 0;
  }
  const fs::path manifest_path = fs::path(a.out) / kManifestFile;
  if (!seed_given && a.resume && fs::exists(manifest_path)) {
    config.seed = nlohmann::json::parse(read_text_file(manifest_path.string())).at("seed").get<std::uint64_t>();
  } else if (!seed_given) {
    config.seed = time_seed();
    log_info("no seed given; using time-derived seed " + std::to_string(config.seed));
  }

  const bool existed = fs::exists(a.out);
  AdaptRun run;
  run.base_checkpoint = a.base;
  const std::string ref_bytes = read_bytes(a.reference);
  run.reference = decode_png({ref_bytes.begin(), ref_bytes.end()});
  run.reference_sha256 = sha256_hex(ref_bytes);
  run.config = config;
  run.out_dir = a.out;
  run.backend = a.backend;
  run.resume = a.resume;
  run.checkpoint_every = a.checkpoint_every;
  run.dtype = value_type_from_string(a.dtype);
  run.should_stop = [] { return g_interrupted.load(); };

  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  try {
    const AdaptRunResult r = run_adaptation(run);
    if (!r.completed) {
      throw InterruptedRun("interrupted at step " + std::to_string(r.steps) +
                           "; rerun with --resume to continue from '" +
                           (fs::path(a.out) / kTrainStateFile).string() + "'");
    }
    std::cout << r.adapted_checkpoint << '\n';
    std::cout << "manifest " << r.manifest_sha256 << " seed " << config.seed << '\n';
    return 0;
  } catch (const InterruptedRun&) {
    throw;
  } catch (...) {
    if (!a.resume) {
      if (existed) {
        remove_adaptation_outputs(a.out);
      } else {
        std::error_code ec;
        fs::remove_all(a.out, ec);
      }
    }
    throw;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"One-shot generator domain adaptation toolkit"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "ganshift 1.0");

  // init-base
  std::string init_backend = "toy";
  std::uint64_t init_seed = 0;
  std::string init_out;
  std::string init_dtype = "f64";
  auto* init = app.add_subcommand("init-base", "Write a backend's base generator as a checkpoint");
  init->add_option("--backend", init_backend, "Backend name")->capture_default_str();
  init->add_option("--seed", init_seed, "Backend seed")->capture_default_str();
  init->add_option("--out", init_out, "Output checkpoint")->required();
  init->add_option("--dtype", init_dtype, "Body precision: f64 or f32")->capture_default_str();

  // adapt
  AdaptArgs adapt_args;
  auto* adapt_cmd = app.add_subcommand("adapt", "Adapt a base generator to one reference image");
  adapt_cmd->add_option("--reference", adapt_args.reference, "Reference PNG")->required()->check(CLI::ExistingFile);
  adapt_cmd->add_option("--backend", adapt_args.backend, "Backend name the base must use");
  adapt_cmd->add_option("--base", adapt_args.base, "Base checkpoint")->required()->check(CLI::ExistingFile);
  adapt_cmd->add_option("--out", adapt_args.out, "Output directory")->required();
  adapt_cmd->add_option("--config", adapt_args.config_file, "Config file (key = value lines)")
      ->check(CLI::ExistingFile);
  adapt_cmd->add_flag("--resume", adapt_args.resume, "Continue from <out>/train_state.ckpt");
  adapt_cmd->add_option("--checkpoint-every", adapt_args.checkpoint_every, "Checkpoint cadence in steps")
      ->capture_default_str();
  adapt_cmd->add_option("--dtype", adapt_args.dtype, "Checkpoint precision: f64 or f32")
      ->capture_default_str();
  for (const auto& [key, value] : to_entries(AdaptConfig{})) {
    adapt_args.overrides[key];
    adapt_cmd->add_option("--" + key, adapt_args.overrides[key], "Override (default " + value + ")");
  }

  // invert
  std::string inv_image, inv_ckpt, inv_out;
  double inv_lambda = 1e-2;
  std::size_t inv_steps = 400;
  std::optional<std::uint64_t> inv_seed;
  auto* invert_cmd = app.add_subcommand("invert", "Invert an image into a checkpoint's latent space");
  invert_cmd->add_option("--image", inv_image, "Input PNG")->required()->check(CLI::ExistingFile);
  invert_cmd->add_option("--ckpt", inv_ckpt, "Generator checkpoint")->required()->check(CLI::ExistingFile);
  invert_cmd->add_option("--lambda", inv_lambda, "Prior weight")->capture_default_str();
  invert_cmd->add_option("--steps", inv_steps, "Optimizer steps")->capture_default_str();
  invert_cmd->add_option("--seed", inv_seed, "Seed for the prior estimate (default: time-derived)");
  invert_cmd->add_option("--out", inv_out, "Output latent JSON")->required();

  // transfer
  std::string tr_image, tr_base, tr_adapted, tr_out, tr_latent_out, tr_order = "edits_then_mix";
  double tr_alpha = 0.0;
  std::optional<std::size_t> tr_m;
  std::optional<double> tr_lambda;
  std::optional<std::size_t> tr_steps;
  std::optional<std::uint64_t> tr_seed;
  std::vector<std::string> tr_edits;
  auto* transfer_cmd = app.add_subcommand("transfer", "Render a real image in the adapted domain");
  transfer_cmd->add_option("--image", tr_image, "Input PNG")->required()->check(CLI::ExistingFile);
  transfer_cmd->add_option("--base", tr_base, "Base checkpoint")->required()->check(CLI::ExistingFile);
  transfer_cmd->add_option("--adapted", tr_adapted, "Adapted checkpoint")->required()->check(CLI::ExistingFile);
  transfer_cmd->add_option("--alpha", tr_alpha, "Style mixing weight in [0, 1]")->required();
  transfer_cmd->add_option("--m", tr_m, "Mixing boundary (default: adapted config)");
  transfer_cmd->add_option("--edit", tr_edits, "Edit as <direction.json>=<magnitude>; repeatable");
  transfer_cmd->add_option("--order", tr_order, "edits_then_mix or mix_then_edits")->capture_default_str();
  transfer_cmd->add_option("--lambda", tr_lambda, "Inversion prior weight (default: adapted config)");
  transfer_cmd->add_option("--steps", tr_steps, "Inversion steps (default: adapted config)");
  transfer_cmd->add_option("--seed", tr_seed, "Inversion seed (default: adapted config)");
  transfer_cmd->add_option("--latent-out", tr_latent_out, "Also write the final latent");
  transfer_cmd->add_option("--out", tr_out, "Output PNG")->required();

  // mix
  std::string mix_latent, mix_ref, mix_out;
  double mix_alpha = 0.0;
  std::size_t mix_m = kDefaultMixBoundary;
  auto* mix_cmd = app.add_subcommand("mix", "Style-mix a latent towards a reference latent");
  mix_cmd->add_option("--latent", mix_latent, "Latent JSON")->required()->check(CLI::ExistingFile);
  mix_cmd->add_option("--ref-latent", mix_ref, "Reference latent JSON")->required()->check(CLI::ExistingFile);
  mix_cmd->add_option("--alpha", mix_alpha, "Mixing weight in [0, 1]")->required();
  mix_cmd->add_option("--m", mix_m, "Mixing boundary")->capture_default_str();
  mix_cmd->add_option("--out", mix_out, "Output latent JSON")->required();

  // edit
  std::string edit_latent, edit_dir, edit_out;
  double edit_mag = 0.0;
  auto* edit_cmd = app.add_subcommand("edit", "Move a latent along an edit direction");
  edit_cmd->add_option("--latent", edit_latent, "Latent JSON")->required()->check(CLI::ExistingFile);
  edit_cmd->add_option("--direction", edit_dir, "Direction JSON")->required()->check(CLI::ExistingFile);
  edit_cmd->add_option("--magnitude", edit_mag, "Step size")->required();
  edit_cmd->add_option("--out", edit_out, "Output latent JSON")->required();

  // render
  std::string render_ckpt, render_latent, render_out;
  auto* render_cmd = app.add_subcommand("render", "Render a latent with a checkpoint");
  render_cmd->add_option("--ckpt", render_ckpt, "Generator checkpoint")->required()->check(CLI::ExistingFile);
  render_cmd->add_option("--latent", render_latent, "Latent JSON")->required()->check(CLI::ExistingFile);
  render_cmd->add_option("--out", render_out, "Output PNG")->required();

  // serve
  int port = kDefaultPort;
  std::string host = "127.0.0.1";
  std::string ckpt_dir = ".";
  auto* serve_cmd = app.add_subcommand("serve", "Run the HTTP service");
  serve_cmd->add_option("--port", port, "Port")->capture_default_str();
  serve_cmd->add_option("--host", host, "Bind address")->capture_default_str();
  serve_cmd->add_option("--ckpt-dir", ckpt_dir, "Directory of checkpoints")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (*init) {
      const std::string hash =
          init_base_checkpoint(init_out, init_backend, init_seed, value_type_from_string(init_dtype));
      std::cout << init_out << " " << hash << '\n';
    } else if (*adapt_cmd) {
      return run_adapt(adapt_args);
    } else if (*invert_cmd) {
      const LoadedModel model = load_model(inv_ckpt);
      const GeneratorShape shape = model.generator.shape();
      const ImageTensor img = fit_image(read_png(inv_image), shape.height, shape.width);
      InversionOptions opts;
      opts.lambda = inv_lambda;
      opts.steps = inv_steps;
      opts.seed = inv_seed.value_or(time_seed());
      if (!inv_seed) log_info("no seed given; using time-derived seed " + std::to_string(opts.seed));
      const InversionResult r = invert(img, model.generator, *model.backends.metric, opts);
      write_latent_file(inv_out, r.latent, fs::path(inv_image).stem().string());
      std::cout << inv_out << " reconstruction " << r.final_reconstruction << " penalty "
                << r.final_penalty << '\n';
    } else if (*transfer_cmd) {
      const LoadedModel base = load_model(tr_base);
      const LoadedModel adapted = load_model(tr_adapted);
      check_model_pair(base, adapted);
      const AdaptConfig cfg = adapted.info.config.value_or(AdaptConfig{});
      TransferOptions opts = transfer_defaults(adapted);
      opts.alpha = tr_alpha;
      if (tr_m) opts.m = *tr_m;
      opts.order = parse_order(tr_order);
      for (const auto& text : tr_edits) opts.edits.push_back(parse_edit(text));
      opts.inversion.lambda = tr_lambda.value_or(cfg.inversion_lambda);
      opts.inversion.steps = tr_steps.value_or(static_cast<std::size_t>(cfg.inversion_steps));
      opts.inversion.seed = tr_seed.value_or(cfg.seed);
      const GeneratorShape shape = base.generator.shape();
      const ImageTensor img = fit_image(read_png(tr_image), shape.height, shape.width);
      // Validate mixing arguments before the inversion runs.
      style_mix(reference_latent(adapted), reference_latent(adapted), opts.alpha, opts.m);
      const TransferResult r = transfer_image(img, base.generator, adapted.generator,
                                              *base.backends.metric, reference_latent(adapted), opts);
      if (!tr_latent_out.empty()) write_latent_file(tr_latent_out, r.w_hat, "w_hat");
      try {
        write_png(tr_out, r.image);
      } catch (...) {
        if (!tr_latent_out.empty()) fs::remove(tr_latent_out);
        throw;
      }
      std::cout << tr_out << '\n';
    } else if (*mix_cmd) {
      const LatentFile w = read_latent_file(mix_latent);
      const LatentFile ref = read_latent_file(mix_ref);
      write_latent_file(mix_out, style_mix(w.latent, ref.latent, mix_alpha, mix_m), w.name);
      std::cout << mix_out << '\n';
    } else if (*edit_cmd) {
      const LatentFile w = read_latent_file(edit_latent);
      const LatentFile dir = read_latent_file(edit_dir);
      write_latent_file(edit_out, apply_edit(w.latent, dir.latent, edit_mag), w.name);
      std::cout << edit_out << '\n';
    } else if (*render_cmd) {
      const LoadedModel model = load_model(render_ckpt);
      write_png(render_out, model.generator.generate(read_latent_file(render_latent).latent));
      std::cout << render_out << '\n';
    } else if (*serve_cmd) {
      Service service({ckpt_dir, "", 100});
      const int bound = service.bind(host, port);
      std::cout << "serving on http://" << host << ":" << bound << " (artifacts in "
                << service.artifact_dir() << ")" << std::endl;
      service.listen();
    }
  } catch (const InterruptedRun& e) {
    std::cerr << "ganshift: " << one_line(e.what()) << '\n';
    return kInterruptedExit;
  } catch (const std::exception& e) {
    std::cerr << "ganshift: error: " << one_line(e.what()) << '\n';
    return 1;
  }
  return 0;
}

#include "ganshift/service/server.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

#include "ganshift/error.hpp"
#include "ganshift/inversion.hpp"
#include "ganshift/log.hpp"
#include "ganshift/service/checkpoint.hpp"
#include "ganshift/service/hashing.hpp"
#include "ganshift/service/image_io.hpp"
#include "ganshift/service/latent_io.hpp"
#include "ganshift/service/workflows.hpp"

// After Eigen: resolv.h, pulled in by httplib, defines a `_res` macro.
#include "httplib.h"

namespace ganshift::service {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct HttpError : std::runtime_error {
  HttpError(int status, std::string code, const std::string& message)
      : std::runtime_error(message), status(status), code(std::move(code)) {}
  int status;
  std::string code;
};

HttpError not_found(const std::string& what) { return {404, "not_found", what}; }
HttpError bad_request(const std::string& what) { return {400, "bad_request", what}; }
HttpError invalid(const std::string& what) { return {422, "invalid_argument", what}; }

void send_error(httplib::Response& res, int status, const std::string& code,
                const std::string& message) {
  res.status = status;
  res.set_content(json{{"code", code}, {"message", message}}.dump(), "application/json");
}

void send_json(httplib::Response& res, const json& body, int status = 200) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

// Ids name files on disk; keep them to a safe alphabet.
void check_id(const std::string& id, const std::string& what) {
  if (id.empty() || id.size() > 128 || id.front() == '.') throw not_found("unknown " + what + " '" + id + "'");
  for (char c : id) {
    if (!std::isalnum(static_cast<unsigned char>(c)) && c != '-' && c != '_' && c != '.') {
      throw not_found("unknown " + what + " '" + id + "'");
    }
  }
}

struct RequestData {
  json params = json::object();
  std::map<std::string, std::string> files;
};

RequestData parse_request(const httplib::Request& req) {
  RequestData data;
  if (req.is_multipart_form_data()) {
    for (const auto& [name, part] : req.files) {
      if (!part.filename.empty()) {
        data.files[name] = part.content;
        continue;
      }
      json value = json::parse(part.content, nullptr, false);
      data.params[name] = value.is_discarded() ? json(part.content) : value;
    }
  } else if (!req.body.empty()) {
    data.params = json::parse(req.body, nullptr, false);
    if (data.params.is_discarded() || !data.params.is_object()) {
      throw bad_request("request body must be a JSON object or multipart form");
    }
  }
  return data;
}

std::string require_string(const json& p, const std::string& key) {
  if (!p.contains(key)) throw bad_request("missing field '" + key + "'");
  if (!p.at(key).is_string()) throw bad_request("field '" + key + "' must be a string");
  return p.at(key).get<std::string>();
}

double number_field(const json& p, const std::string& key) {
  if (!p.contains(key)) throw invalid("missing field '" + key + "'");
  const json& v = p.at(key);
  if (!v.is_number()) throw invalid("field '" + key + "' must be a number");
  const double d = v.get<double>();
  if (!std::isfinite(d)) throw invalid("field '" + key + "' must be finite");
  return d;
}

double alpha_field(const json& p) {
  const double alpha = number_field(p, "alpha");
  if (alpha < 0.0 || alpha > 1.0) throw invalid("alpha must lie in [0, 1]");
  return alpha;
}

std::size_t count_field(const json& p, const std::string& key, std::size_t fallback,
                        std::size_t max_value) {
  if (!p.contains(key)) return fallback;
  const json& v = p.at(key);
  if (!v.is_number_integer() || v.get<std::int64_t>() < 0) {
    throw invalid("field '" + key + "' must be a non-negative integer");
  }
  const auto n = v.get<std::uint64_t>();
  if (n > max_value) {
    throw invalid("field '" + key + "'=" + std::to_string(n) + " exceeds " + std::to_string(max_value));
  }
  return static_cast<std::size_t>(n);
}

std::uint64_t seed_field(const json& p, std::uint64_t fallback) {
  if (!p.contains("seed")) return fallback;
  if (!p.at("seed").is_number_unsigned()) throw invalid("seed must be a non-negative integer");
  return p.at("seed").get<std::uint64_t>();
}

json model_json(const std::string& id, const CheckpointInfo& info) {
  json j = {{"id", id},
            {"kind", info.reference_latent ? "adapted" : "base"},
            {"backend", info.backend},
            {"backend_seed", info.backend_seed},
            {"dims", shape_to_json(info.shape)},
            {"created", info.created},
            {"checkpoint_sha256", info.body_sha256},
            {"parent", info.parent_hash.empty() ? json(nullptr) : json(info.parent_hash)},
            {"manifest_sha256",
             info.manifest_sha256.empty() ? json(nullptr) : json(info.manifest_sha256)}};
  if (info.config) {
    j["seed"] = info.config->seed;
    j["config"] = config_to_json(*info.config);
  }
  return j;
}

std::string run_model_id(const std::string& manifest_sha) { return "run-" + manifest_sha.substr(0, 16); }

}  // namespace

std::string resolve_artifact_dir(const ServiceOptions& options) {
  if (!options.artifact_dir.empty()) return options.artifact_dir;
  if (const char* home = std::getenv("GANSHIFT_HOME"); home && *home) return home;
  return (fs::path(options.ckpt_dir) / "artifacts").string();
}

struct Service::Impl {
  explicit Impl(ServiceOptions opts)
      : options(std::move(opts)), artifacts(resolve_artifact_dir(options)) {
    fs::create_directories(fs::path(artifacts) / "latents");
    fs::create_directories(fs::path(artifacts) / "runs");
    routes();
  }

  ServiceOptions options;
  std::string artifacts;
  httplib::Server server;
  JobQueue queue;
  std::thread listener;

  std::mutex models_mutex;
  std::map<std::string, std::shared_ptr<const LoadedModel>> loaded;

  // id -> checkpoint path for every model currently on disk.
  std::map<std::string, std::string> scan_models() const {
    std::map<std::string, std::string> found;
    std::error_code ec;
    for (const auto& e : fs::directory_iterator(options.ckpt_dir, ec)) {
      if (e.is_regular_file() && e.path().extension() == ".ckpt") {
        found[e.path().stem().string()] = e.path().string();
      }
    }
    for (const auto& e : fs::directory_iterator(fs::path(artifacts) / "runs", ec)) {
      const fs::path ckpt = e.path() / kAdaptedFile;
      if (fs::exists(ckpt)) found[run_model_id(e.path().filename().string())] = ckpt.string();
    }
    return found;
  }

  std::shared_ptr<const LoadedModel> model(const std::string& id) {
    check_id(id, "model");
    {
      std::lock_guard lock(models_mutex);
      if (auto it = loaded.find(id); it != loaded.end()) return it->second;
    }
    const auto paths = scan_models();
    const auto it = paths.find(id);
    if (it == paths.end()) throw not_found("unknown model '" + id + "'");
    auto m = std::make_shared<const LoadedModel>(load_model(it->second));
    std::lock_guard lock(models_mutex);
    return loaded.emplace(id, std::move(m)).first->second;
  }

  fs::path latent_path(const std::string& id) const {
    for (const fs::path& dir : {fs::path(artifacts) / "latents", fs::path(options.ckpt_dir) / "latents"}) {
      const fs::path p = dir / (id + ".json");
      if (fs::exists(p)) return p;
    }
    return {};
  }

  WPlusCode latent(const std::string& id) {
    check_id(id, "latent");
    const fs::path p = latent_path(id);
    if (p.empty()) throw not_found("unknown latent '" + id + "'");
    return read_latent_file(p.string()).latent;
  }

  std::string store_latent(const WPlusCode& w, const std::string& id_hint = "") {
    const std::string id =
        id_hint.empty() ? "lat-" + sha256_hex(latent_to_json(w, "").dump()).substr(0, 16) : id_hint;
    const fs::path p = fs::path(artifacts) / "latents" / (id + ".json");
    if (!fs::exists(p)) write_latent_file(p.string(), w, id);
    return id;
  }

  WPlusCode direction(const std::string& id) {
    check_id(id, "direction");
    const fs::path p = fs::path(options.ckpt_dir) / "directions" / (id + ".json");
    if (!fs::exists(p)) throw not_found("unknown direction '" + id + "'");
    return read_latent_file(p.string()).latent;
  }

  // Content-addressed: the same image, model, lambda, steps and seed reuse
  // the stored code.
  std::string invert_cached(const std::string& png_bytes, const LoadedModel& base, double lambda,
                            std::size_t steps, std::uint64_t seed) {
    std::ostringstream key;
    key << sha256_hex(png_bytes) << '|' << base.info.body_sha256 << '|' << format_number(lambda)
        << '|' << steps << '|' << seed;
    const std::string id = "inv-" + sha256_hex(key.str()).substr(0, 16);
    if (!latent_path(id).empty()) return id;

    const std::vector<unsigned char> bytes(png_bytes.begin(), png_bytes.end());
    const GeneratorShape shape = base.generator.shape();
    const ImageTensor img = fit_image(decode_png(bytes), shape.height, shape.width);
    InversionOptions inv;
    inv.lambda = lambda;
    inv.steps = steps;
    inv.seed = seed;
    const InversionResult r = invert(img, base.generator, *base.backends.metric, inv);
    return store_latent(r.latent, id);
  }

  template <typename Handler>
  auto wrap(Handler h) {
    return [h](const httplib::Request& req, httplib::Response& res) {
      try {
        h(req, res);
      } catch (const HttpError& e) {
        send_error(res, e.status, e.code, e.what());
      } catch (const ConfigError& e) {
        send_error(res, 422, "invalid_argument", e.what());
      } catch (const DimensionError& e) {
        send_error(res, 422, "dimension_mismatch", e.what());
      } catch (const DomainGapError& e) {
        send_error(res, 422, "domain_gap", e.what());
      } catch (const IoError& e) {
        send_error(res, 400, "bad_input", e.what());
      } catch (const NumericalError& e) {
        send_error(res, 500, "numerical_error", e.what());
      } catch (const std::exception& e) {
        send_error(res, 500, "internal", e.what());
      }
    };
  }

  void routes() {
    // Unmatched routes (including decoded "../" ids) still answer in the JSON error shape.
    server.set_error_handler([](const httplib::Request& req, httplib::Response& res) {
      if (!res.body.empty()) return;
      send_error(res, res.status, res.status == 404 ? "not_found" : "error",
                 "no resource at '" + req.path + "'");
    });
    server.Get("/api/health", wrap([](const httplib::Request&, httplib::Response& res) {
      send_json(res, {{"status", "ok"}});
    }));

    server.Get("/api/models", wrap([this](const httplib::Request&, httplib::Response& res) {
      json models = json::array();
      for (const auto& [id, path] : scan_models()) {
        try {
          models.push_back(model_json(id, load_checkpoint_info(path)));
        } catch (const Error& e) {
          log_warning("skipping unreadable checkpoint '" + path + "': " + e.what());
        }
      }
      send_json(res, {{"models", std::move(models)}});
    }));

    server.Get("/api/directions", wrap([this](const httplib::Request&, httplib::Response& res) {
      json dirs = json::array();
      std::error_code ec;
      for (const auto& e : fs::directory_iterator(fs::path(options.ckpt_dir) / "directions", ec)) {
        if (!e.is_regular_file() || e.path().extension() != ".json") continue;
        try {
          const LatentFile f = read_latent_file(e.path().string());
          dirs.push_back({{"id", e.path().stem().string()},
                          {"name", f.name.empty() ? e.path().stem().string() : f.name},
                          {"L", f.latent.layer_count()},
                          {"D", f.latent.width()}});
        } catch (const Error& err) {
          log_warning("skipping unreadable direction '" + e.path().string() + "': " + err.what());
        }
      }
      send_json(res, {{"directions", std::move(dirs)}});
    }));

    server.Get(R"(/api/latents/([^/]+))",
               wrap([this](const httplib::Request& req, httplib::Response& res) {
                 const std::string id = req.matches[1];
                 send_json(res, latent_to_json(latent(id), id));
               }));

    server.Get("/api/jobs", wrap([this](const httplib::Request&, httplib::Response& res) {
      json jobs = json::array();
      for (const auto& r : queue.list()) {
        json j = job_to_json(r, r.history.size());
        j.erase("history");
        jobs.push_back(std::move(j));
      }
      send_json(res, {{"jobs", std::move(jobs)}});
    }));

    server.Get(R"(/api/jobs/([^/]+))",
               wrap([this](const httplib::Request& req, httplib::Response& res) {
                 const std::string id = req.matches[1];
                 const auto job = queue.find(id);
                 if (!job) throw not_found("unknown job '" + id + "'");
                 std::size_t since = 0;
                 if (req.has_param("since")) {
                   try {
                     since = std::stoul(req.get_param_value("since"));
                   } catch (const std::exception&) {
                     throw bad_request("'since' must be a non-negative integer");
                   }
                 }
                 send_json(res, job_to_json(*job, since));
               }));

    server.Post("/api/jobs/adapt", wrap([this](const httplib::Request& req, httplib::Response& res) {
      adapt_job(req, res);
    }));
    server.Post("/api/jobs/invert", wrap([this](const httplib::Request& req, httplib::Response& res) {
      invert_job(req, res);
    }));
    server.Post("/api/transfer", wrap([this](const httplib::Request& req, httplib::Response& res) {
      transfer(req, res);
    }));
    server.Post("/api/mix", wrap([this](const httplib::Request& req, httplib::Response& res) {
      mix(req, res);
    }));
  }

  void adapt_job(const httplib::Request& req, httplib::Response& res) {
    const RequestData data = parse_request(req);
    const auto ref = data.files.find("reference");
    if (ref == data.files.end()) throw bad_request("missing file 'reference'");
    const auto base = model(require_string(data.params, "base"));

    json overrides = data.params.value("config", json::object());
    if (overrides.is_string()) overrides = json::parse(overrides.get<std::string>(), nullptr, false);
    if (!overrides.is_object()) throw invalid("'config' must be a JSON object");
    AdaptConfig config = config_from_json(overrides);
    if (!overrides.contains("seed")) config.seed = time_seed();
    config.validate(base->generator.shape().layer_count);

    const std::vector<unsigned char> bytes(ref->second.begin(), ref->second.end());
    const ImageTensor reference = decode_png(bytes);
    const std::string ref_sha = sha256_hex(ref->second);
    const json manifest = make_manifest(config, base->info, ref_sha);
    const std::string manifest_sha = manifest_hash(manifest);
    const fs::path run_dir = fs::path(artifacts) / "runs" / manifest_sha;
    const std::int64_t every = options.checkpoint_every;

    const std::string id = queue.submit(
        "adapt", config.iterations,
        [base, reference, ref_sha, config, run_dir, manifest_sha, every](JobContext& ctx) {
          ctx.set_artifact("manifest_sha256", manifest_sha);
          ctx.set_artifact("seed", std::to_string(config.seed));
          ctx.set_artifact("run_dir", run_dir.string());
          const fs::path adapted = run_dir / kAdaptedFile;
          if (fs::exists(adapted)) {
            std::vector<LossBreakdown> history;
            std::ifstream in(run_dir / kHistoryFile);
            for (std::string line; std::getline(in, line);) {
              if (!line.empty()) history.push_back(loss_from_json(json::parse(line)));
            }
            ctx.set_progress(static_cast<std::int64_t>(history.size()), config.iterations);
            ctx.set_history(std::move(history));
          } else {
            AdaptRun run;
            run.base_checkpoint = base->path;
            run.reference = reference;
            run.reference_sha256 = ref_sha;
            run.config = config;
            run.out_dir = run_dir.string();
            run.resume = true;
            run.checkpoint_every = every;
            run.on_step = [&](const TrainState& s) {
              ctx.add_history(s.history.back());
              ctx.set_progress(s.step, config.iterations);
            };
            run.should_stop = [&] { return ctx.stop_requested(); };
            const AdaptRunResult r = run_adaptation(run);
            if (!r.completed) {
              throw Error("interrupted at step " + std::to_string(r.steps) +
                          "; resubmit the same request to resume");
            }
          }
          ctx.set_artifact("adapted_checkpoint", adapted.string());
          ctx.set_artifact("model_id", run_model_id(manifest_sha));
          ctx.set_artifact("history", (run_dir / kHistoryFile).string());
        });
    send_json(res,
              {{"id", id},
               {"manifest_sha256", manifest_sha},
               {"seed", config.seed},
               {"model_id", run_model_id(manifest_sha)}},
              202);
  }

  void invert_job(const httplib::Request& req, httplib::Response& res) {
    const RequestData data = parse_request(req);
    const auto img = data.files.find("image");
    if (img == data.files.end()) throw bad_request("missing file 'image'");
    const auto base = model(require_string(data.params, "base"));
    const AdaptConfig defaults;
    const double lambda = data.params.contains("lambda") ? number_field(data.params, "lambda")
                                                         : defaults.inversion_lambda;
    if (lambda <= 0) throw invalid("lambda must be positive");
    const std::size_t steps = count_field(data.params, "steps",
                                          static_cast<std::size_t>(defaults.inversion_steps), 100000);
    if (steps == 0) throw invalid("steps must be positive");
    const std::uint64_t seed = seed_field(data.params, time_seed());
    // Reject undecodable uploads before queueing.
    decode_png(std::vector<unsigned char>(img->second.begin(), img->second.end()));

    const std::string png = img->second;
    const std::string id = queue.submit(
        "invert", static_cast<std::int64_t>(steps),
        [this, base, png, lambda, steps, seed](JobContext& ctx) {
          ctx.set_artifact("seed", std::to_string(seed));
          const std::string latent_id = invert_cached(png, *base, lambda, steps, seed);
          ctx.set_progress(static_cast<std::int64_t>(steps), static_cast<std::int64_t>(steps));
          ctx.set_artifact("latent_id", latent_id);
        });
    send_json(res, {{"id", id}, {"seed", seed}}, 202);
  }

  void transfer(const httplib::Request& req, httplib::Response& res) {
    const RequestData data = parse_request(req);
    const auto base = model(require_string(data.params, "base"));
    const auto adapted = model(require_string(data.params, "adapted"));
    check_model_pair(*base, *adapted);
    const std::size_t layers = base->generator.shape().layer_count;

    TransferOptions opts = transfer_defaults(*adapted);
    opts.alpha = alpha_field(data.params);
    opts.m = count_field(data.params, "m", opts.m, layers);
    if (data.params.contains("order")) {
      const json& order = data.params.at("order");
      if (order == "edits_then_mix") {
        opts.order = EditOrder::kEditsThenMix;
      } else if (order == "mix_then_edits") {
        opts.order = EditOrder::kMixThenEdits;
      } else {
        throw invalid("order must be 'edits_then_mix' or 'mix_then_edits'");
      }
    }
    if (data.params.contains("edits")) {
      const json& edits = data.params.at("edits");
      if (!edits.is_array()) throw invalid("'edits' must be an array");
      for (const auto& e : edits) {
        if (!e.is_object()) throw invalid("each edit must be an object");
        const std::string dir = require_string(e, "direction");
        opts.edits.push_back({dir, direction(dir), number_field(e, "magnitude")});
      }
    }

    const AdaptConfig cfg = adapted->info.config.value_or(AdaptConfig{});
    std::string latent_id;
    const auto img = data.files.find("image");
    if (img != data.files.end()) {
      const double lambda = data.params.contains("lambda") ? number_field(data.params, "lambda")
                                                           : cfg.inversion_lambda;
      if (lambda <= 0) throw invalid("lambda must be positive");
      const std::size_t steps = count_field(data.params, "steps",
                                            static_cast<std::size_t>(cfg.inversion_steps), 100000);
      if (steps == 0) throw invalid("steps must be positive");
      latent_id = invert_cached(img->second, *base, lambda, steps, seed_field(data.params, cfg.seed));
    } else if (data.params.contains("latent_id")) {
      latent_id = require_string(data.params, "latent_id");
    } else {
      throw bad_request("provide an 'image' upload or a 'latent_id'");
    }

    const WPlusCode w = latent(latent_id);
    base->generator.backend->check_latent(w);
    const std::string render = data.params.value("render", "b");
    if (render != "a" && render != "b") throw invalid("render must be 'a' or 'b'");
    const Generator& g = render == "a" ? base->generator : adapted->generator;
    const TransferResult r = transfer_latent(w, g, reference_latent(*adapted), opts);

    const std::vector<unsigned char> png = encode_png(r.image);
    res.status = 200;
    res.set_header("X-Latent-Id", latent_id);
    res.set_header("X-Manifest-Sha256", adapted->info.manifest_sha256);
    res.set_header("X-Seed", std::to_string(cfg.seed));
    res.set_content(std::string(png.begin(), png.end()), "image/png");
  }

  void mix(const httplib::Request& req, httplib::Response& res) {
    const RequestData data = parse_request(req);
    const WPlusCode w = latent(require_string(data.params, "latent_id"));
    WPlusCode w_ref;
    if (data.params.contains("ref_latent_id")) {
      w_ref = latent(require_string(data.params, "ref_latent_id"));
    } else if (data.params.contains("adapted")) {
      w_ref = reference_latent(*model(require_string(data.params, "adapted")));
    } else {
      throw bad_request("provide 'adapted' or 'ref_latent_id' as the mixing source");
    }
    if (!w.same_shape(w_ref)) throw invalid("latent and reference latent shapes differ");
    const double alpha = alpha_field(data.params);
    const std::size_t m = count_field(data.params, "m", kDefaultMixBoundary, w.layer_count());
    const WPlusCode mixed = style_mix(w, w_ref, alpha, m);
    const std::string id = store_latent(mixed);
    json body = {{"latent_id", id}};
    if (data.params.value("inline", false)) body["latent"] = latent_to_json(mixed, id);
    send_json(res, body);
  }
};

Service::Service(ServiceOptions options) : impl_(std::make_unique<Impl>(std::move(options))) {}

Service::~Service() { stop(); }

int Service::bind(const std::string& host, int port) {
  if (port == 0) {
    const int bound = impl_->server.bind_to_any_port(host);
    if (bound <= 0) throw IoError("cannot bind " + host);
    return bound;
  }
  if (!impl_->server.bind_to_port(host, port)) {
    throw IoError("cannot bind " + host + ":" + std::to_string(port));
  }
  return port;
}

void Service::listen() { impl_->server.listen_after_bind(); }

void Service::start() {
  impl_->listener = std::thread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
}

void Service::stop() {
  impl_->queue.shutdown();
  impl_->server.stop();
  if (impl_->listener.joinable()) impl_->listener.join();
}

JobQueue& Service::jobs() { return impl_->queue; }

const std::string& Service::artifact_dir() const { return impl_->artifacts; }

}  // namespace ganshift::service

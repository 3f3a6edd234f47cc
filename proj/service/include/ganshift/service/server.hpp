#pragma once

#include <cstdint>
#include <memory>
#include <string>

#include "ganshift/service/jobs.hpp"

namespace ganshift::service {

inline constexpr int kDefaultPort = 8675;

struct ServiceOptions {
  // Base and adapted checkpoints (*.ckpt), plus optional latents/ and
  // directions/ subdirectories of latent JSON files.
  std::string ckpt_dir;
  // Content-addressed run outputs and cached latents. Empty selects
  // $GANSHIFT_HOME, or <ckpt_dir>/artifacts when that is unset.
  std::string artifact_dir;
  std::int64_t checkpoint_every = 100;
};

std::string resolve_artifact_dir(const ServiceOptions& options);

// HTTP front end: adaptation and inversion jobs on a single worker, transfer
// and mixing served concurrently from immutable loaded checkpoints.
class Service {
 public:
  explicit Service(ServiceOptions options);
  ~Service();
  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  // Port 0 binds an ephemeral port. Returns the bound port.
  int bind(const std::string& host, int port);
  // Serves until stop(); blocking.
  void listen();
  // listen() on a background thread; returns once the server accepts requests.
  void start();
  void stop();

  JobQueue& jobs();
  const std::string& artifact_dir() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace ganshift::service

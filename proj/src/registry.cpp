#include <dlfcn.h>

#include <cstdlib>
#include <filesystem>
#include <string>

#include "ganshift/backends.hpp"
#include "ganshift/error.hpp"
#include "ganshift/log.hpp"
#include "ganshift/toy_backends.hpp"

namespace ganshift {

BackendRegistry::BackendRegistry() { factories_.emplace_back("toy", make_toy_backends); }

BackendRegistry& BackendRegistry::instance() {
  static BackendRegistry registry;
  return registry;
}

void BackendRegistry::register_backend(const std::string& name, BackendFactory factory) {
  std::lock_guard lock(mutex_);
  for (auto& [existing, f] : factories_) {
    if (existing == name) {
      f = std::move(factory);
      return;
    }
  }
  factories_.emplace_back(name, std::move(factory));
}

bool BackendRegistry::contains(const std::string& name) const {
  std::lock_guard lock(mutex_);
  for (const auto& entry : factories_) {
    if (entry.first == name) return true;
  }
  return false;
}

std::vector<std::string> BackendRegistry::names() const {
  std::lock_guard lock(mutex_);
  std::vector<std::string> out;
  for (const auto& entry : factories_) out.push_back(entry.first);
  return out;
}

bool BackendRegistry::try_load_plugin(const std::string& name) {
  const char* path_env = std::getenv("GANSHIFT_PLUGIN_PATH");
  if (!path_env) return false;
  const std::string filename = "libganshift_backend_" + name + ".so";
  std::string_view paths(path_env);
  while (!paths.empty()) {
    const auto colon = paths.find(':');
    const std::string dir(paths.substr(0, colon));
    paths = colon == std::string_view::npos ? std::string_view{} : paths.substr(colon + 1);
    if (dir.empty()) continue;

    const auto candidate = std::filesystem::path(dir) / filename;
    if (!std::filesystem::exists(candidate)) continue;

    // Handles stay open for the process lifetime; factories point into them.
    void* handle = dlopen(candidate.c_str(), RTLD_NOW | RTLD_LOCAL);
    if (!handle) {
      log_warning("failed to load backend plugin " + candidate.string() + ": " + dlerror());
      continue;
    }
    using RegisterFn = void (*)(BackendRegistry&);
    auto fn = reinterpret_cast<RegisterFn>(dlsym(handle, kPluginEntryPoint));
    if (!fn) {
      log_warning("backend plugin " + candidate.string() + " lacks " + kPluginEntryPoint);
      dlclose(handle);
      continue;
    }
    fn(*this);
    if (contains(name)) return true;
  }
  return false;
}

BackendSet BackendRegistry::create(const std::string& name, std::uint64_t seed) {
  if (!contains(name) && !try_load_plugin(name)) {
    throw ConfigError("unknown backend '" + name + "'");
  }
  BackendFactory factory;
  {
    std::lock_guard lock(mutex_);
    for (const auto& entry : factories_) {
      if (entry.first == name) factory = entry.second;
    }
  }
  return factory(seed);
}

}  // namespace ganshift

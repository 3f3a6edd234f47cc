#include "ganshift/log.hpp"

#include <cstdlib>
#include <iostream>
#include <mutex>
#include <utility>

namespace ganshift {
namespace {

std::mutex& sink_mutex() {
  static std::mutex m;
  return m;
}

void stderr_sink(LogLevel level, std::string_view message) {
  static const bool debug = std::getenv("GANSHIFT_DEBUG") != nullptr;
  if (level == LogLevel::kDebug && !debug) return;
  static constexpr const char* kNames[] = {"debug", "info", "warning", "error"};
  std::cerr << "[ganshift " << kNames[static_cast<int>(level)] << "] " << message << '\n';
}

LogSink& current_sink() {
  static LogSink sink = stderr_sink;
  return sink;
}

}  // namespace

LogSink set_log_sink(LogSink sink) {
  std::lock_guard lock(sink_mutex());
  return std::exchange(current_sink(), sink ? std::move(sink) : LogSink(stderr_sink));
}

void log(LogLevel level, std::string_view message) {
  std::lock_guard lock(sink_mutex());
  current_sink()(level, message);
}

}  // namespace ganshift

#pragma once

#include <condition_variable>
#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"

#include "ganshift/losses.hpp"

namespace ganshift::service {

enum class JobState { kQueued, kRunning, kDone, kFailed };

std::string to_string(JobState state);
// Only queued -> running -> {done, failed}.
bool valid_transition(JobState from, JobState to);

struct JobRecord {
  std::string id;
  std::string kind;  // "adapt" or "invert"
  JobState state = JobState::kQueued;
  std::int64_t step = 0;
  std::int64_t total = 0;
  std::map<std::string, std::string> artifacts;
  std::optional<std::string> error;
  std::vector<LossBreakdown> history;
};

// History entries after `since` steps are included; `history_length` always
// reports the full count.
nlohmann::json job_to_json(const JobRecord& job, std::size_t since = 0);

class JobQueue;

// Handle a running job uses to publish progress.
class JobContext {
 public:
  JobContext(JobQueue& queue, std::string id) : queue_(queue), id_(std::move(id)) {}

  const std::string& id() const { return id_; }
  void set_progress(std::int64_t step, std::int64_t total);
  void add_history(const LossBreakdown& loss);
  void set_history(std::vector<LossBreakdown> history);
  void set_artifact(const std::string& key, const std::string& value);
  // True once the queue is shutting down.
  bool stop_requested() const;

 private:
  JobQueue& queue_;
  std::string id_;
};

// FIFO of jobs executed one at a time on a dedicated worker thread.
class JobQueue {
 public:
  using Work = std::function<void(JobContext&)>;

  JobQueue();
  ~JobQueue();
  JobQueue(const JobQueue&) = delete;
  JobQueue& operator=(const JobQueue&) = delete;

  std::string submit(const std::string& kind, std::int64_t total, Work work);
  std::optional<JobRecord> find(const std::string& id) const;
  std::vector<JobRecord> list() const;

  // Blocks until no job is queued or running.
  void wait_idle();
  // Lets the running job observe stop_requested(), drops queued jobs and joins.
  void shutdown();

 private:
  friend class JobContext;
  template <typename F>
  void with_record(const std::string& id, F&& f);
  void transition(const std::string& id, JobState to, std::optional<std::string> error = {});
  void worker();

  mutable std::mutex mutex_;
  std::condition_variable cv_;
  std::condition_variable idle_cv_;
  std::map<std::string, JobRecord> jobs_;
  std::deque<std::pair<std::string, Work>> pending_;
  bool busy_ = false;
  bool stopping_ = false;
  std::uint64_t counter_ = 0;
  std::thread thread_;
};

}  // namespace ganshift::service

#include "ganshift/service/jobs.hpp"

#include <chrono>
#include <cstdio>
#include <stdexcept>

#include "ganshift/log.hpp"
#include "ganshift/service/checkpoint.hpp"

namespace ganshift::service {

std::string to_string(JobState state) {
  switch (state) {
    case JobState::kQueued: return "queued";
    case JobState::kRunning: return "running";
    case JobState::kDone: return "done";
    case JobState::kFailed: return "failed";
  }
  return "unknown";
}

bool valid_transition(JobState from, JobState to) {
  if (from == JobState::kQueued) return to == JobState::kRunning;
  if (from == JobState::kRunning) return to == JobState::kDone || to == JobState::kFailed;
  return false;
}

nlohmann::json job_to_json(const JobRecord& job, std::size_t since) {
  nlohmann::json history = nlohmann::json::array();
  for (std::size_t k = since; k < job.history.size(); ++k) {
    history.push_back(loss_to_json(job.history[k], static_cast<std::int64_t>(k + 1)));
  }
  return {{"id", job.id},
          {"kind", job.kind},
          {"state", to_string(job.state)},
          {"progress", {{"step", job.step}, {"total", job.total}}},
          {"artifacts", job.artifacts},
          {"error", job.error ? nlohmann::json(*job.error) : nlohmann::json(nullptr)},
          {"history_length", job.history.size()},
          {"history", std::move(history)}};
}

void JobContext::set_progress(std::int64_t step, std::int64_t total) {
  queue_.with_record(id_, [&](JobRecord& r) {
    r.step = step;
    r.total = total;
  });
}

void JobContext::add_history(const LossBreakdown& loss) {
  queue_.with_record(id_, [&](JobRecord& r) { r.history.push_back(loss); });
}

void JobContext::set_history(std::vector<LossBreakdown> history) {
  queue_.with_record(id_, [&](JobRecord& r) { r.history = std::move(history); });
}

void JobContext::set_artifact(const std::string& key, const std::string& value) {
  queue_.with_record(id_, [&](JobRecord& r) { r.artifacts[key] = value; });
}

bool JobContext::stop_requested() const {
  std::lock_guard lock(queue_.mutex_);
  return queue_.stopping_;
}

JobQueue::JobQueue() : thread_([this] { worker(); }) {}

JobQueue::~JobQueue() { shutdown(); }

template <typename F>
void JobQueue::with_record(const std::string& id, F&& f) {
  std::lock_guard lock(mutex_);
  f(jobs_.at(id));
}

std::string JobQueue::submit(const std::string& kind, std::int64_t total, Work work) {
  std::lock_guard lock(mutex_);
  if (stopping_) throw std::runtime_error("job queue is shutting down");
  const auto now = std::chrono::system_clock::now().time_since_epoch().count();
  char buf[48];
  std::snprintf(buf, sizeof buf, "%s-%llx-%llu", kind.c_str(), static_cast<unsigned long long>(now),
                static_cast<unsigned long long>(++counter_));
  JobRecord record;
  record.id = buf;
  record.kind = kind;
  record.total = total;
  jobs_.emplace(record.id, record);
  pending_.emplace_back(record.id, std::move(work));
  cv_.notify_one();
  return record.id;
}

std::optional<JobRecord> JobQueue::find(const std::string& id) const {
  std::lock_guard lock(mutex_);
  const auto it = jobs_.find(id);
  if (it == jobs_.end()) return std::nullopt;
  return it->second;
}

std::vector<JobRecord> JobQueue::list() const {
  std::lock_guard lock(mutex_);
  std::vector<JobRecord> out;
  for (const auto& [id, r] : jobs_) out.push_back(r);
  return out;
}

void JobQueue::wait_idle() {
  std::unique_lock lock(mutex_);
  idle_cv_.wait(lock, [&] { return (pending_.empty() && !busy_) || stopping_; });
}

void JobQueue::shutdown() {
  {
    std::lock_guard lock(mutex_);
    if (stopping_ && !thread_.joinable()) return;
    stopping_ = true;
    pending_.clear();
  }
  cv_.notify_all();
  idle_cv_.notify_all();
  if (thread_.joinable()) thread_.join();
}

void JobQueue::transition(const std::string& id, JobState to, std::optional<std::string> error) {
  std::lock_guard lock(mutex_);
  JobRecord& r = jobs_.at(id);
  if (!valid_transition(r.state, to)) {
    throw std::logic_error("invalid job transition " + to_string(r.state) + " -> " + to_string(to));
  }
  r.state = to;
  if (error) r.error = std::move(error);
}

void JobQueue::worker() {
  for (;;) {
    std::pair<std::string, Work> next;
    {
      std::unique_lock lock(mutex_);
      cv_.wait(lock, [&] { return stopping_ || !pending_.empty(); });
      if (stopping_) return;
      next = std::move(pending_.front());
      pending_.pop_front();
      busy_ = true;
    }
    transition(next.first, JobState::kRunning);
    JobContext ctx(*this, next.first);
    try {
      next.second(ctx);
      transition(next.first, JobState::kDone);
    } catch (const std::exception& e) {
      log_warning("job " + next.first + " failed: " + e.what());
      transition(next.first, JobState::kFailed, e.what());
    }
    {
      std::lock_guard lock(mutex_);
      busy_ = false;
    }
    idle_cv_.notify_all();
  }
}

}  // namespace ganshift::service

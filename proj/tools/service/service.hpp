// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <condition_variable>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>

#include <nlohmann/json.hpp>

#include "homer/pipeline.hpp"

namespace httplib {
class Server;
}

namespace homer::service {

enum class JobState { queued, running, done, failed };
std::string to_string(JobState s);

struct Job {
  std::string id;
  JobState state = JobState::queued;
  pipeline::Progress progress;
  std::string result_path;
  std::optional<std::pair<std::string, std::string>> error;  ///< code, message
  prompts::PromptSet prompts;
  pipeline::PipelineConfig config;
  std::shared_ptr<const pipeline::PropagationResult> result;

  nlohmann::json to_json() const;
};

/// HTTP front end over one ViewSet. Propagation jobs run one at a time on a
/// single worker in FIFO order; segmentation previews share the oracle lock
/// with the worker, so they wait while a propagation is running.
class Service {
 public:
  Service(pipeline::ViewSet views, pipeline::PipelineConfig base_config, std::filesystem::path run_root);
  ~Service();
  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  /// Binds and serves until stop(). Returns false if the port cannot be bound.
  bool listen(const std::string& host, int port);
  /// Binds to an ephemeral port and serves on a background thread; returns
  /// the port or -1.
  int start_background(const std::string& host = "127.0.0.1");
  void stop();

  /// Enqueues a propagation job; returns its id. Throws Error on invalid
  /// prompts or config.
  std::string submit(const nlohmann::json& body);
  std::optional<nlohmann::json> job_json(const std::string& id) const;
  /// Blocks until the job leaves queued/running.
  void wait(const std::string& id);

 private:
  void register_routes();
  void worker_loop();
  void run_job(const std::shared_ptr<Job>& job);
  std::shared_ptr<const pipeline::PropagationResult> latest_result() const;

  pipeline::ViewSet views_;
  pipeline::PipelineConfig base_config_;
  std::filesystem::path run_root_;
  oracles::OracleSet preview_oracles_;

  std::unique_ptr<httplib::Server> server_;
  std::thread server_thread_;

  mutable std::mutex mutex_;
  std::condition_variable cv_;
  std::map<std::string, std::shared_ptr<Job>> jobs_;
  std::deque<std::shared_ptr<Job>> queue_;
  std::shared_ptr<const pipeline::PropagationResult> latest_;
  std::uint64_t next_id_ = 1;
  bool stopping_ = false;
  std::thread worker_;

  std::mutex oracle_mutex_;
};

}  // namespace homer::service

// SPDX-License-Identifier: Apache-2.0
#include "service.hpp"

#include <httplib.h>

#include "homer/error.hpp"
#include "homer/io.hpp"
#include "homer/log.hpp"

namespace homer::service {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

int http_status(ErrorCode code) {
  switch (code) {
    case ErrorCode::invalid_argument:
    case ErrorCode::parse_error:
    case ErrorCode::invalid_prompt:
    case ErrorCode::prompt_conflict:
    case ErrorCode::dimension_mismatch:
      return 400;
    default:
      return 500;
  }
}

void send_error(httplib::Response& res, int status, const std::string& code, const std::string& message) {
  res.status = status;
  res.set_content(json{{"error", {{"code", code}, {"message", message}}}}.dump(), "application/json");
}

void send_json(httplib::Response& res, const json& body) { res.set_content(body.dump(), "application/json"); }

void send_png(httplib::Response& res, const RgbImage& image) {
  const auto bytes = io::encode_png(image);
  res.set_content(std::string(bytes.begin(), bytes.end()), "image/png");
}

json parse_body(const httplib::Request& req) {
  try {
    return req.body.empty() ? json::object() : json::parse(req.body);
  } catch (const json::exception& e) {
    fail(ErrorCode::parse_error, std::string("request body: ") + e.what());
  }
}

// Wraps a handler so homer::Error and JSON errors become structured bodies.
template <typename Fn>
httplib::Server::Handler guarded(Fn fn) {
  return [fn](const httplib::Request& req, httplib::Response& res) {
    try {
      fn(req, res);
    } catch (const Error& e) {
      send_error(res, http_status(e.code()), std::string(to_string(e.code())), e.what());
    } catch (const json::exception& e) {
      send_error(res, 400, "parse_error", e.what());
    } catch (const std::exception& e) {
      send_error(res, 500, "internal", e.what());
    }
  };
}

std::size_t view_param(const httplib::Request& req, std::size_t count) {
  const std::size_t i = std::stoul(req.matches[1].str());
  if (i >= count) {
    throw Error(ErrorCode::invalid_argument, "view " + std::to_string(i) + " out of range (" +
                                                 std::to_string(count) + " views)");
  }
  return i;
}

json masks_json(const std::vector<BinaryMask>& masks) {
  json out = json::array();
  for (std::size_t k = 0; k < masks.size(); ++k) out.push_back({{"object_id", k + 1}, {"rle", io::encode_rle(masks[k])}});
  return out;
}

}  // namespace

std::string to_string(JobState s) {
  switch (s) {
    case JobState::queued: return "queued";
    case JobState::running: return "running";
    case JobState::done: return "done";
    case JobState::failed: return "failed";
  }
  return "failed";
}

json Job::to_json() const {
  json j = {{"id", id},
            {"state", service::to_string(state)},
            {"progress", {{"stage", progress.stage}, {"views_done", progress.views_done},
                          {"views_total", progress.views_total}}},
            {"result_path", result_path.empty() ? json(nullptr) : json(result_path)},
            {"error", error ? json{{"code", error->first}, {"message", error->second}} : json(nullptr)}};
  if (result) {
    j["degraded_views"] = result->degraded_views();
    json prov = json::array();
    for (const auto& v : result->views) prov.push_back(pipeline::to_string(v.provenance));
    j["provenance"] = prov;
  }
  return j;
}

Service::Service(pipeline::ViewSet views, pipeline::PipelineConfig base_config, fs::path run_root)
    : views_(std::move(views)),
      base_config_(std::move(base_config)),
      run_root_(std::move(run_root)),
      preview_oracles_(pipeline::make_oracles(base_config_.oracles)),
      server_(std::make_unique<httplib::Server>()) {
  pipeline::validate(views_);
  register_routes();
  worker_ = std::thread([this] { worker_loop(); });
}

Service::~Service() {
  stop();
  {
    std::lock_guard lock(mutex_);
    stopping_ = true;
  }
  cv_.notify_all();
  if (worker_.joinable()) worker_.join();
}

bool Service::listen(const std::string& host, int port) { return server_->listen(host, port); }

int Service::start_background(const std::string& host) {
  const int port = server_->bind_to_any_port(host);
  if (port < 0) return -1;
  server_thread_ = std::thread([this] { server_->listen_after_bind(); });
  server_->wait_until_ready();
  return port;
}

void Service::stop() {
  if (server_) server_->stop();
  if (server_thread_.joinable()) server_thread_.join();
}

std::string Service::submit(const json& body) {
  auto job = std::make_shared<Job>();
  if (!body.contains("prompts")) fail(ErrorCode::invalid_argument, "propagate: body needs a 'prompts' object");
  job->prompts = prompts::prompts_from_json(body["prompts"]);
  if (job->prompts.view_index >= views_.views.size()) {
    fail(ErrorCode::invalid_prompt, "prompts reference view " + std::to_string(job->prompts.view_index) +
                                        " but there are " + std::to_string(views_.views.size()) + " views");
  }
  prompts::validate(job->prompts, views_.size());
  json cfg = pipeline::to_json(base_config_);
  if (body.contains("config") && !body["config"].is_null()) {
    const json& patch = body["config"];
    if (patch.is_object() && patch.contains("oracles") && patch["oracles"].is_object()) {
      for (const char* key : {"matcher_command", "segmenter_command", "inpainter_command"}) {
        if (patch["oracles"].contains(key)) {
          fail(ErrorCode::invalid_argument,
               std::string("propagate: oracles.") + key + " can only be set in the server's own configuration");
        }
      }
    }
    cfg.merge_patch(patch);
  }
  job->config = pipeline::config_from_json(cfg);
  job->progress = {"queued", 0, views_.views.size()};
  {
    std::lock_guard lock(mutex_);
    job->id = "job-" + std::to_string(next_id_++);
    jobs_[job->id] = job;
    queue_.push_back(job);
  }
  cv_.notify_all();
  return job->id;
}

std::optional<json> Service::job_json(const std::string& id) const {
  std::lock_guard lock(mutex_);
  const auto it = jobs_.find(id);
  if (it == jobs_.end()) return std::nullopt;
  return it->second->to_json();
}

void Service::wait(const std::string& id) {
  std::unique_lock lock(mutex_);
  cv_.wait(lock, [&] {
    const auto it = jobs_.find(id);
    return it == jobs_.end() || it->second->state == JobState::done || it->second->state == JobState::failed;
  });
}

std::shared_ptr<const pipeline::PropagationResult> Service::latest_result() const {
  std::lock_guard lock(mutex_);
  return latest_;
}

void Service::worker_loop() {
  for (;;) {
    std::shared_ptr<Job> job;
    {
      std::unique_lock lock(mutex_);
      cv_.wait(lock, [&] { return stopping_ || !queue_.empty(); });
      if (stopping_) return;
      job = queue_.front();
      queue_.pop_front();
      job->state = JobState::running;
      job->progress.stage = "starting";
    }
    cv_.notify_all();
    run_job(job);
    cv_.notify_all();
  }
}

void Service::run_job(const std::shared_ptr<Job>& job) {
  const fs::path out = run_root_ / job->id;
  const std::size_t total = views_.views.size();
  auto on_progress = [&](const pipeline::Progress& p) {
    std::lock_guard lock(mutex_);
    job->progress.stage = p.stage;
    job->progress.views_total = total;
    // views count as done once inpainted; the source finishes with the interaction
    std::size_t done = job->progress.views_done;
    if (p.stage == "interaction" && p.views_done == p.views_total) done = std::max<std::size_t>(done, 1);
    if (p.stage == "inpaint") done = std::max(done, 1 + p.views_done);
    job->progress.views_done = std::min(done, total);
  };
  try {
    std::lock_guard oracle_lock(oracle_mutex_);
    const auto oracle_set = pipeline::make_oracles(job->config.oracles);
    auto result = std::make_shared<pipeline::PropagationResult>(
        pipeline::run(views_, job->prompts, oracle_set, job->config, on_progress));
    pipeline::write_outputs(*result, views_, job->config, out);
    std::lock_guard lock(mutex_);
    job->result = result;
    job->result_path = out.string();
    job->progress.stage = "done";
    job->progress.views_done = total;
    job->state = JobState::done;
    latest_ = result;
  } catch (const Error& e) {
    std::lock_guard lock(mutex_);
    job->error = std::pair(std::string(to_string(e.code())), std::string(e.what()));
    job->state = JobState::failed;
    log::warn("job " + job->id + " failed: " + e.what());
  } catch (const std::exception& e) {
    std::lock_guard lock(mutex_);
    job->error = std::pair(std::string("internal"), std::string(e.what()));
    job->state = JobState::failed;
  }
}

void Service::register_routes() {
  auto& s = *server_;
  s.Get("/api/views", guarded([this](const httplib::Request&, httplib::Response& res) {
          json out = json::array();
          for (std::size_t i = 0; i < views_.views.size(); ++i) {
            out.push_back({{"index", i}, {"width", views_.views[i].width()}, {"height", views_.views[i].height()}});
          }
          send_json(res, out);
        }));
  s.Get(R"(/api/views/(\d+)/image)", guarded([this](const httplib::Request& req, httplib::Response& res) {
          send_png(res, views_.views[view_param(req, views_.views.size())]);
        }));
  s.Post(R"(/api/views/(\d+)/segment)", guarded([this](const httplib::Request& req, httplib::Response& res) {
           const std::size_t i = view_param(req, views_.views.size());
           json body = parse_body(req);
           body["view_index"] = i;
           const auto p = prompts::prompts_from_json(body);
           std::vector<BinaryMask> masks;
           {
             std::lock_guard lock(oracle_mutex_);
             masks = prompts::segment_objects(views_.views[i], p, *preview_oracles_.segmenter);
           }
           send_json(res, {{"masks", masks_json(masks)}});
         }));
  s.Post("/api/propagate", guarded([this](const httplib::Request& req, httplib::Response& res) {
           const std::string id = submit(parse_body(req));
           res.status = 202;
           send_json(res, {{"job_id", id}});
         }));
  s.Get(R"(/api/jobs/([A-Za-z0-9_-]+))", guarded([this](const httplib::Request& req, httplib::Response& res) {
          const auto j = job_json(req.matches[1].str());
          if (!j) return send_error(res, 404, "not_found", "no job '" + req.matches[1].str() + "'");
          send_json(res, *j);
        }));
  s.Get(R"(/api/results/(\d+)/image)", guarded([this](const httplib::Request& req, httplib::Response& res) {
          const std::size_t j = view_param(req, views_.views.size());
          const auto r = latest_result();
          if (!r) return send_error(res, 404, "no_results", "no propagation job has completed yet");
          send_png(res, r->views[j].inpainted);
        }));
  s.Get(R"(/api/results/(\d+)/masks)", guarded([this](const httplib::Request& req, httplib::Response& res) {
          const std::size_t j = view_param(req, views_.views.size());
          const auto r = latest_result();
          if (!r) return send_error(res, 404, "no_results", "no propagation job has completed yet");
          std::vector<BinaryMask> masks;
          for (const auto& o : r->views[j].objects) masks.push_back(o.mask);
          send_json(res, masks_json(masks));
        }));
  s.set_error_handler([](const httplib::Request&, httplib::Response& res) {
    if (res.body.empty()) {
      send_error(res, res.status, res.status == 404 ? "not_found" : "http_error", "HTTP " + std::to_string(res.status));
    }
  });
}

}  // namespace homer::service

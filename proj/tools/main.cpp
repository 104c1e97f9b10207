// SPDX-License-Identifier: Apache-2.0
#include <CLI11.hpp>

#include <csignal>
#include <cstdio>
#include <iostream>
#include <iterator>

#include "homer/error.hpp"
#include "homer/io.hpp"
#include "homer/log.hpp"
#include "homer/metrics.hpp"
#include "homer/pipeline.hpp"
#include "homer/scenegen.hpp"
#include "homer/subprocess_oracle.hpp"
#include "service/service.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace homer;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInput = 2;
constexpr int kExitDegraded = 3;
constexpr int kExitAbort = 4;

void print_error(const Error& e) {
  std::fprintf(stderr, "error [%s]: %s\n", std::string(to_string(e.code())).c_str(), e.what());
}

pipeline::PipelineConfig load_config(const std::string& path) {
  return path.empty() ? pipeline::PipelineConfig{} : pipeline::config_from_json(io::read_json(path));
}

struct GenerateArgs {
  std::string spec;
  std::string out;
  std::uint64_t seed = 1;
  int views = 20;
  int width = 512;
  int height = 512;
  unsigned threads = 0;
};

int cmd_generate(const GenerateArgs& a) {
  scenegen::SceneSpec spec;
  try {
    spec = a.spec.empty() ? scenegen::standard_scene_spec(a.seed, a.views, Size{a.width, a.height})
                          : scenegen::scene_spec_from_json(io::read_json(a.spec));
    scenegen::validate(spec);
  } catch (const Error& e) {
    print_error(e);
    return kExitInput;
  }
  const auto scene = scenegen::generate(spec, a.threads);
  std::cout << scenegen::write_scene(scene, a.out).string() << "\n";
  return kExitOk;
}

struct RunArgs {
  std::string manifest;
  std::string prompts;
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> threads;
  std::optional<std::string> matcher_cmd, segmenter_cmd, inpainter_cmd;
};

int cmd_run(const RunArgs& a) {
  pipeline::ViewSet views;
  prompts::PromptSet prompt_set;
  pipeline::PipelineConfig cfg;
  oracles::OracleSet oracle_set;
  try {
    views = pipeline::load_view_set(a.manifest);
    prompt_set = prompts::prompts_from_json(io::read_json(a.prompts));
    cfg = load_config(a.config);
    if (a.seed) {
      cfg.ransac.rng_seed = *a.seed;
      cfg.anchor.sc.rng_seed = *a.seed;
    }
    if (a.threads) cfg.threads = *a.threads;
    if (a.matcher_cmd) cfg.oracles.matcher_command = a.matcher_cmd;
    if (a.segmenter_cmd) cfg.oracles.segmenter_command = a.segmenter_cmd;
    if (a.inpainter_cmd) cfg.oracles.inpainter_command = a.inpainter_cmd;
    pipeline::validate(cfg);
    oracle_set = pipeline::make_oracles(cfg.oracles);
  } catch (const Error& e) {
    print_error(e);
    return kExitInput;
  }
  try {
    const auto result = pipeline::run(views, prompt_set, oracle_set, cfg, [](const pipeline::Progress& p) {
      log::debug(p.stage + " " + std::to_string(p.views_done) + "/" + std::to_string(p.views_total));
    });
    pipeline::write_outputs(result, views, cfg, a.out);
    const auto degraded = result.degraded_views();
    if (!degraded.empty()) {
      std::string list;
      for (auto v : degraded) list += (list.empty() ? "" : ",") + std::to_string(v);
      std::fprintf(stderr, "degraded views: %s\n", list.c_str());
      return kExitDegraded;
    }
    return kExitOk;
  } catch (const Error& e) {
    print_error(e);
    try {
      pipeline::write_abort_report(a.out, std::string(to_string(e.code())), e.what());
    } catch (const Error& w) {
      print_error(w);
    }
    return kExitAbort;
  }
}

int cmd_eval(const std::string& run_dir, const std::string& gt_dir) {
  try {
    const auto report = metrics::evaluate_run(run_dir, gt_dir);
    metrics::write_eval(report, fs::path(run_dir) / "eval");
    std::printf("views=%zu iou_mean=%.4f iou_min=%.4f psnr_mean=%.2f psnr_masked_mean=%.2f ssim_mean=%.4f\n",
                report.views.size(), report.iou.mean, report.iou.min, report.psnr_db.mean,
                report.psnr_masked_db.mean, report.ssim.mean);
    return kExitOk;
  } catch (const Error& e) {
    print_error(e);
    return kExitInput;
  }
}

service::Service* g_service = nullptr;

void on_signal(int) {
  if (g_service) g_service->stop();
}

int cmd_serve(const std::string& manifest, const std::string& config, const std::string& host, int port,
              const std::string& out) {
  std::unique_ptr<service::Service> svc;
  try {
    svc = std::make_unique<service::Service>(pipeline::load_view_set(manifest), load_config(config), out);
  } catch (const Error& e) {
    print_error(e);
    return kExitInput;
  }
  g_service = svc.get();
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  std::fprintf(stderr, "serving on http://%s:%d\n", host.c_str(), port);
  if (!svc->listen(host, port)) {
    std::fprintf(stderr, "error [io_error]: cannot listen on %s:%d\n", host.c_str(), port);
    g_service = nullptr;
    return kExitAbort;
  }
  g_service = nullptr;
  return kExitOk;
}

int cmd_oracle(const std::string& config) {
  try {
    const auto cfg = load_config(config);
    pipeline::OracleConfig builtin = cfg.oracles;
    builtin.matcher_command.reset();
    builtin.segmenter_command.reset();
    builtin.inpainter_command.reset();
    const auto set = pipeline::make_oracles(builtin);
    const std::string input{std::istreambuf_iterator<char>(std::cin), std::istreambuf_iterator<char>()};
    json request;
    try {
      request = json::parse(input);
    } catch (const json::exception& e) {
      std::cout << json{{"status", "error"}, {"code", "parse_error"}, {"message", e.what()}}.dump() << "\n";
      return kExitInput;
    }
    const json reply = oracles::serve_oracle_request(request, *set.segmenter, *set.inpainter, *set.matcher);
    std::cout << reply.dump() << "\n";
    return reply.value("status", "") == "ok" ? kExitOk : kExitAbort;
  } catch (const Error& e) {
    print_error(e);
    return kExitInput;
  }
}

}  // namespace

int main(int argc, char** argv) {
  log::init_from_env();
  CLI::App app{"homer: multi-view object removal"};
  app.require_subcommand(1);

  GenerateArgs gen;
  auto* g = app.add_subcommand("generate-scene", "Render a synthetic planar scene with ground truth");
  g->add_option("--spec", gen.spec, "Scene spec JSON (default: the standard three-object scene)");
  g->add_option("--out", gen.out, "Output directory")->required();
  g->add_option("--seed", gen.seed, "Seed for the standard scene");
  g->add_option("--views", gen.views, "View count for the standard scene");
  g->add_option("--width", gen.width);
  g->add_option("--height", gen.height);
  g->add_option("--threads", gen.threads, "Render threads (0 = all cores)");

  RunArgs run;
  auto* r = app.add_subcommand("run", "Remove the prompted objects from every view");
  r->add_option("--manifest", run.manifest)->required();
  r->add_option("--prompts", run.prompts)->required();
  r->add_option("--config", run.config);
  r->add_option("--out", run.out)->required();
  r->add_option("--seed", run.seed, "Seed for RANSAC and shape-context sampling");
  r->add_option("--threads", run.threads, "Worker threads (0 = all cores)");
  r->add_option("--oracle-cmd-matcher", run.matcher_cmd);
  r->add_option("--oracle-cmd-segmenter", run.segmenter_cmd);
  r->add_option("--oracle-cmd-inpainter", run.inpainter_cmd);

  std::string eval_run, eval_gt;
  auto* e = app.add_subcommand("eval", "Score a run directory against ground truth");
  e->add_option("--run", eval_run)->required();
  e->add_option("--gt", eval_gt, "Ground-truth directory or scene root")->required();

  std::string serve_manifest, serve_config, serve_host = "127.0.0.1", serve_out = "runs";
  int serve_port = 8080;
  auto* s = app.add_subcommand("serve", "HTTP API for interactive annotation and propagation jobs");
  s->add_option("--manifest", serve_manifest)->required();
  s->add_option("--config", serve_config);
  s->add_option("--host", serve_host);
  s->add_option("--port", serve_port);
  s->add_option("--out", serve_out, "Root directory for job outputs");

  std::string oracle_config;
  auto* o = app.add_subcommand("oracle", "Answer one subprocess-oracle request from stdin with the built-ins");
  o->add_option("--config", oracle_config, "Pipeline config whose oracle section tunes the built-ins");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    const int code = app.exit(err);
    return code == 0 ? kExitOk : kExitInput;
  }

  try {
    if (*g) return cmd_generate(gen);
    if (*r) return cmd_run(run);
    if (*e) return cmd_eval(eval_run, eval_gt);
    if (*s) return cmd_serve(serve_manifest, serve_config, serve_host, serve_port, serve_out);
    if (*o) return cmd_oracle(oracle_config);
  } catch (const Error& err) {
    print_error(err);
    return kExitAbort;
  } catch (const std::exception& err) {
    std::fprintf(stderr, "error: %s\n", err.what());
    return kExitAbort;
  }
  return kExitInput;
}

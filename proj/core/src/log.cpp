// SPDX-License-Identifier: Apache-2.0
#include "homer/log.hpp"

#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <cstdlib>
#include <memory>
#include <mutex>
#include <string>

namespace homer::log {

namespace {

std::shared_ptr<spdlog::logger> logger() {
  static std::shared_ptr<spdlog::logger> instance = [] {
    auto l = spdlog::stderr_color_mt("homer");
    l->set_pattern("[%H:%M:%S.%e] [%^%l%$] %v");
    l->set_level(spdlog::level::warn);
    return l;
  }();
  return instance;
}

spdlog::level::level_enum to_spdlog(Level level) {
  switch (level) {
    case Level::error: return spdlog::level::err;
    case Level::warn: return spdlog::level::warn;
    case Level::info: return spdlog::level::info;
    case Level::debug: return spdlog::level::debug;
  }
  return spdlog::level::warn;
}

}  // namespace

void init_from_env() {
  static std::once_flag flag;
  std::call_once(flag, [] {
    const char* env = std::getenv("HOMER_LOG");
    const std::string v = env ? env : "";
    if (v == "error") set_level(Level::error);
    else if (v == "info") set_level(Level::info);
    else if (v == "debug") set_level(Level::debug);
    else set_level(Level::warn);
  });
}

void set_level(Level level) { logger()->set_level(to_spdlog(level)); }

void error(std::string_view msg) { logger()->error(msg); }
void warn(std::string_view msg) { logger()->warn(msg); }
void info(std::string_view msg) { logger()->info(msg); }
void debug(std::string_view msg) { logger()->debug(msg); }

}  // namespace homer::log

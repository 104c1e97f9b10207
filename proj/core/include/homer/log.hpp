// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string_view>

namespace homer::log {

enum class Level { error, warn, info, debug };

/// Reads HOMER_LOG (error|warn|info|debug, default warn) once and configures
/// the stderr logger. Safe to call repeatedly.
void init_from_env();
void set_level(Level level);

void error(std::string_view msg);
void warn(std::string_view msg);
void info(std::string_view msg);
void debug(std::string_view msg);

}  // namespace homer::log

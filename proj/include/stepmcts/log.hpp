#pragma once

#include <string_view>

namespace stepmcts {

enum class LogLevel { Debug, Info, Warning, Error, Off };

/// Process-wide threshold; messages below it are dropped. Default: Info.
void set_log_level(LogLevel level);
LogLevel log_level();

/// Thread-safe, one line per call, written to stderr.
void log(LogLevel level, std::string_view message);

inline void log_info(std::string_view m) { log(LogLevel::Info, m); }
inline void log_warning(std::string_view m) { log(LogLevel::Warning, m); }

}  // namespace stepmcts

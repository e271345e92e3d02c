#pragma once

#include <cstdio>
#include <cstdlib>
#include <string>

namespace fedtrust {

// Verbosity from the FEDTRUST_LOG environment variable: off (default), info,
// or debug. Messages go to stderr so CSV on stdout stays clean.
enum class LogLevel { Off = 0, Info = 1, Debug = 2 };

inline LogLevel log_level() {
  static const LogLevel level = [] {
    const char* env = std::getenv("FEDTRUST_LOG");
    if (!env) return LogLevel::Off;
    std::string v(env);
    if (v == "debug") return LogLevel::Debug;
    if (v == "info") return LogLevel::Info;
    return LogLevel::Off;
  }();
  return level;
}

template <typename... Args>
void log_info(const char* fmt, Args... args) {
  if (log_level() >= LogLevel::Info) {
    std::fprintf(stderr, "[fedtrust] ");
    std::fprintf(stderr, fmt, args...);
    std::fprintf(stderr, "\n");
  }
}

template <typename... Args>
void log_debug(const char* fmt, Args... args) {
  if (log_level() >= LogLevel::Debug) {
    std::fprintf(stderr, "[fedtrust] ");
    std::fprintf(stderr, fmt, args...);
    std::fprintf(stderr, "\n");
  }
}

}  // namespace fedtrust

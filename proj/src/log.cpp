#include "covtriage/log.hpp"

#include <cstdlib>
#include <iostream>

namespace covtriage {

namespace {

LogLevel parse_level(const char* s) {
  if (!s) return LogLevel::Warn;
  std::string v(s);
  if (v == "error") return LogLevel::Error;
  if (v == "warn") return LogLevel::Warn;
  if (v == "info") return LogLevel::Info;
  if (v == "debug") return LogLevel::Debug;
  return LogLevel::Warn;
}

const char* level_name(LogLevel level) {
  switch (level) {
    case LogLevel::Error: return "error";
    case LogLevel::Warn: return "warn";
    case LogLevel::Info: return "info";
    case LogLevel::Debug: return "debug";
  }
  return "?";
}

}  // namespace

LogLevel log_level() {
  static const LogLevel level = parse_level(std::getenv("PIPELINE_LOG"));
  return level;
}

void log_message(LogLevel level, const std::string& msg) {
  if (static_cast<int>(level) <= static_cast<int>(log_level())) {
    std::cerr << "[" << level_name(level) << "] " << msg << "\n";
  }
}

}  // namespace covtriage

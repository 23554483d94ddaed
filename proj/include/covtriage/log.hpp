#ifndef COVTRIAGE_LOG_HPP
#define COVTRIAGE_LOG_HPP

#include <string>

namespace covtriage {

enum class LogLevel { Error = 0, Warn = 1, Info = 2, Debug = 3 };

/// Current verbosity. Initialised once from the PIPELINE_LOG environment
/// variable (error|warn|info|debug); defaults to warn.
LogLevel log_level();

void log_message(LogLevel level, const std::string& msg);

inline void log_warn(const std::string& msg) { log_message(LogLevel::Warn, msg); }
inline void log_info(const std::string& msg) { log_message(LogLevel::Info, msg); }
inline void log_debug(const std::string& msg) { log_message(LogLevel::Debug, msg); }

}  // namespace covtriage

#endif

#pragma once

#include <functional>
#include <string>

// Minimal thread-safe logger writing to stderr.
namespace agenther::log {

enum class Level { kDebug = 0, kInfo = 1, kWarn = 2, kError = 3, kOff = 4 };

void set_level(Level level);
Level level();

// Replaces stderr output; pass an empty function to restore it.
void set_sink(std::function<void(Level, const std::string&)> sink);

void debug(const std::string& msg);
void info(const std::string& msg);
void warn(const std::string& msg);
void error(const std::string& msg);

}  // namespace agenther::log

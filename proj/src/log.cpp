#include "agenther/log.hpp"

#include <atomic>
#include <iostream>
#include <mutex>

namespace agenther::log {

namespace {

std::atomic<Level> g_level{Level::kWarn};
std::mutex g_mu;
std::function<void(Level, const std::string&)> g_sink;

const char* label(Level l) {
  switch (l) {
    case Level::kDebug: return "debug";
    case Level::kInfo: return "info";
    case Level::kWarn: return "warn";
    case Level::kError: return "error";
    case Level::kOff: break;
  }
  return "";
}

void emit(Level l, const std::string& msg) {
  if (l < g_level.load(std::memory_order_relaxed)) return;
  std::lock_guard lock(g_mu);
  if (g_sink) {
    g_sink(l, msg);
  } else {
    std::cerr << "[" << label(l) << "] " << msg << '\n';
  }
}

}  // namespace

void set_level(Level level) { g_level.store(level); }
Level level() { return g_level.load(); }

void set_sink(std::function<void(Level, const std::string&)> sink) {
  std::lock_guard lock(g_mu);
  g_sink = std::move(sink);
}

void debug(const std::string& msg) { emit(Level::kDebug, msg); }
void info(const std::string& msg) { emit(Level::kInfo, msg); }
void warn(const std::string& msg) { emit(Level::kWarn, msg); }
void error(const std::string& msg) { emit(Level::kError, msg); }

}  // namespace agenther::log

#include <atomic>
#include <condition_variable>
#include <cstdlib>
#include <thread>

#include "agenther/errors.hpp"
#include "agenther/judge.hpp"
#include "agenther/log.hpp"
#include "agenther/text.hpp"
#include "httplib.h"

namespace agenther {

using nlohmann::json;

namespace {

struct Endpoint {
  std::string base;  // scheme://host[:port]
  std::string path;
};

Endpoint split_endpoint(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw std::invalid_argument("endpoint must be an absolute URL: " + url);
  const auto path_start = url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) return {url, "/"};
  return {url.substr(0, path_start), url.substr(path_start)};
}

bool is_transient(int status) { return status == 429 || (status >= 500 && status <= 599); }

}  // namespace

// Caps concurrent requests at max_in_flight.
struct HttpJudge::State {
  std::mutex mu;
  std::condition_variable cv;
  int in_flight = 0;
  std::atomic<std::uint64_t> calls{0};
};

HttpJudge::HttpJudge(HttpJudgeConfig cfg, Sleeper sleeper)
    : cfg_(std::move(cfg)), sleeper_(std::move(sleeper)), state_(std::make_unique<State>()) {
  if (cfg_.max_in_flight < 1) throw std::invalid_argument("max_in_flight must be >= 1");
  if (cfg_.retry_budget < 0) throw std::invalid_argument("retry_budget must be >= 0");
  split_endpoint(cfg_.endpoint);
  if (!sleeper_) sleeper_ = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
}

HttpJudge::~HttpJudge() = default;

json HttpJudge::request_body(const JudgeRequest& req) const {
  return {{"model", cfg_.model},
          {"messages",
           json::array({{{"role", "system"}, {"content", cfg_.system_prompt}},
                        {{"role", "user"}, {"content", req.filled_prompt}}})},
          {"temperature", req.temperature}};
}

std::chrono::milliseconds HttpJudge::backoff_delay(int retry) const {
  const double base = static_cast<double>(cfg_.backoff_base.count());
  double delay = base;
  for (int i = 1; i < retry && delay < static_cast<double>(cfg_.backoff_max.count()); ++i) delay *= 2.0;
  delay = std::min(delay, static_cast<double>(cfg_.backoff_max.count()));
  // Jitter: uniform over [delay/2, delay].
  const std::uint64_t bits = text::splitmix64(cfg_.jitter_seed ^ state_->calls.fetch_add(1) ^
                                              (static_cast<std::uint64_t>(retry) << 32));
  delay *= 0.5 + 0.5 * text::unit_interval(bits);
  return std::chrono::milliseconds(static_cast<long long>(delay));
}

JudgeResponse HttpJudge::call(const JudgeRequest& req) {
  req.validate();
  const char* key = std::getenv(cfg_.api_key_env.c_str());
  if (key == nullptr || *key == '\0') {
    throw AuthError("environment variable " + cfg_.api_key_env + " is not set");
  }

  {
    std::unique_lock lock(state_->mu);
    state_->cv.wait(lock, [&] { return state_->in_flight < cfg_.max_in_flight; });
    ++state_->in_flight;
  }
  struct Release {
    State& s;
    ~Release() {
      {
        std::lock_guard lock(s.mu);
        --s.in_flight;
      }
      s.cv.notify_one();
    }
  } release{*state_};

  const Endpoint ep = split_endpoint(cfg_.endpoint);
  httplib::Client client(ep.base);
  const auto secs = std::chrono::duration_cast<std::chrono::seconds>(cfg_.timeout);
  const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(cfg_.timeout - secs);
  client.set_connection_timeout(secs.count(), usecs.count());
  client.set_read_timeout(secs.count(), usecs.count());
  client.set_write_timeout(secs.count(), usecs.count());
  client.set_bearer_token_auth(key);

  const std::string body = request_body(req).dump();
  const auto start = std::chrono::steady_clock::now();
  std::string last_error;
  const int max_attempts = 1 + cfg_.retry_budget;
  for (int attempt = 1; attempt <= max_attempts; ++attempt) {
    auto res = client.Post(ep.path, body, "application/json");
    if (res && res->status >= 200 && res->status < 300) {
      const json reply = json::parse(res->body, nullptr, false);
      if (reply.is_discarded()) throw TransportError("chat-completion reply is not JSON");
      std::string content;
      try {
        content = reply.at("choices").at(0).at("message").at("content").get<std::string>();
      } catch (const json::exception& e) {
        throw TransportError(std::string("unexpected chat-completion reply shape: ") + e.what());
      }
      return make_response(req, std::move(content), std::chrono::steady_clock::now() - start, attempt);
    }
    if (res && (res->status == 401 || res->status == 403)) {
      throw AuthError("judge endpoint rejected the credentials (HTTP " + std::to_string(res->status) + ")");
    }
    if (res && !is_transient(res->status)) {
      throw TransportError("judge endpoint returned HTTP " + std::to_string(res->status));
    }
    last_error = res ? "HTTP " + std::to_string(res->status) : httplib::to_string(res.error());
    if (attempt < max_attempts) {
      const auto delay = backoff_delay(attempt);
      log::info("judge call failed (" + last_error + "), retry " + std::to_string(attempt) + " in " +
                std::to_string(delay.count()) + " ms");
      sleeper_(delay);
    }
  }
  throw TransportError("judge call failed after " + std::to_string(max_attempts) +
                       " attempts: " + last_error);
}

}  // namespace agenther

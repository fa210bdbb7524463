#pragma once

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "json.hpp"

namespace agenther {

// ---------------------------------------------------------------------------
// Prompt templates
// ---------------------------------------------------------------------------

enum class TemplateId { kStage1, kStage2, kStage3, kSecondJudge };

std::string to_string(TemplateId id);
TemplateId parse_template_id(std::string_view s);

// Template text exactly as shipped in prompts/<id>.txt.
std::string_view template_text(TemplateId id);

using Bindings = std::map<std::string, std::string>;

// Placeholder names (`{name}` with name in [a-z_]) in order of appearance.
// Brace groups holding anything else, such as the JSON schema hints, are
// literal text.
std::vector<std::string> placeholders(std::string_view tmpl);

// Single-pass substitution: bound values are inserted verbatim and never
// re-scanned. An unbound placeholder throws std::invalid_argument naming it.
std::string render_text(std::string_view tmpl, const Bindings& bindings);
std::string render_template(TemplateId id, const Bindings& bindings);

// ---------------------------------------------------------------------------
// Requests and responses
// ---------------------------------------------------------------------------

struct JudgeRequest {
  TemplateId template_id = TemplateId::kStage3;
  std::string filled_prompt;
  double temperature = 0.0;
  std::size_t max_response_bytes = 64 * 1024;
  // 1-based relabel attempt this request belongs to. Retries of Stage 3
  // reuse the same prompt, so replay and the mock use this to tell them
  // apart.
  int sample = 1;

  void validate() const;
};

struct JudgeResponse {
  std::string raw_text;
  std::optional<nlohmann::json> parsed_json;
  std::chrono::nanoseconds latency{0};
  int attempt = 1;  // transport attempts used
};

// Fingerprint of (template_id, filled_prompt), 16 hex digits.
std::string fingerprint(TemplateId id, std::string_view filled_prompt);

// Removes a surrounding ```/```json fence, if any, and outer whitespace.
std::string strip_code_fences(std::string_view raw);
std::optional<nlohmann::json> parse_judge_json(std::string_view raw);

// Builds a response and enforces the request's size cap (BackendError).
JudgeResponse make_response(const JudgeRequest& req, std::string raw,
                            std::chrono::nanoseconds latency = {}, int attempt = 1);

// ---------------------------------------------------------------------------
// Backends
// ---------------------------------------------------------------------------

// Backends must accept concurrent calls.
class JudgeBackend {
 public:
  virtual ~JudgeBackend() = default;
  virtual JudgeResponse call(const JudgeRequest& req) = 0;
  virtual std::string name() const = 0;
};

// Calls the judge and returns its JSON object. With `reask`, a response
// that is not JSON is asked for once more before giving up with a
// SchemaError.
nlohmann::json call_for_json(JudgeBackend& judge, const JudgeRequest& req, bool reask);

// Deterministic stand-in for an LLM judge. Every answer is derived from a
// 64-bit hash of (template id, filled prompt, sample, seed); the confidence
// is that hash mapped onto [0, 1).
class MockJudge final : public JudgeBackend {
 public:
  explicit MockJudge(std::uint64_t seed = 0) : seed_(seed) {}

  JudgeResponse call(const JudgeRequest& req) override;
  std::string name() const override { return "mock"; }

  double confidence_for(const JudgeRequest& req) const;

 private:
  std::uint64_t hash_for(const JudgeRequest& req, std::uint64_t salt) const;

  std::uint64_t seed_;
};

struct TranscriptEntry {
  std::string fingerprint;
  std::optional<int> sample;  // absent: answers every sample
  std::string raw_text;
};

// Recorded judge answers keyed by request fingerprint (and optionally the
// attempt sample), so replay does not depend on call order.
class Transcript {
 public:
  void add(TranscriptEntry entry);
  // Exact (fingerprint, sample) match first, then the sample-less entry.
  const TranscriptEntry* find(std::string_view fp, int sample) const;
  const std::vector<TranscriptEntry>& entries() const noexcept { return entries_; }
  std::size_t size() const noexcept { return entries_.size(); }

  static Transcript load(const std::filesystem::path& path);
  static Transcript parse(std::string_view jsonl);
  std::string serialize() const;
  void save(const std::filesystem::path& path) const;

 private:
  std::vector<TranscriptEntry> entries_;
  std::unordered_map<std::string, std::size_t> index_;
};

class ScriptedJudge final : public JudgeBackend {
 public:
  explicit ScriptedJudge(Transcript transcript) : transcript_(std::move(transcript)) {}

  JudgeResponse call(const JudgeRequest& req) override;  // TranscriptMissError on a miss
  std::string name() const override { return "scripted"; }

 private:
  Transcript transcript_;
};

// Wraps another backend and records every answer it gives.
class RecordingJudge final : public JudgeBackend {
 public:
  explicit RecordingJudge(JudgeBackend& inner) : inner_(inner) {}

  JudgeResponse call(const JudgeRequest& req) override;
  std::string name() const override { return "recording(" + inner_.name() + ")"; }
  Transcript transcript() const;

 private:
  JudgeBackend& inner_;
  mutable std::mutex mu_;
  Transcript recorded_;
};

struct HttpJudgeConfig {
  std::string endpoint = "http://127.0.0.1:8000/v1/chat/completions";
  std::string model = "gpt-4o-mini";
  std::string api_key_env = "AGENTHER_API_KEY";
  std::string system_prompt = "Respond ONLY with valid JSON.";
  std::chrono::milliseconds timeout{60000};
  int retry_budget = 4;  // retries after the first attempt
  int max_in_flight = 8;
  std::chrono::milliseconds backoff_base{500};
  std::chrono::milliseconds backoff_max{30000};
  std::uint64_t jitter_seed = 0;
};

// Chat-completion transport: POSTs {model, messages:[system, user],
// temperature} with bearer auth and retries timeouts, 429 and 5xx with
// exponential backoff plus jitter.
class HttpJudge final : public JudgeBackend {
 public:
  using Sleeper = std::function<void(std::chrono::milliseconds)>;

  explicit HttpJudge(HttpJudgeConfig cfg, Sleeper sleeper = {});
  ~HttpJudge() override;

  JudgeResponse call(const JudgeRequest& req) override;
  std::string name() const override { return "http"; }

  // Request body for `req`; exposed so the wire format is testable.
  nlohmann::json request_body(const JudgeRequest& req) const;
  std::chrono::milliseconds backoff_delay(int retry) const;

 private:
  struct State;
  HttpJudgeConfig cfg_;
  Sleeper sleeper_;
  std::unique_ptr<State> state_;
};

}  // namespace agenther

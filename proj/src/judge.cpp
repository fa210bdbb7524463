#include "agenther/judge.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

#include "agenther/errors.hpp"
#include "agenther/log.hpp"
#include "agenther/render.hpp"
#include "agenther/text.hpp"

namespace agenther {

namespace assets {
extern const std::string_view kStage1Prompt;
extern const std::string_view kStage2Prompt;
extern const std::string_view kStage3Prompt;
extern const std::string_view kSecondJudgePrompt;
}  // namespace assets

using nlohmann::json;

std::string to_string(TemplateId id) {
  switch (id) {
    case TemplateId::kStage1: return "stage1";
    case TemplateId::kStage2: return "stage2";
    case TemplateId::kStage3: return "stage3";
    case TemplateId::kSecondJudge: return "second_judge";
  }
  return "unknown";
}

TemplateId parse_template_id(std::string_view s) {
  if (s == "stage1") return TemplateId::kStage1;
  if (s == "stage2") return TemplateId::kStage2;
  if (s == "stage3") return TemplateId::kStage3;
  if (s == "second_judge") return TemplateId::kSecondJudge;
  throw std::invalid_argument("unknown template '" + std::string(s) + "'");
}

std::string_view template_text(TemplateId id) {
  switch (id) {
    case TemplateId::kStage1: return assets::kStage1Prompt;
    case TemplateId::kStage2: return assets::kStage2Prompt;
    case TemplateId::kStage3: return assets::kStage3Prompt;
    case TemplateId::kSecondJudge: return assets::kSecondJudgePrompt;
  }
  throw std::invalid_argument("unknown template");
}

namespace {

bool is_name_char(char c) { return (c >= 'a' && c <= 'z') || c == '_'; }

// Length of the placeholder starting at `pos` ("{name}"), or 0.
std::size_t placeholder_at(std::string_view tmpl, std::size_t pos) {
  if (tmpl[pos] != '{') return 0;
  std::size_t end = pos + 1;
  while (end < tmpl.size() && is_name_char(tmpl[end])) ++end;
  if (end == pos + 1 || end >= tmpl.size() || tmpl[end] != '}') return 0;
  return end - pos + 1;
}

}  // namespace

std::vector<std::string> placeholders(std::string_view tmpl) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < tmpl.size(); ++i) {
    if (std::size_t len = placeholder_at(tmpl, i)) {
      out.emplace_back(tmpl.substr(i + 1, len - 2));
      i += len - 1;
    }
  }
  return out;
}

std::string render_text(std::string_view tmpl, const Bindings& bindings) {
  std::string out;
  out.reserve(tmpl.size());
  for (std::size_t i = 0; i < tmpl.size();) {
    if (std::size_t len = placeholder_at(tmpl, i)) {
      const std::string name(tmpl.substr(i + 1, len - 2));
      auto it = bindings.find(name);
      if (it == bindings.end()) throw std::invalid_argument("unbound placeholder {" + name + "}");
      out += it->second;
      i += len;
    } else {
      out += tmpl[i++];
    }
  }
  return out;
}

std::string render_template(TemplateId id, const Bindings& bindings) {
  return render_text(template_text(id), bindings);
}

void JudgeRequest::validate() const {
  if (!(temperature >= 0.0 && temperature <= 2.0)) {
    throw std::invalid_argument("judge temperature must be in [0, 2]");
  }
  if (sample < 1) throw std::invalid_argument("judge sample index must be >= 1");
}

std::string fingerprint(TemplateId id, std::string_view filled_prompt) {
  std::uint64_t h = text::fnv1a64(to_string(id));
  h = text::fnv1a64(std::string_view("\x1f", 1), h);
  h = text::fnv1a64(filled_prompt, h);
  return text::hex64(h);
}

std::string strip_code_fences(std::string_view raw) {
  std::string_view s = text::trim(raw);
  if (s.substr(0, 3) == "```") {
    const auto nl = s.find('\n');
    s = nl == std::string_view::npos ? std::string_view{} : s.substr(nl + 1);
    s = text::trim(s);
    if (s.size() >= 3 && s.substr(s.size() - 3) == "```") s = s.substr(0, s.size() - 3);
    s = text::trim(s);
  }
  return std::string(s);
}

std::optional<json> parse_judge_json(std::string_view raw) {
  json j = json::parse(strip_code_fences(raw), nullptr, /*allow_exceptions=*/false);
  if (j.is_discarded()) return std::nullopt;
  return j;
}

JudgeResponse make_response(const JudgeRequest& req, std::string raw,
                            std::chrono::nanoseconds latency, int attempt) {
  if (raw.size() > req.max_response_bytes) {
    throw BackendError("judge response of " + std::to_string(raw.size()) +
                       " bytes exceeds the " + std::to_string(req.max_response_bytes) + "-byte cap");
  }
  JudgeResponse resp;
  resp.parsed_json = parse_judge_json(raw);
  resp.raw_text = std::move(raw);
  resp.latency = latency;
  resp.attempt = attempt;
  return resp;
}

json call_for_json(JudgeBackend& judge, const JudgeRequest& req, bool reask) {
  req.validate();
  JudgeResponse resp = judge.call(req);
  if (!resp.parsed_json && reask) {
    log::warn(to_string(req.template_id) + ": judge reply is not JSON, asking once more");
    resp = judge.call(req);
  }
  if (!resp.parsed_json) {
    throw SchemaError(to_string(req.template_id) + ": judge reply is not valid JSON");
  }
  if (!resp.parsed_json->is_object()) {
    throw SchemaError(to_string(req.template_id) + ": judge reply is not a JSON object");
  }
  return std::move(*resp.parsed_json);
}

// ---------------------------------------------------------------------------
// MockJudge
// ---------------------------------------------------------------------------

namespace {

// Rest of the line that starts with `marker`, or empty.
std::string line_after(std::string_view prompt, std::string_view marker) {
  const auto pos = prompt.find(marker);
  if (pos == std::string_view::npos) return {};
  const auto start = pos + marker.size();
  const auto nl = prompt.find('\n', start);
  return std::string(prompt.substr(start, nl == std::string_view::npos ? nl : nl - start));
}

// Everything after the first `marker`, or empty.
std::string rest_after(std::string_view prompt, std::string_view marker) {
  const auto pos = prompt.find(marker);
  if (pos == std::string_view::npos) return {};
  return std::string(prompt.substr(pos + marker.size()));
}

constexpr const char* kMockTypes[] = {"incomplete",   "constraint_violation", "wrong_result",
                                      "tool_error",   "hallucination",        "off_topic"};

}  // namespace

std::uint64_t MockJudge::hash_for(const JudgeRequest& req, std::uint64_t salt) const {
  std::uint64_t h = text::fnv1a64(to_string(req.template_id));
  h = text::fnv1a64(std::string_view("\x1f", 1), h);
  h = text::fnv1a64(req.filled_prompt, h);
  h ^= text::splitmix64(seed_);
  h ^= text::splitmix64(static_cast<std::uint64_t>(req.sample) * 0x9e3779b97f4a7c15ULL + salt);
  return text::splitmix64(h);
}

double MockJudge::confidence_for(const JudgeRequest& req) const {
  return text::unit_interval(hash_for(req, 0));
}

JudgeResponse MockJudge::call(const JudgeRequest& req) {
  req.validate();
  const double conf = confidence_for(req);
  const std::uint64_t aux = hash_for(req, 1);
  json reply;
  switch (req.template_id) {
    case TemplateId::kStage1: {
      reply["failure_type"] = kMockTypes[aux % 6];
      reply["severity_score"] = text::unit_interval(hash_for(req, 2));
      reply["recoverability"] = text::unit_interval(hash_for(req, 3)) >= 0.05;
      reply["severity_weight"] = conf;
      reply["explanation"] = "mock assessment";
      break;
    }
    case TemplateId::kStage2: {
      json achievements = json::array();
      for (const Step& s : parse_trajectory_text(rest_after(req.filled_prompt, "Trajectory: "))) {
        if (!text::trim(s.observation).empty()) achievements.push_back(text::utf8_truncate(s.observation, 200));
      }
      reply["actual_achievements"] = std::move(achievements);
      reply["key_observations"] = json::array();
      break;
    }
    case TemplateId::kStage3: {
      std::string first;
      const json outcome =
          json::parse(line_after(req.filled_prompt, "Outcome summary: "), nullptr, false);
      if (outcome.is_object()) {
        for (const char* key : {"actual_achievements", "key_observations"}) {
          auto it = outcome.find(key);
          if (first.empty() && it != outcome.end() && it->is_array() && !it->empty() &&
              it->front().is_string()) {
            first = it->front().get<std::string>();
          }
        }
      }
      const bool valid = !first.empty() && (aux % 100) < 85;
      reply["hindsight_prompt"] = first.empty() ? "" : "Find and report: " + text::utf8_truncate(first, 160);
      reply["is_valid"] = valid;
      reply["rationale"] = "mock relabeling";
      reply["confidence"] = conf;
      break;
    }
    case TemplateId::kSecondJudge: {
      const bool valid = conf >= 0.25;
      reply["is_valid"] = valid;
      reply["confidence"] = conf;
      reply["rejection_reason_if_any"] = valid ? "" : "mock rejection";
      break;
    }
  }
  return make_response(req, reply.dump());
}

// ---------------------------------------------------------------------------
// Transcript / ScriptedJudge / RecordingJudge
// ---------------------------------------------------------------------------

namespace {

std::string transcript_key(std::string_view fp, std::optional<int> sample) {
  return std::string(fp) + "#" + (sample ? std::to_string(*sample) : std::string("*"));
}

}  // namespace

void Transcript::add(TranscriptEntry entry) {
  const std::string key = transcript_key(entry.fingerprint, entry.sample);
  if (auto it = index_.find(key); it != index_.end()) {
    entries_[it->second] = std::move(entry);
    return;
  }
  index_.emplace(key, entries_.size());
  entries_.push_back(std::move(entry));
}

const TranscriptEntry* Transcript::find(std::string_view fp, int sample) const {
  if (auto it = index_.find(transcript_key(fp, sample)); it != index_.end()) return &entries_[it->second];
  if (auto it = index_.find(transcript_key(fp, std::nullopt)); it != index_.end()) return &entries_[it->second];
  return nullptr;
}

Transcript Transcript::parse(std::string_view jsonl) {
  Transcript t;
  std::size_t line_no = 0;
  std::size_t offset = 0;
  while (offset < jsonl.size()) {
    ++line_no;
    auto nl = jsonl.find('\n', offset);
    if (nl == std::string_view::npos) nl = jsonl.size();
    const std::string_view line = jsonl.substr(offset, nl - offset);
    const std::size_t line_offset = offset;
    offset = nl + 1;
    if (text::trim(line).empty()) continue;
    try {
      const json j = json::parse(line);
      TranscriptEntry e;
      e.fingerprint = j.at("fingerprint").get<std::string>();
      e.raw_text = j.at("raw_text").get<std::string>();
      if (auto it = j.find("sample"); it != j.end() && !it->is_null()) e.sample = it->get<int>();
      t.add(std::move(e));
    } catch (const json::exception& e) {
      throw ParseError("transcript line " + std::to_string(line_no) + ": " + e.what(), line_no, line_offset);
    }
  }
  return t;
}

Transcript Transcript::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open transcript " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

std::string Transcript::serialize() const {
  std::string out;
  for (const auto& e : entries_) {
    json j = {{"fingerprint", e.fingerprint}, {"raw_text", e.raw_text}};
    if (e.sample) j["sample"] = *e.sample;
    out += j.dump();
    out += '\n';
  }
  return out;
}

void Transcript::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write transcript " + path.string());
  out << serialize();
}

JudgeResponse ScriptedJudge::call(const JudgeRequest& req) {
  req.validate();
  const std::string fp = fingerprint(req.template_id, req.filled_prompt);
  const TranscriptEntry* e = transcript_.find(fp, req.sample);
  if (e == nullptr) {
    throw TranscriptMissError("no transcript entry for " + to_string(req.template_id) +
                              " request " + fp + " (sample " + std::to_string(req.sample) + ")");
  }
  return make_response(req, e->raw_text);
}

JudgeResponse RecordingJudge::call(const JudgeRequest& req) {
  JudgeResponse resp = inner_.call(req);
  std::lock_guard lock(mu_);
  recorded_.add({fingerprint(req.template_id, req.filled_prompt), req.sample, resp.raw_text});
  return resp;
}

Transcript RecordingJudge::transcript() const {
  std::lock_guard lock(mu_);
  return recorded_;
}

}  // namespace agenther

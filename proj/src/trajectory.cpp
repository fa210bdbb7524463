#include "agenther/trajectory.hpp"

#include <fstream>
#include <sstream>
#include <unordered_map>

#include "agenther/errors.hpp"
#include "agenther/text.hpp"

namespace agenther {

using nlohmann::json;

namespace {

bool in_unit(double v) { return v >= 0.0 && v <= 1.0; }

const std::string& require_string(const json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end()) throw DataError(std::string("missing field '") + key + "'");
  if (!it->is_string()) throw DataError(std::string("field '") + key + "' must be a string");
  return it->get_ref<const std::string&>();
}

std::string optional_string(const json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return {};
  if (!it->is_string()) throw DataError(std::string("field '") + key + "' must be a string");
  return it->get<std::string>();
}

void write_text(const std::filesystem::path& path, const std::string& contents) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot open " + path.string() + " for writing");
  out << contents;
  if (!out) throw DataError("write failed: " + path.string());
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

void PipelineConfig::validate() const {
  if (!in_unit(theta)) throw ConfigError("theta must be in [0, 1]");
  if (!in_unit(delta)) throw ConfigError("delta must be in [0, 1]");
  if (max_retries < 1) throw ConfigError("max_retries must be >= 1");
  for (double t : {temperatures.first_attempt, temperatures.retry, temperatures.second_judge}) {
    if (!(t >= 0.0 && t <= 2.0)) throw ConfigError("temperatures must be in [0, 2]");
  }
  if (concurrency < 1) throw ConfigError("concurrency must be >= 1");
}

std::string to_string(StageMode mode) { return mode == StageMode::kRule ? "rule" : "judge"; }

StageMode parse_stage_mode(const std::string& s) {
  if (s == "rule") return StageMode::kRule;
  if (s == "judge") return StageMode::kJudge;
  throw ConfigError("stage mode must be 'rule' or 'judge', got '" + s + "'");
}

void validate(const Trajectory& traj) {
  if (traj.id.empty()) throw DataError("trajectory id must be non-empty");
  if (traj.steps.empty()) throw DataError("trajectory '" + traj.id + "' has no steps");
  for (std::size_t i = 0; i < traj.steps.size(); ++i) {
    const Step& s = traj.steps[i];
    if (s.index != static_cast<int>(i) + 1) {
      throw DataError("trajectory '" + traj.id + "': step " + std::to_string(i + 1) +
                      " has index " + std::to_string(s.index));
    }
    if (s.observation.empty() && !s.terminal) {
      throw DataError("trajectory '" + traj.id + "': step " + std::to_string(s.index) +
                      " has an empty observation but is not terminal");
    }
  }
}

json to_json(const Step& step) {
  json j = {{"thought", step.thought}, {"action", step.action}, {"observation", step.observation}};
  if (step.terminal) j["terminal"] = true;
  return j;
}

json to_json(const Trajectory& traj) {
  json steps = json::array();
  for (const auto& s : traj.steps) steps.push_back(to_json(s));
  json j = {{"id", traj.id}, {"goal", traj.goal}, {"steps", std::move(steps)}};
  if (traj.failure_label) j["failure_label"] = *traj.failure_label;
  if (!traj.metadata.empty()) j["metadata"] = traj.metadata;
  return j;
}

Step step_from_json(const json& j, int position) {
  if (!j.is_object()) throw DataError("step " + std::to_string(position) + " is not an object");
  Step s;
  s.index = position;
  if (auto it = j.find("index"); it != j.end()) {
    if (!it->is_number_integer() || it->get<int>() != position) {
      throw DataError("step " + std::to_string(position) + " has a mismatched index");
    }
  }
  s.thought = optional_string(j, "thought");
  s.action = optional_string(j, "action");
  s.observation = optional_string(j, "observation");
  if (auto it = j.find("terminal"); it != j.end()) {
    if (!it->is_boolean()) throw DataError("'terminal' must be a boolean");
    s.terminal = it->get<bool>();
  }
  return s;
}

Trajectory trajectory_from_json(const json& j) {
  if (!j.is_object()) throw DataError("record is not a JSON object");
  Trajectory t;
  t.id = require_string(j, "id");
  t.goal = require_string(j, "goal");
  auto steps = j.find("steps");
  if (steps == j.end() || !steps->is_array()) throw DataError("missing array field 'steps'");
  int position = 1;
  for (const auto& s : *steps) t.steps.push_back(step_from_json(s, position++));
  if (auto it = j.find("failure_label"); it != j.end() && !it->is_null()) {
    if (!it->is_string()) throw DataError("'failure_label' must be a string");
    t.failure_label = it->get<std::string>();
  }
  if (auto it = j.find("metadata"); it != j.end() && !it->is_null()) {
    if (!it->is_object()) throw DataError("'metadata' must be an object");
    for (const auto& [k, v] : it->items()) {
      if (!v.is_string()) throw DataError("metadata value for '" + k + "' must be a string");
      t.metadata[k] = v.get<std::string>();
    }
  }
  validate(t);
  return t;
}

std::vector<Trajectory> parse_corpus(std::string_view contents, CorpusKind kind) {
  std::vector<Trajectory> out;
  std::unordered_map<std::string, std::size_t> first_line;
  std::size_t offset = 0;
  std::size_t line_no = 0;
  while (offset < contents.size()) {
    ++line_no;
    std::size_t nl = contents.find('\n', offset);
    if (nl == std::string_view::npos) nl = contents.size();
    std::string_view line = contents.substr(offset, nl - offset);
    const std::size_t line_offset = offset;
    offset = nl + 1;
    if (text::trim(line).empty()) continue;
    Trajectory t;
    try {
      const json j = json::parse(line);
      if (kind == CorpusKind::kSuccess && j.is_object() && j.contains("failure_label")) {
        throw DataError("success records may not carry 'failure_label'");
      }
      t = trajectory_from_json(j);
    } catch (const json::exception& e) {
      throw ParseError("line " + std::to_string(line_no) + " (byte " + std::to_string(line_offset) +
                           "): " + e.what(),
                       line_no, line_offset);
    } catch (const DataError& e) {
      throw ParseError("line " + std::to_string(line_no) + " (byte " + std::to_string(line_offset) +
                           "): " + e.what(),
                       line_no, line_offset);
    }
    auto [it, inserted] = first_line.emplace(t.id, line_no);
    if (!inserted) throw DuplicateIdError(t.id, it->second, line_no);
    out.push_back(std::move(t));
  }
  return out;
}

std::vector<Trajectory> read_corpus(const std::filesystem::path& path) {
  return parse_corpus(read_text(path), CorpusKind::kFailed);
}

std::vector<SuccessDemo> read_success_corpus(const std::filesystem::path& path) {
  std::vector<SuccessDemo> out;
  for (auto& t : parse_corpus(read_text(path), CorpusKind::kSuccess)) {
    out.push_back(SuccessDemo{std::move(t)});
  }
  return out;
}

std::string serialize_corpus(const std::vector<Trajectory>& records) {
  std::unordered_map<std::string, std::size_t> seen;
  for (std::size_t i = 0; i < records.size(); ++i) {
    validate(records[i]);
    auto [it, inserted] = seen.emplace(records[i].id, i + 1);
    if (!inserted) throw DuplicateIdError(records[i].id, it->second, i + 1);
  }
  std::string out;
  for (const auto& r : records) {
    out += to_json(r).dump();
    out += '\n';
  }
  return out;
}

std::size_t write_corpus(const std::vector<Trajectory>& records, const std::filesystem::path& path) {
  const std::string contents = serialize_corpus(records);
  write_text(path, contents);
  return records.size();
}

std::size_t write_corpus(const std::vector<SuccessDemo>& records, const std::filesystem::path& path) {
  std::vector<Trajectory> plain;
  plain.reserve(records.size());
  for (const auto& r : records) {
    if (r.trajectory.failure_label) throw DataError("success records may not carry 'failure_label'");
    plain.push_back(r.trajectory);
  }
  return write_corpus(plain, path);
}

}  // namespace agenther

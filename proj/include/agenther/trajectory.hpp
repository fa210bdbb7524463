#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

namespace agenther {

struct Step {
  int index = 1;  // 1-based
  std::string thought;
  std::string action;
  std::string observation;
  // Summary/answer steps may carry an empty observation.
  bool terminal = false;

  friend bool operator==(const Step&, const Step&) = default;
};

struct Trajectory {
  std::string id;
  std::string goal;
  std::vector<Step> steps;
  std::optional<std::string> failure_label;
  std::map<std::string, std::string> metadata;

  std::size_t length() const noexcept { return steps.size(); }

  friend bool operator==(const Trajectory&, const Trajectory&) = default;
};

// A successful demonstration shares the trajectory shape; the goal is g+.
struct SuccessDemo {
  Trajectory trajectory;

  const std::string& goal() const noexcept { return trajectory.goal; }

  friend bool operator==(const SuccessDemo&, const SuccessDemo&) = default;
};

enum class StageMode { kRule, kJudge };

struct Temperatures {
  double first_attempt = 0.3;
  double retry = 0.7;
  double second_judge = 0.0;

  friend bool operator==(const Temperatures&, const Temperatures&) = default;
};

struct PipelineConfig {
  double theta = 0.5;
  double delta = 0.3;
  int max_retries = 3;
  bool multi_judge = true;
  StageMode stage1_mode = StageMode::kRule;
  StageMode stage2_mode = StageMode::kRule;
  Temperatures temperatures;
  int concurrency = 1;
  std::uint64_t seed = 42;

  // Throws ConfigError naming the first offending field.
  void validate() const;
};

std::string to_string(StageMode mode);
StageMode parse_stage_mode(const std::string& s);

// Throws DataError when the trajectory breaks a structural invariant:
// empty id or steps, non-sequential step indices, or an empty observation
// on a non-terminal step.
void validate(const Trajectory& traj);

nlohmann::json to_json(const Step& step);
nlohmann::json to_json(const Trajectory& traj);
Step step_from_json(const nlohmann::json& j, int position);
Trajectory trajectory_from_json(const nlohmann::json& j);

enum class CorpusKind { kFailed, kSuccess };

// JSONL corpus I/O. One record per line, UTF-8.
std::vector<Trajectory> read_corpus(const std::filesystem::path& path);
std::vector<SuccessDemo> read_success_corpus(const std::filesystem::path& path);
std::vector<Trajectory> parse_corpus(std::string_view contents, CorpusKind kind = CorpusKind::kFailed);

// Validates every record and checks id uniqueness before the file is
// touched; returns the number of records written.
std::size_t write_corpus(const std::vector<Trajectory>& records, const std::filesystem::path& path);
std::size_t write_corpus(const std::vector<SuccessDemo>& records, const std::filesystem::path& path);
std::string serialize_corpus(const std::vector<Trajectory>& records);

}  // namespace agenther

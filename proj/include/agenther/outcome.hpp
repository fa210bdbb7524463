#pragma once

#include <string>
#include <vector>

#include "agenther/failure_detector.hpp"
#include "agenther/judge.hpp"
#include "agenther/trajectory.hpp"
#include "json.hpp"

namespace agenther {

inline constexpr std::size_t kMaxAchievementChars = 200;

struct ReplayOutcome {
  std::vector<std::string> achievements;       // each <= 200 scalar values
  std::vector<std::string> key_observations;
  std::vector<std::string> numeric_tokens;     // as written, first occurrence kept
  std::vector<int> source_step_indices;        // one per achievement, 1-based
  std::vector<std::string> warnings;

  bool empty() const noexcept { return achievements.empty() && key_observations.empty(); }

  friend bool operator==(const ReplayOutcome&, const ReplayOutcome&) = default;
};

nlohmann::json to_json(const ReplayOutcome& o);
ReplayOutcome outcome_from_json(const nlohmann::json& j);

// The text bound to {outcome} in the Stage-3 prompt: a one-line JSON object
// {"actual_achievements": [...], "key_observations": [...]}.
std::string render_outcome(const ReplayOutcome& o);

// Rule mode. One achievement per substantive observation (see
// is_substantive_observation), in step order, truncated to 200 scalar
// values and deduplicated by exact string. Key observations are the
// achievements that carry a number.
ReplayOutcome extract_rule(const Trajectory& traj, const Lexicon& lex);

// Judge mode. Parses {actual_achievements, key_observations}; an
// achievement quoting a number that no observation contains is dropped
// with a warning.
ReplayOutcome extract_judge(const Trajectory& traj, JudgeBackend& judge, double temperature = 0.0);

}  // namespace agenther

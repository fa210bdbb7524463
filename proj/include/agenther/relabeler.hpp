#pragma once

#include <optional>
#include <string>
#include <vector>

#include "agenther/judge.hpp"
#include "agenther/outcome.hpp"
#include "agenther/trajectory.hpp"
#include "json.hpp"

namespace agenther {

struct SecondVerdict {
  bool is_valid = false;
  double confidence = 0.0;  // c2
  std::string rejection_reason;

  friend bool operator==(const SecondVerdict&, const SecondVerdict&) = default;
};

struct RelabelAttempt {
  int attempt_index = 1;  // 1..K
  double temperature_used = 0.0;
  std::string hindsight_prompt;
  bool is_valid = false;
  std::string rationale;
  double confidence = 0.0;
  // Why a local guard overrode the judge's is_valid, or why the attempt
  // failed outright (judge error).
  std::string override_reason;
  bool judge_error = false;
  std::optional<SecondVerdict> second;

  friend bool operator==(const RelabelAttempt&, const RelabelAttempt&) = default;
};

enum class AcceptancePath { kMultiJudge, kSingleJudge, kFallback, kRejected };

std::string to_string(AcceptancePath p);
AcceptancePath parse_acceptance_path(std::string_view s);

struct RelabelDecision {
  bool accepted = false;
  AcceptancePath path = AcceptancePath::kRejected;
  std::string hindsight_prompt;             // g*
  double confidence = 0.0;                  // c*
  std::optional<double> second_confidence;  // c2 of the chosen attempt
  std::vector<RelabelAttempt> attempts;
  std::vector<std::string> notes;           // audit trail of the loop

  friend bool operator==(const RelabelDecision&, const RelabelDecision&) = default;
};

nlohmann::json to_json(const RelabelAttempt& a);
nlohmann::json to_json(const RelabelDecision& d);
RelabelAttempt attempt_from_json(const nlohmann::json& j);
RelabelDecision decision_from_json(const nlohmann::json& j);

// One Stage-3 call. After parsing, local guards force is_valid to false
// when the goal cites a number absent from the outcome, or contains the
// original goal verbatim (case-insensitive). A valid-flagged empty goal is
// a SchemaError.
RelabelAttempt relabel_once(const ReplayOutcome& outcome, const std::string& original_goal,
                            double temperature, JudgeBackend& judge, int attempt_index = 1);

// Independent verification call, always at the given (normally zero)
// temperature.
SecondVerdict verify_second(const std::string& hindsight_prompt, const Trajectory& traj, JudgeBackend& judge,
                            double temperature = 0.0, int attempt_index = 1);

// The retry loop with multi-judge verification and 0.8·θ fallback. Every
// valid attempt competes for the fallback slot, including one the second
// judge turned down. Judge failures on an attempt count as a failed
// attempt.
RelabelDecision relabel_loop(const ReplayOutcome& outcome, const std::string& original_goal,
                             const Trajectory& traj, const PipelineConfig& cfg, JudgeBackend& judge);

}  // namespace agenther

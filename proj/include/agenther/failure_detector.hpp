#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "agenther/judge.hpp"
#include "agenther/trajectory.hpp"
#include "json.hpp"

namespace agenther {

enum class FailureType {
  kIncomplete,
  kConstraintViolation,
  kWrongResult,
  kToolError,
  kHallucination,
  kOffTopic,
};

inline constexpr std::array<FailureType, 6> kAllFailureTypes = {
    FailureType::kIncomplete, FailureType::kConstraintViolation, FailureType::kWrongResult,
    FailureType::kToolError,  FailureType::kHallucination,       FailureType::kOffTopic};

std::string to_string(FailureType t);
FailureType parse_failure_type(std::string_view s);  // std::invalid_argument on unknown names

// Hallucinated observations and catastrophic tool misuse.
bool is_major(FailureType t);

struct FailureAssessment {
  FailureType failure_type = FailureType::kIncomplete;
  double severity_score = 0.3;   // v
  bool recoverable = false;      // r
  double severity_weight = 0.7;  // w
  int matched_terms = 0;         // h, rule mode only
  std::string explanation;
  std::vector<std::string> warnings;
};

nlohmann::json to_json(const FailureAssessment& a);
FailureAssessment assessment_from_json(const nlohmann::json& j);

struct Lexicon {
  std::map<FailureType, std::vector<std::string>> terms;
  std::vector<std::string> error_patterns;
  std::vector<FailureType> priority;  // highest first

  // Every type has at least one term; priority is a permutation of all six.
  void validate() const;

  static Lexicon from_json(const nlohmann::json& j);
  static Lexicon load(const std::filesystem::path& path);
  nlohmann::json to_json() const;
};

// Shipped with the project as data/default_lexicon.json.
const Lexicon& default_lexicon();

// Observation matches one of the lexicon's error patterns (case-insensitive).
bool is_error_observation(std::string_view observation, const Lexicon& lex);
// At least 20 characters after trimming and not an error observation.
bool is_substantive_observation(std::string_view observation, const Lexicon& lex);

// Rule mode: keyword matching over every step's thought, action and
// observation. severity = min(1, 0.3 + 0.1 h) with h the number of distinct
// matched terms.
FailureAssessment detect_rule(const Trajectory& traj, const Lexicon& lex);

// Judge mode: Stage-1 template, one re-ask on non-JSON replies, numeric
// fields clamped into [0, 1] with a warning.
FailureAssessment detect_judge(const Trajectory& traj, JudgeBackend& judge, double temperature = 0.0);

enum class GateDecision { kPass, kDiscard };

// Discard iff the run is unrecoverable or its weight is below delta.
GateDecision severity_gate(const FailureAssessment& a, double delta);

}  // namespace agenther

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "agenther/failure_detector.hpp"
#include "agenther/judge.hpp"
#include "agenther/pipeline.hpp"
#include "agenther/trajectory.hpp"
#include "json.hpp"

namespace agenther {

// One numeric column of an entity table, e.g. price in $/kg.
struct AttributeSpec {
  std::string key;                   // "price"
  std::vector<std::string> aliases;  // lower-case phrases naming it in goals
  std::string prefix;                // "$"
  std::string suffix;                // "/kg"
  int decimals = 0;
};

struct Entity {
  std::string name;                       // CamelCase
  std::map<std::string, double> values;   // attribute key -> value

  friend bool operator==(const Entity&, const Entity&) = default;
};

enum class Comparator { kLess, kLessEqual, kGreater, kGreaterEqual };

struct ThresholdConstraint {
  std::string attribute;
  Comparator op = Comparator::kLess;
  double value = 0.0;

  friend bool operator==(const ThresholdConstraint&, const ThresholdConstraint&) = default;
};

struct SyntheticTask {
  std::string trajectory_id;
  std::string template_id;  // which of the goal templates produced the ground truth
  std::string family;       // supplier | hotel | laptop
  std::vector<Entity> entities;
  std::vector<ThresholdConstraint> original_constraint;  // violated by every entity
  std::string original_goal;
  std::string ground_truth_goal;
  FailureType planted_failure_type = FailureType::kIncomplete;

  friend bool operator==(const SyntheticTask&, const SyntheticTask&) = default;
};

nlohmann::json to_json(const SyntheticTask& t);
SyntheticTask task_from_json(const nlohmann::json& j);
std::vector<SyntheticTask> read_tasks(const std::filesystem::path& path);
void write_tasks(const std::vector<SyntheticTask>& tasks, const std::filesystem::path& path);
std::string serialize_tasks(const std::vector<SyntheticTask>& tasks);

// Attribute columns for a family. Throws std::invalid_argument on unknown.
const std::vector<AttributeSpec>& family_attributes(std::string_view family);

// The goal templates ground truths are drawn from, with {slot} markers.
const std::vector<std::string>& canonical_goal_templates();

using TypeMix = std::map<FailureType, double>;

TypeMix uniform_type_mix();
// "incomplete:0.35,constraint_violation:0.28" style; unnamed types share the
// remainder evenly. ConfigError on bad syntax or a sum outside 1 +- 1e-9.
TypeMix parse_type_mix(std::string_view spec);
void validate_type_mix(const TypeMix& mix);

struct SyntheticCorpus {
  std::vector<Trajectory> trajectories;
  std::vector<SyntheticTask> tasks;  // same order and ids
};

// Deterministic in (n, seed, mix). Trajectory i depends only on (seed, i).
SyntheticCorpus generate_corpus(std::size_t n, std::uint64_t seed, const TypeMix& mix = uniform_type_mix());

struct OracleVerdict {
  bool valid = false;
  std::string reason;
};

// Checks every claim of `goal` against the task's entity table by brute
// force. Claims: superlatives ("lowest MOQ", "cheapest"), thresholds
// ("rating of at least 4.2"), CamelCase entity mentions and bare numbers.
// The goal holds iff some entity satisfies all of them at once. A goal with
// no checkable claim, an unknown entity or a dangling comparator is false.
OracleVerdict oracle_check(std::string_view goal, const SyntheticTask& task);
bool oracle_valid(std::string_view goal, const SyntheticTask& task);

// A grounded goal the oracle rejects: names a wrong entity as the extreme of
// the first attribute.
std::string corrupt_goal(const SyntheticTask& task, std::uint64_t salt);

struct OracleTranscriptOptions {
  double noise = 0.0;             // probability of flipping each verdict
  double corruption_rate = 0.3;   // share of Stage-3 proposals that are corrupted
  std::uint64_t seed = 42;
};

// Stage-3 and second-judge answers computed by the oracle, for every
// attempt 1..cfg.max_retries of every trajectory. Stages 1 and 2 are
// expected to run in rule mode.
Transcript build_oracle_transcript(const SyntheticCorpus& corpus, const PipelineConfig& cfg,
                                   const OracleTranscriptOptions& opts, const Lexicon& lexicon = default_lexicon());

struct ScoredDecision {
  std::string trajectory_id;
  bool accepted = false;
  std::string hindsight_prompt;
};

std::vector<ScoredDecision> scored_decisions(const std::vector<TrajectoryResult>& results);
// Reads decisions.jsonl as written by the relabel command.
std::vector<ScoredDecision> read_decisions(const std::filesystem::path& path);

struct TypeScore {
  std::size_t planted = 0;
  std::size_t relabelable = 0;
  std::size_t accepted = 0;
  std::size_t valid_accepted = 0;
};

struct ScoreReport {
  std::size_t accepted = 0;
  std::size_t valid_accepted = 0;
  std::size_t relabelable = 0;
  double precision = 1.0;  // 1 when nothing was accepted
  double recall = 1.0;     // 1 when nothing was relabelable
  std::map<FailureType, TypeScore> per_type;

  nlohmann::json to_json() const;
  std::string table() const;
};

// Relabelable = planted type is minor. DataError if the ids of `decisions`
// and `tasks` differ.
ScoreReport score_pipeline(const std::vector<ScoredDecision>& decisions, const std::vector<SyntheticTask>& tasks);

}  // namespace agenther

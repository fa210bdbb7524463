#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "agenther/augmenter.hpp"
#include "agenther/failure_detector.hpp"
#include "agenther/judge.hpp"
#include "agenther/outcome.hpp"
#include "agenther/relabeler.hpp"
#include "agenther/trajectory.hpp"
#include "json.hpp"

namespace agenther {

enum class TrajectoryStatus { kDiscarded, kAccepted, kRejected };

std::string to_string(TrajectoryStatus s);

// Where one input trajectory ended up. Exactly one status per input.
struct TrajectoryResult {
  std::size_t index = 0;
  std::string id;
  TrajectoryStatus status = TrajectoryStatus::kRejected;
  // Reason code: accepted | unrecoverable | severity_below_delta |
  // empty_outcome | no_valid_attempt | below_fallback | judge_error
  std::string reason;
  std::string error;  // judge error text, if any
  std::optional<FailureAssessment> assessment;
  std::optional<ReplayOutcome> outcome;
  std::optional<RelabelDecision> decision;
};

nlohmann::json to_json(const TrajectoryResult& r);
// DataError on a malformed record.
TrajectoryResult result_from_json(const nlohmann::json& j);

struct PathCounts {
  std::size_t multi_judge = 0;
  std::size_t single_judge = 0;
  std::size_t fallback = 0;
};

struct TypeCounts {
  std::size_t total = 0;
  std::size_t accepted = 0;
};

struct RunStats {
  std::size_t total = 0;
  std::size_t discarded_stage1 = 0;
  std::size_t relabel_attempted = 0;  // everything the gate let through
  std::size_t accepted = 0;
  PathCounts accepted_by_path;
  std::size_t rejected = 0;
  std::size_t rejected_with_error = 0;  // subset of rejected
  std::map<FailureType, TypeCounts> per_failure_type;

  double acceptance_rate() const noexcept {
    return total == 0 ? 0.0 : static_cast<double>(accepted) / static_cast<double>(total);
  }

  void record(const TrajectoryResult& r);
  void merge(const RunStats& other);
  // total = discarded + attempted, attempted = accepted + rejected, and the
  // path breakdown sums to accepted.
  bool consistent() const noexcept;

  nlohmann::json to_json() const;
  std::string table() const;
};

// Acceptance rate as a percentage with one decimal, e.g. "78.0".
std::string format_percent(std::size_t accepted, std::size_t total);

struct PipelineResult {
  std::vector<TrajectoryResult> results;  // input order
  RunStats stats;

  std::vector<AcceptedExample> accepted_examples(const std::vector<Trajectory>& corpus) const;
};

// Runs every trajectory through detect -> gate -> extract -> relabel loop.
// Trajectories are processed by up to cfg.concurrency workers; results come
// back in input order and do not depend on the schedule when the judge is
// deterministic. Judge failures reject the affected trajectory only.
PipelineResult run_pipeline(const std::vector<Trajectory>& corpus, const PipelineConfig& cfg, JudgeBackend& judge,
                            const Lexicon& lexicon = default_lexicon());

TrajectoryResult process_trajectory(const Trajectory& traj, std::size_t index, const PipelineConfig& cfg,
                                    JudgeBackend& judge, const Lexicon& lexicon);

struct RoundLedger {
  int round_index = 0;
  std::string source_label;
  std::size_t new_failures = 0;
  std::size_t accepted = 0;
  std::size_t cumulative_corpus_size = 0;

  friend bool operator==(const RoundLedger&, const RoundLedger&) = default;
};

nlohmann::json to_json(const RoundLedger& r);

struct AccumulatedCorpus {
  std::vector<AcceptedExample> examples;
  std::vector<RoundLedger> ledger;
};

// Appends a relabeling round. New example ids get the prefix "r<round>/" so
// ids stay unique across rounds; the ledger entry's accepted and cumulative
// sizes are filled in. Throws DataError on a round-index gap or when
// `prior` does not match the ledger's last cumulative size.
AccumulatedCorpus accumulate_round(std::vector<RoundLedger> ledger, RoundLedger next,
                                   std::vector<AcceptedExample> prior, std::vector<AcceptedExample> new_accepted);

}  // namespace agenther

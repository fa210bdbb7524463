#include "agenther/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <sstream>
#include <thread>
#include <unordered_set>

#include "agenther/errors.hpp"
#include "agenther/log.hpp"

namespace agenther {

using nlohmann::json;

std::string to_string(TrajectoryStatus s) {
  switch (s) {
    case TrajectoryStatus::kDiscarded: return "discarded";
    case TrajectoryStatus::kAccepted: return "accepted";
    case TrajectoryStatus::kRejected: return "rejected";
  }
  return "unknown";
}

json to_json(const TrajectoryResult& r) {
  json j = {{"index", r.index}, {"trajectory_id", r.id}, {"status", to_string(r.status)}, {"reason", r.reason}};
  if (!r.error.empty()) j["error"] = r.error;
  if (r.assessment) j["assessment"] = to_json(*r.assessment);
  if (r.outcome) j["outcome"] = to_json(*r.outcome);
  if (r.decision) j["decision"] = to_json(*r.decision);
  return j;
}

TrajectoryResult result_from_json(const json& j) {
  try {
    TrajectoryResult r;
    r.index = j.at("index").get<std::size_t>();
    r.id = j.at("trajectory_id").get<std::string>();
    const std::string status = j.at("status").get<std::string>();
    if (status == "discarded") {
      r.status = TrajectoryStatus::kDiscarded;
    } else if (status == "accepted") {
      r.status = TrajectoryStatus::kAccepted;
    } else if (status == "rejected") {
      r.status = TrajectoryStatus::kRejected;
    } else {
      throw DataError("unknown status '" + status + "'");
    }
    r.reason = j.value("reason", std::string());
    r.error = j.value("error", std::string());
    if (j.contains("assessment")) r.assessment = assessment_from_json(j["assessment"]);
    if (j.contains("outcome")) r.outcome = outcome_from_json(j["outcome"]);
    if (j.contains("decision")) r.decision = decision_from_json(j["decision"]);
    if (r.status == TrajectoryStatus::kAccepted && (!r.decision || !r.assessment)) {
      throw DataError("accepted record without assessment or decision");
    }
    return r;
  } catch (const json::exception& e) {
    throw DataError(std::string("decision record: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw DataError(std::string("decision record: ") + e.what());
  }
}

void RunStats::record(const TrajectoryResult& r) {
  ++total;
  if (r.assessment) {
    auto& t = per_failure_type[r.assessment->failure_type];
    ++t.total;
    if (r.status == TrajectoryStatus::kAccepted) ++t.accepted;
  }
  switch (r.status) {
    case TrajectoryStatus::kDiscarded: ++discarded_stage1; return;
    case TrajectoryStatus::kAccepted:
      ++relabel_attempted;
      ++accepted;
      switch (r.decision->path) {
        case AcceptancePath::kMultiJudge: ++accepted_by_path.multi_judge; break;
        case AcceptancePath::kSingleJudge: ++accepted_by_path.single_judge; break;
        case AcceptancePath::kFallback: ++accepted_by_path.fallback; break;
        case AcceptancePath::kRejected: break;
      }
      return;
    case TrajectoryStatus::kRejected:
      ++relabel_attempted;
      ++rejected;
      if (r.reason == "judge_error") ++rejected_with_error;
      return;
  }
}

void RunStats::merge(const RunStats& o) {
  total += o.total;
  discarded_stage1 += o.discarded_stage1;
  relabel_attempted += o.relabel_attempted;
  accepted += o.accepted;
  accepted_by_path.multi_judge += o.accepted_by_path.multi_judge;
  accepted_by_path.single_judge += o.accepted_by_path.single_judge;
  accepted_by_path.fallback += o.accepted_by_path.fallback;
  rejected += o.rejected;
  rejected_with_error += o.rejected_with_error;
  for (const auto& [type, counts] : o.per_failure_type) {
    per_failure_type[type].total += counts.total;
    per_failure_type[type].accepted += counts.accepted;
  }
}

bool RunStats::consistent() const noexcept {
  return total == discarded_stage1 + relabel_attempted && relabel_attempted == accepted + rejected &&
         accepted == accepted_by_path.multi_judge + accepted_by_path.single_judge + accepted_by_path.fallback &&
         rejected_with_error <= rejected;
}

json RunStats::to_json() const {
  json per_type = json::object();
  for (FailureType t : kAllFailureTypes) {
    auto it = per_failure_type.find(t);
    const TypeCounts c = it == per_failure_type.end() ? TypeCounts{} : it->second;
    per_type[agenther::to_string(t)] = {{"total", c.total}, {"accepted", c.accepted}};
  }
  return {{"total", total},
          {"discarded_stage1", discarded_stage1},
          {"relabel_attempted", relabel_attempted},
          {"accepted", accepted},
          {"accepted_by_path",
           {{"multi_judge", accepted_by_path.multi_judge},
            {"single_judge", accepted_by_path.single_judge},
            {"fallback", accepted_by_path.fallback}}},
          {"rejected", rejected},
          {"rejected_with_error", rejected_with_error},
          {"acceptance_rate", acceptance_rate()},
          {"per_failure_type", std::move(per_type)}};
}

std::string format_percent(std::size_t accepted, std::size_t total) {
  const double pct = total == 0 ? 0.0 : 100.0 * static_cast<double>(accepted) / static_cast<double>(total);
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.1f", pct);
  return buf;
}

std::string RunStats::table() const {
  std::ostringstream ss;
  auto row = [&](const std::string& label, std::size_t v) {
    char buf[96];
    std::snprintf(buf, sizeof(buf), "  %-22s %8zu\n", label.c_str(), v);
    ss << buf;
  };
  ss << "run statistics\n";
  row("total", total);
  row("discarded (stage 1)", discarded_stage1);
  row("relabel attempted", relabel_attempted);
  row("accepted", accepted);
  row("  multi_judge", accepted_by_path.multi_judge);
  row("  single_judge", accepted_by_path.single_judge);
  row("  fallback", accepted_by_path.fallback);
  row("rejected", rejected);
  row("  with judge error", rejected_with_error);
  ss << "  acceptance rate        " << format_percent(accepted, total) << "%\n";
  ss << "per failure type (accepted/total)\n";
  for (const auto& [type, c] : per_failure_type) {
    char buf[96];
    std::snprintf(buf, sizeof(buf), "  %-22s %zu/%zu\n", agenther::to_string(type).c_str(), c.accepted, c.total);
    ss << buf;
  }
  return ss.str();
}

std::vector<AcceptedExample> PipelineResult::accepted_examples(const std::vector<Trajectory>& corpus) const {
  std::vector<AcceptedExample> out;
  for (const auto& r : results) {
    if (r.status != TrajectoryStatus::kAccepted) continue;
    out.push_back(AcceptedExample{corpus.at(r.index), *r.assessment, *r.decision});
  }
  return out;
}

TrajectoryResult process_trajectory(const Trajectory& traj, std::size_t index, const PipelineConfig& cfg,
                                    JudgeBackend& judge, const Lexicon& lexicon) {
  TrajectoryResult r;
  r.index = index;
  r.id = traj.id;
  auto fail = [&](const std::string& stage, const std::exception& e) {
    r.status = TrajectoryStatus::kRejected;
    r.reason = "judge_error";
    r.error = stage + ": " + e.what();
    log::warn(traj.id + ": " + r.error);
    return r;
  };

  try {
    r.assessment = cfg.stage1_mode == StageMode::kRule ? detect_rule(traj, lexicon) : detect_judge(traj, judge);
  } catch (const BackendError& e) {
    return fail("stage1", e);
  }
  if (severity_gate(*r.assessment, cfg.delta) == GateDecision::kDiscard) {
    r.status = TrajectoryStatus::kDiscarded;
    r.reason = r.assessment->recoverable ? "severity_below_delta" : "unrecoverable";
    return r;
  }

  try {
    r.outcome = cfg.stage2_mode == StageMode::kRule ? extract_rule(traj, lexicon) : extract_judge(traj, judge);
  } catch (const BackendError& e) {
    return fail("stage2", e);
  }
  if (r.outcome->empty()) {
    r.status = TrajectoryStatus::kRejected;
    r.reason = "empty_outcome";
    return r;
  }

  r.decision = relabel_loop(*r.outcome, traj.goal, traj, cfg, judge);
  if (r.decision->accepted) {
    r.status = TrajectoryStatus::kAccepted;
    r.reason = "accepted";
    return r;
  }
  r.status = TrajectoryStatus::kRejected;
  const auto& attempts = r.decision->attempts;
  const bool all_errors = !attempts.empty() && std::all_of(attempts.begin(), attempts.end(),
                                                           [](const RelabelAttempt& a) { return a.judge_error; });
  const bool any_valid =
      std::any_of(attempts.begin(), attempts.end(), [](const RelabelAttempt& a) { return a.is_valid; });
  if (all_errors) {
    r.reason = "judge_error";
    r.error = "stage3: " + attempts.back().override_reason;
  } else {
    r.reason = any_valid ? "below_fallback" : "no_valid_attempt";
  }
  return r;
}

PipelineResult run_pipeline(const std::vector<Trajectory>& corpus, const PipelineConfig& cfg, JudgeBackend& judge,
                            const Lexicon& lexicon) {
  cfg.validate();
  PipelineResult out;
  out.results.resize(corpus.size());
  const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(cfg.concurrency), corpus.size());
  std::vector<RunStats> partials(std::max<std::size_t>(workers, 1));
  std::atomic<std::size_t> next{0};

  auto work = [&](std::size_t worker) {
    for (std::size_t i = next.fetch_add(1); i < corpus.size(); i = next.fetch_add(1)) {
      out.results[i] = process_trajectory(corpus[i], i, cfg, judge, lexicon);
      partials[worker].record(out.results[i]);
    }
  };

  if (workers <= 1) {
    work(0);
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work, w);
  }
  for (const auto& p : partials) out.stats.merge(p);
  return out;
}

json to_json(const RoundLedger& r) {
  return {{"round_index", r.round_index},
          {"source_label", r.source_label},
          {"new_failures", r.new_failures},
          {"accepted", r.accepted},
          {"cumulative_corpus_size", r.cumulative_corpus_size}};
}

AccumulatedCorpus accumulate_round(std::vector<RoundLedger> ledger, RoundLedger next,
                                   std::vector<AcceptedExample> prior, std::vector<AcceptedExample> new_accepted) {
  if (!ledger.empty()) {
    if (next.round_index != ledger.back().round_index + 1) {
      throw DataError("round-index gap: expected round " + std::to_string(ledger.back().round_index + 1) +
                      ", got " + std::to_string(next.round_index));
    }
    if (prior.size() != ledger.back().cumulative_corpus_size) {
      throw DataError("prior corpus holds " + std::to_string(prior.size()) + " examples but the ledger says " +
                      std::to_string(ledger.back().cumulative_corpus_size));
    }
  } else if (next.round_index < 0) {
    throw DataError("round index must be >= 0");
  }
  if (next.accepted != 0 && next.accepted != new_accepted.size()) {
    throw DataError("ledger says " + std::to_string(next.accepted) + " accepted but the round supplies " +
                    std::to_string(new_accepted.size()));
  }

  std::unordered_set<std::string> ids;
  for (const auto& ex : prior) ids.insert(ex.trajectory.id);
  const std::string prefix = "r" + std::to_string(next.round_index) + "/";
  AccumulatedCorpus out;
  out.examples = std::move(prior);
  out.examples.reserve(out.examples.size() + new_accepted.size());
  for (auto& ex : new_accepted) {
    ex.trajectory.id = prefix + ex.trajectory.id;
    if (!ids.insert(ex.trajectory.id).second) {
      throw DataError("id '" + ex.trajectory.id + "' appears twice in round " + std::to_string(next.round_index));
    }
    out.examples.push_back(std::move(ex));
  }
  next.accepted = new_accepted.size();
  next.cumulative_corpus_size = out.examples.size();
  ledger.push_back(std::move(next));
  out.ledger = std::move(ledger);
  return out;
}

}  // namespace agenther

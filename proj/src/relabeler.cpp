#include "agenther/relabeler.hpp"

#include <sstream>
#include <stdexcept>
#include <unordered_set>

#include "agenther/errors.hpp"
#include "agenther/log.hpp"
#include "agenther/render.hpp"
#include "agenther/text.hpp"

namespace agenther {

using nlohmann::json;

namespace {

std::string fmt(double v) {
  std::ostringstream ss;
  ss << v;
  return ss.str();
}

bool parse_flag(const json& reply, const char* stage, const char* field) {
  auto it = reply.find(field);
  if (it == reply.end() || it->is_null()) {
    throw SchemaError(std::string(stage) + ": missing field '" + field + "'");
  }
  if (it->is_boolean()) return it->get<bool>();
  if (it->is_number()) return it->get<double>() != 0.0;
  if (it->is_string()) {
    const std::string s = text::to_lower_ascii(it->get<std::string>());
    if (s == "true" || s == "1" || s == "yes") return true;
    if (s == "false" || s == "0" || s == "no") return false;
  }
  throw SchemaError(std::string(stage) + ": field '" + field + "' is not a boolean");
}

double parse_confidence(const json& reply, const char* stage) {
  auto it = reply.find("confidence");
  if (it == reply.end() || it->is_null()) throw SchemaError(std::string(stage) + ": missing field 'confidence'");
  if (!it->is_number()) throw SchemaError(std::string(stage) + ": field 'confidence' is not a number");
  const double c = it->get<double>();
  if (c < 0.0 || c > 1.0) {
    log::warn(std::string(stage) + ": confidence " + fmt(c) + " clamped into [0, 1]");
    return c < 0.0 ? 0.0 : 1.0;
  }
  return c;
}

std::string optional_text(const json& reply, const char* field) {
  auto it = reply.find(field);
  if (it == reply.end() || !it->is_string()) return {};
  return it->get<std::string>();
}

}  // namespace

std::string to_string(AcceptancePath p) {
  switch (p) {
    case AcceptancePath::kMultiJudge: return "multi_judge";
    case AcceptancePath::kSingleJudge: return "single_judge";
    case AcceptancePath::kFallback: return "fallback";
    case AcceptancePath::kRejected: return "rejected";
  }
  return "unknown";
}

AcceptancePath parse_acceptance_path(std::string_view s) {
  for (auto p : {AcceptancePath::kMultiJudge, AcceptancePath::kSingleJudge, AcceptancePath::kFallback,
                 AcceptancePath::kRejected}) {
    if (to_string(p) == s) return p;
  }
  throw std::invalid_argument("unknown acceptance path '" + std::string(s) + "'");
}

json to_json(const RelabelAttempt& a) {
  json j = {{"attempt_index", a.attempt_index},
            {"temperature_used", a.temperature_used},
            {"hindsight_prompt", a.hindsight_prompt},
            {"is_valid", a.is_valid},
            {"rationale", a.rationale},
            {"confidence", a.confidence}};
  if (!a.override_reason.empty()) j["override_reason"] = a.override_reason;
  if (a.judge_error) j["judge_error"] = true;
  if (a.second) {
    j["second"] = {{"is_valid", a.second->is_valid},
                   {"confidence", a.second->confidence},
                   {"rejection_reason", a.second->rejection_reason}};
  }
  return j;
}

json to_json(const RelabelDecision& d) {
  json attempts = json::array();
  for (const auto& a : d.attempts) attempts.push_back(to_json(a));
  json j = {{"accepted", d.accepted},
            {"path", to_string(d.path)},
            {"hindsight_prompt", d.hindsight_prompt},
            {"confidence", d.confidence},
            {"second_confidence", d.second_confidence ? json(*d.second_confidence) : json(nullptr)},
            {"attempts", std::move(attempts)},
            {"notes", d.notes}};
  return j;
}

RelabelAttempt attempt_from_json(const json& j) {
  RelabelAttempt a;
  a.attempt_index = j.at("attempt_index").get<int>();
  a.temperature_used = j.at("temperature_used").get<double>();
  a.hindsight_prompt = j.at("hindsight_prompt").get<std::string>();
  a.is_valid = j.at("is_valid").get<bool>();
  a.rationale = j.value("rationale", "");
  a.confidence = j.at("confidence").get<double>();
  a.override_reason = j.value("override_reason", "");
  a.judge_error = j.value("judge_error", false);
  if (auto it = j.find("second"); it != j.end() && !it->is_null()) {
    a.second = SecondVerdict{it->at("is_valid").get<bool>(), it->at("confidence").get<double>(),
                             it->value("rejection_reason", "")};
  }
  return a;
}

RelabelDecision decision_from_json(const json& j) {
  RelabelDecision d;
  d.accepted = j.at("accepted").get<bool>();
  d.path = parse_acceptance_path(j.at("path").get<std::string>());
  d.hindsight_prompt = j.value("hindsight_prompt", "");
  d.confidence = j.value("confidence", 0.0);
  if (auto it = j.find("second_confidence"); it != j.end() && !it->is_null()) {
    d.second_confidence = it->get<double>();
  }
  if (auto it = j.find("attempts"); it != j.end()) {
    for (const auto& a : *it) d.attempts.push_back(attempt_from_json(a));
  }
  d.notes = j.value("notes", std::vector<std::string>{});
  return d;
}

RelabelAttempt relabel_once(const ReplayOutcome& outcome, const std::string& original_goal, double temperature,
                            JudgeBackend& judge, int attempt_index) {
  if (outcome.empty()) throw DataError("relabel_once: empty outcome");
  JudgeRequest req;
  req.template_id = TemplateId::kStage3;
  req.filled_prompt = render_template(
      TemplateId::kStage3, {{"outcome", render_outcome(outcome)}, {"original_prompt", original_goal}});
  req.temperature = temperature;
  req.sample = attempt_index;
  // The retry loop is the re-ask for Stage 3.
  const json reply = call_for_json(judge, req, /*reask=*/false);

  RelabelAttempt a;
  a.attempt_index = attempt_index;
  a.temperature_used = temperature;
  auto goal_it = reply.find("hindsight_prompt");
  if (goal_it == reply.end() || !goal_it->is_string()) {
    throw SchemaError("stage3: missing field 'hindsight_prompt'");
  }
  a.hindsight_prompt = goal_it->get<std::string>();
  a.is_valid = parse_flag(reply, "stage3", "is_valid");
  a.rationale = optional_text(reply, "rationale");
  a.confidence = parse_confidence(reply, "stage3");
  if (a.is_valid && text::trim(a.hindsight_prompt).empty()) {
    throw SchemaError("stage3: empty hindsight_prompt marked valid");
  }
  if (!a.is_valid) return a;

  // No reuse of the original prompt.
  const std::string_view original = text::trim(original_goal);
  if (!original.empty() && text::contains_icase(a.hindsight_prompt, original)) {
    a.is_valid = false;
    a.override_reason = "goal reuses the original prompt verbatim";
    log::info("stage3 attempt " + std::to_string(attempt_index) + ": " + a.override_reason);
    return a;
  }
  // Every number the goal cites must come from the outcome.
  std::unordered_set<std::string> grounded;
  for (const auto& tok : outcome.numeric_tokens) grounded.insert(text::canonical_number(tok));
  for (const auto& s : outcome.achievements) {
    for (const auto& tok : text::numeric_tokens(s)) grounded.insert(text::canonical_number(tok));
  }
  for (const auto& s : outcome.key_observations) {
    for (const auto& tok : text::numeric_tokens(s)) grounded.insert(text::canonical_number(tok));
  }
  for (const auto& tok : text::numeric_tokens(a.hindsight_prompt)) {
    if (!grounded.count(text::canonical_number(tok))) {
      a.is_valid = false;
      a.override_reason = "goal cites " + tok + ", which the outcome does not contain";
      log::info("stage3 attempt " + std::to_string(attempt_index) + ": " + a.override_reason);
      return a;
    }
  }
  return a;
}

SecondVerdict verify_second(const std::string& hindsight_prompt, const Trajectory& traj, JudgeBackend& judge,
                            double temperature, int attempt_index) {
  if (text::trim(hindsight_prompt).empty()) throw std::invalid_argument("verify_second: empty prompt");
  JudgeRequest req;
  req.template_id = TemplateId::kSecondJudge;
  req.filled_prompt = render_template(TemplateId::kSecondJudge,
                                      {{"hindsight_prompt", hindsight_prompt}, {"trajectory", trajectory_text(traj)}});
  req.temperature = temperature;
  req.sample = attempt_index;
  const json reply = call_for_json(judge, req, /*reask=*/false);
  SecondVerdict v;
  v.is_valid = parse_flag(reply, "second_judge", "is_valid");
  v.confidence = parse_confidence(reply, "second_judge");
  v.rejection_reason = optional_text(reply, "rejection_reason_if_any");
  return v;
}

RelabelDecision relabel_loop(const ReplayOutcome& outcome, const std::string& original_goal,
                             const Trajectory& traj, const PipelineConfig& cfg, JudgeBackend& judge) {
  cfg.validate();
  RelabelDecision d;
  std::optional<std::size_t> best;
  double best_confidence = 0.0;

  for (int k = 1; k <= cfg.max_retries; ++k) {
    const double temperature = k == 1 ? cfg.temperatures.first_attempt : cfg.temperatures.retry;
    RelabelAttempt a;
    try {
      a = relabel_once(outcome, original_goal, temperature, judge, k);
    } catch (const BackendError& e) {
      a.attempt_index = k;
      a.temperature_used = temperature;
      a.judge_error = true;
      a.override_reason = e.what();
      d.notes.push_back("attempt " + std::to_string(k) + ": judge error: " + e.what());
      log::warn("relabel " + traj.id + " attempt " + std::to_string(k) + ": " + e.what());
      d.attempts.push_back(std::move(a));
      continue;
    }

    if (a.is_valid && a.confidence >= cfg.theta) {
      if (!cfg.multi_judge) {
        d.accepted = true;
        d.path = AcceptancePath::kSingleJudge;
        d.hindsight_prompt = a.hindsight_prompt;
        d.confidence = a.confidence;
        d.notes.push_back("attempt " + std::to_string(k) + ": accepted by single judge (c=" +
                          fmt(a.confidence) + ")");
        d.attempts.push_back(std::move(a));
        return d;
      }
      SecondVerdict v;
      try {
        v = verify_second(a.hindsight_prompt, traj, judge, cfg.temperatures.second_judge, k);
      } catch (const BackendError& e) {
        v = SecondVerdict{false, 0.0, std::string("judge error: ") + e.what()};
        log::warn("relabel " + traj.id + " attempt " + std::to_string(k) + " second judge: " + e.what());
      }
      a.second = v;
      if (v.is_valid && v.confidence >= cfg.theta) {
        d.accepted = true;
        d.path = AcceptancePath::kMultiJudge;
        d.hindsight_prompt = a.hindsight_prompt;
        d.confidence = (a.confidence + v.confidence) / 2.0;
        d.second_confidence = v.confidence;
        d.notes.push_back("attempt " + std::to_string(k) + ": accepted by both judges (c=" +
                          fmt(a.confidence) + ", c2=" + fmt(v.confidence) + ")");
        d.attempts.push_back(std::move(a));
        return d;
      }
      d.notes.push_back("attempt " + std::to_string(k) + ": passed the first judge (c=" + fmt(a.confidence) +
                        ") but the second judge declined (c2=" + fmt(v.confidence) +
                        "); kept as a fallback candidate");
    }

    if (a.is_valid && (!best || a.confidence > best_confidence)) {
      best = d.attempts.size();
      best_confidence = a.confidence;
    } else if (!a.is_valid) {
      d.notes.push_back("attempt " + std::to_string(k) + ": invalid" +
                        (a.override_reason.empty() ? std::string() : " (" + a.override_reason + ")"));
    }
    d.attempts.push_back(std::move(a));
  }

  if (best && best_confidence >= 0.8 * cfg.theta) {
    const RelabelAttempt& chosen = d.attempts[*best];
    d.accepted = true;
    d.path = AcceptancePath::kFallback;
    d.hindsight_prompt = chosen.hindsight_prompt;
    d.confidence = chosen.confidence;
    if (chosen.second) d.second_confidence = chosen.second->confidence;
    d.notes.push_back("fallback: attempt " + std::to_string(chosen.attempt_index) + " (c=" +
                      fmt(chosen.confidence) + " >= 0.8*theta)");
  } else {
    d.accepted = false;
    d.path = AcceptancePath::kRejected;
    d.notes.push_back(best ? "rejected: best valid c=" + fmt(best_confidence) + " < 0.8*theta"
                           : "rejected: no valid attempt");
  }
  return d;
}

}  // namespace agenther

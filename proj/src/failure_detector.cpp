#include "agenther/failure_detector.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include "agenther/errors.hpp"
#include "agenther/log.hpp"
#include "agenther/render.hpp"
#include "agenther/text.hpp"

namespace agenther {

namespace assets {
extern const std::string_view kDefaultLexicon;
}  // namespace assets

using nlohmann::json;

namespace {

// Major failure types never reach the default δ = 0.3 gate in rule mode.
constexpr double kMajorWeightCap = 0.29;
constexpr std::size_t kMinSubstantiveChars = 20;

double clamp_unit(double v, const char* field, std::vector<std::string>& warnings) {
  if (v >= 0.0 && v <= 1.0) return v;
  const double clamped = v < 0.0 ? 0.0 : 1.0;
  std::ostringstream msg;
  msg << field << "=" << v << " outside [0, 1], clamped to " << clamped;
  warnings.push_back(msg.str());
  log::warn("stage1: " + msg.str());
  return clamped;
}

double require_number(const json& j, const char* field) {
  auto it = j.find(field);
  if (it == j.end() || it->is_null()) throw SchemaError(std::string("stage1: missing field '") + field + "'");
  if (!it->is_number()) throw SchemaError(std::string("stage1: field '") + field + "' is not a number");
  return it->get<double>();
}

bool require_flag(const json& j, const char* field) {
  auto it = j.find(field);
  if (it == j.end() || it->is_null()) throw SchemaError(std::string("stage1: missing field '") + field + "'");
  if (it->is_boolean()) return it->get<bool>();
  if (it->is_number()) return it->get<double>() != 0.0;
  if (it->is_string()) {
    const std::string s = text::to_lower_ascii(it->get<std::string>());
    if (s == "true" || s == "yes" || s == "1") return true;
    if (s == "false" || s == "no" || s == "0") return false;
  }
  throw SchemaError(std::string("stage1: field '") + field + "' is not a boolean");
}

}  // namespace

std::string to_string(FailureType t) {
  switch (t) {
    case FailureType::kIncomplete: return "incomplete";
    case FailureType::kConstraintViolation: return "constraint_violation";
    case FailureType::kWrongResult: return "wrong_result";
    case FailureType::kToolError: return "tool_error";
    case FailureType::kHallucination: return "hallucination";
    case FailureType::kOffTopic: return "off_topic";
  }
  return "unknown";
}

FailureType parse_failure_type(std::string_view s) {
  const std::string lower = text::to_lower_ascii(text::trim(s));
  for (FailureType t : kAllFailureTypes) {
    if (to_string(t) == lower) return t;
  }
  throw std::invalid_argument("unknown failure type '" + std::string(s) + "'");
}

bool is_major(FailureType t) { return t == FailureType::kHallucination || t == FailureType::kToolError; }

json to_json(const FailureAssessment& a) {
  json j = {{"failure_type", to_string(a.failure_type)},
            {"severity_score", a.severity_score},
            {"recoverable", a.recoverable},
            {"severity_weight", a.severity_weight},
            {"matched_terms", a.matched_terms},
            {"explanation", a.explanation}};
  if (!a.warnings.empty()) j["warnings"] = a.warnings;
  return j;
}

FailureAssessment assessment_from_json(const json& j) {
  FailureAssessment a;
  a.failure_type = parse_failure_type(j.at("failure_type").get<std::string>());
  a.severity_score = j.at("severity_score").get<double>();
  a.recoverable = j.at("recoverable").get<bool>();
  a.severity_weight = j.at("severity_weight").get<double>();
  a.matched_terms = j.value("matched_terms", 0);
  a.explanation = j.value("explanation", "");
  if (auto it = j.find("warnings"); it != j.end()) a.warnings = it->get<std::vector<std::string>>();
  return a;
}

void Lexicon::validate() const {
  for (FailureType t : kAllFailureTypes) {
    auto it = terms.find(t);
    if (it == terms.end() || it->second.empty()) {
      throw ConfigError("lexicon: type '" + to_string(t) + "' has no terms");
    }
    for (const auto& term : it->second) {
      if (term.empty()) throw ConfigError("lexicon: empty term for '" + to_string(t) + "'");
      if (term != text::to_lower_ascii(term)) {
        throw ConfigError("lexicon: term '" + term + "' must be lowercase");
      }
    }
  }
  std::set<FailureType> seen(priority.begin(), priority.end());
  if (priority.size() != kAllFailureTypes.size() || seen.size() != kAllFailureTypes.size()) {
    throw ConfigError("lexicon: priority must list each of the six failure types exactly once");
  }
}

Lexicon Lexicon::from_json(const json& j) {
  Lexicon lex;
  try {
    for (const auto& [name, list] : j.at("types").items()) {
      lex.terms[parse_failure_type(name)] = list.get<std::vector<std::string>>();
    }
    lex.error_patterns = j.value("error_patterns", std::vector<std::string>{});
    for (const auto& name : j.at("priority")) lex.priority.push_back(parse_failure_type(name.get<std::string>()));
  } catch (const json::exception& e) {
    throw ConfigError(std::string("lexicon: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("lexicon: ") + e.what());
  }
  for (auto& p : lex.error_patterns) p = text::to_lower_ascii(p);
  lex.validate();
  return lex;
}

Lexicon Lexicon::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open lexicon " + path.string());
  const json j = json::parse(in, nullptr, false);
  if (j.is_discarded()) throw ConfigError("lexicon " + path.string() + " is not valid JSON");
  return from_json(j);
}

json Lexicon::to_json() const {
  json types = json::object();
  for (const auto& [t, list] : terms) types[to_string(t)] = list;
  json prio = json::array();
  for (FailureType t : priority) prio.push_back(to_string(t));
  return {{"types", types}, {"error_patterns", error_patterns}, {"priority", prio}};
}

const Lexicon& default_lexicon() {
  static const Lexicon lex = Lexicon::from_json(json::parse(assets::kDefaultLexicon));
  return lex;
}

bool is_error_observation(std::string_view observation, const Lexicon& lex) {
  const std::string lower = text::to_lower_ascii(observation);
  return std::any_of(lex.error_patterns.begin(), lex.error_patterns.end(),
                     [&](const std::string& p) { return lower.find(p) != std::string::npos; });
}

bool is_substantive_observation(std::string_view observation, const Lexicon& lex) {
  return text::utf8_length(text::trim(observation)) >= kMinSubstantiveChars &&
         !is_error_observation(observation, lex);
}

FailureAssessment detect_rule(const Trajectory& traj, const Lexicon& lex) {
  std::vector<std::string> haystacks;
  haystacks.reserve(traj.steps.size());
  for (const Step& s : traj.steps) {
    haystacks.push_back(text::to_lower_ascii(s.thought + "\n" + s.action + "\n" + s.observation));
  }
  auto occurs = [&](const std::string& term) {
    return std::any_of(haystacks.begin(), haystacks.end(),
                       [&](const std::string& h) { return h.find(term) != std::string::npos; });
  };

  std::set<std::string> distinct;
  std::vector<std::string> matched_in_order;
  FailureType chosen = FailureType::kIncomplete;
  bool any_type = false;
  for (FailureType t : lex.priority) {
    bool type_hit = false;
    for (const auto& term : lex.terms.at(t)) {
      if (!occurs(term)) continue;
      type_hit = true;
      if (distinct.insert(term).second) matched_in_order.push_back(term);
    }
    if (type_hit && !any_type) {
      chosen = t;
      any_type = true;
    }
  }

  FailureAssessment a;
  a.failure_type = chosen;
  a.matched_terms = static_cast<int>(distinct.size());
  a.severity_score = std::min(1.0, 0.3 + 0.1 * a.matched_terms);
  a.recoverable = std::any_of(traj.steps.begin(), traj.steps.end(), [&](const Step& s) {
    return is_substantive_observation(s.observation, lex);
  });
  a.severity_weight = 1.0 - a.severity_score;
  if (is_major(chosen)) a.severity_weight = std::min(a.severity_weight, kMajorWeightCap);

  std::ostringstream ex;
  ex << "rule: type=" << to_string(chosen) << (any_type ? "" : " (no match, default)") << "; h="
     << a.matched_terms << "; matched=[";
  for (std::size_t i = 0; i < matched_in_order.size(); ++i) ex << (i ? ", " : "") << matched_in_order[i];
  ex << "]; recoverable=" << (a.recoverable ? "yes" : "no");
  a.explanation = ex.str();
  return a;
}

FailureAssessment detect_judge(const Trajectory& traj, JudgeBackend& judge, double temperature) {
  JudgeRequest req;
  req.template_id = TemplateId::kStage1;
  req.filled_prompt = render_template(TemplateId::kStage1, {{"original_prompt", traj.goal},
                                                            {"trajectory", trajectory_text(traj)}});
  req.temperature = temperature;
  const json reply = call_for_json(judge, req, /*reask=*/true);

  FailureAssessment a;
  auto type_it = reply.find("failure_type");
  if (type_it == reply.end() || !type_it->is_string()) {
    throw SchemaError("stage1: missing field 'failure_type'");
  }
  try {
    a.failure_type = parse_failure_type(type_it->get<std::string>());
  } catch (const std::invalid_argument& e) {
    throw SchemaError(std::string("stage1: ") + e.what());
  }
  a.severity_score = clamp_unit(require_number(reply, "severity_score"), "severity_score", a.warnings);
  a.recoverable = require_flag(reply, "recoverability");
  a.severity_weight = clamp_unit(require_number(reply, "severity_weight"), "severity_weight", a.warnings);
  if (auto it = reply.find("explanation"); it != reply.end() && it->is_string()) {
    a.explanation = it->get<std::string>();
  }
  return a;
}

GateDecision severity_gate(const FailureAssessment& a, double delta) {
  if (!(delta >= 0.0 && delta <= 1.0)) throw ConfigError("delta must be in [0, 1]");
  return (!a.recoverable || a.severity_weight < delta) ? GateDecision::kDiscard : GateDecision::kPass;
}

}  // namespace agenther

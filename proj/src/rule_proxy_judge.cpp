#include "agenther/rule_proxy_judge.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

#include "agenther/outcome.hpp"
#include "agenther/render.hpp"
#include "agenther/text.hpp"

namespace agenther {

using nlohmann::json;

namespace {

// Text following `marker` inside the USER block of the prompt.
std::string user_field(std::string_view prompt, std::string_view marker, bool to_end) {
  auto user = prompt.rfind("USER: ");
  if (user == std::string_view::npos) user = 0;
  const auto pos = prompt.find(marker, user);
  if (pos == std::string_view::npos) return {};
  const auto start = pos + marker.size();
  if (to_end) return std::string(prompt.substr(start));
  const auto nl = prompt.find('\n', start);
  return std::string(prompt.substr(start, nl == std::string_view::npos ? nl : nl - start));
}

Trajectory parse_prompt_trajectory(std::string_view prompt) {
  Trajectory t;
  t.id = "proxy";
  t.goal = user_field(prompt, "Original prompt: ", false);
  t.steps = parse_trajectory_text(user_field(prompt, "Trajectory: ", true));
  return t;
}

std::string strip_word(const std::string& w) {
  std::string out;
  for (char c : w) {
    if (std::isalnum(static_cast<unsigned char>(c))) out += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  }
  return out;
}

}  // namespace

JudgeResponse RuleProxyJudge::call(const JudgeRequest& req) {
  req.validate();
  json reply;
  switch (req.template_id) {
    case TemplateId::kStage1: {
      const FailureAssessment a = detect_rule(parse_prompt_trajectory(req.filled_prompt), lexicon_);
      reply = {{"failure_type", to_string(a.failure_type)},
               {"severity_score", a.severity_score},
               {"recoverability", a.recoverable},
               {"severity_weight", a.severity_weight},
               {"explanation", a.explanation}};
      break;
    }
    case TemplateId::kStage2: {
      const ReplayOutcome o = extract_rule(parse_prompt_trajectory(req.filled_prompt), lexicon_);
      reply = {{"actual_achievements", o.achievements}, {"key_observations", o.key_observations}};
      break;
    }
    case TemplateId::kStage3: {
      const json outcome = json::parse(user_field(req.filled_prompt, "Outcome summary: ", false), nullptr, false);
      std::vector<std::string> achievements;
      if (outcome.is_object() && outcome.contains("actual_achievements") && outcome["actual_achievements"].is_array()) {
        for (const auto& a : outcome["actual_achievements"]) {
          if (a.is_string()) achievements.push_back(a.get<std::string>());
        }
      }
      if (achievements.empty()) {
        reply = {{"hindsight_prompt", ""}, {"is_valid", false}, {"rationale", "nothing achieved"}, {"confidence", 0.0}};
        break;
      }
      reply = {{"hindsight_prompt", "Report what you find when checking: " + text::utf8_truncate(achievements.front(), 160)},
               {"is_valid", true},
               {"rationale", "restates the first achievement"},
               {"confidence", std::min(1.0, 0.4 + 0.1 * static_cast<double>(achievements.size()))}};
      break;
    }
    case TemplateId::kSecondJudge: {
      const std::string goal = user_field(req.filled_prompt, "Proposed hindsight prompt: ", false);
      std::string observations;
      for (const Step& s : parse_trajectory_text(user_field(req.filled_prompt, "Trajectory: ", true))) {
        observations += text::to_lower_ascii(s.observation);
        observations += '\n';
      }
      std::size_t words = 0;
      std::size_t found = 0;
      for (const auto& raw : text::split_words(goal)) {
        const std::string w = strip_word(raw);
        if (w.size() < 4) continue;
        ++words;
        if (observations.find(w) != std::string::npos) ++found;
      }
      const double share = words == 0 ? 0.0 : static_cast<double>(found) / static_cast<double>(words);
      const double c2 = 0.5 + 0.5 * share;
      reply = {{"is_valid", share >= 0.5},
               {"confidence", c2},
               {"rejection_reason_if_any", share >= 0.5 ? "" : "prompt words missing from observations"}};
      break;
    }
  }
  return make_response(req, reply.dump());
}

}  // namespace agenther

#include "agenther/outcome.hpp"

#include <algorithm>
#include <unordered_set>

#include "agenther/errors.hpp"
#include "agenther/log.hpp"
#include "agenther/render.hpp"
#include "agenther/text.hpp"

namespace agenther {

using nlohmann::json;

namespace {

void append_unique_tokens(std::string_view s, std::vector<std::string>& out,
                          std::unordered_set<std::string>& seen) {
  for (auto& tok : text::numeric_tokens(s)) {
    if (seen.insert(tok).second) out.push_back(std::move(tok));
  }
}

std::vector<std::string> string_list(const json& reply, const char* field) {
  auto it = reply.find(field);
  if (it == reply.end() || it->is_null()) throw SchemaError(std::string("stage2: missing field '") + field + "'");
  if (!it->is_array()) throw SchemaError(std::string("stage2: field '") + field + "' is not a list");
  std::vector<std::string> out;
  for (const auto& v : *it) {
    if (!v.is_string()) throw SchemaError(std::string("stage2: field '") + field + "' holds a non-string");
    out.push_back(v.get<std::string>());
  }
  return out;
}

// Step whose observation shares the most words with `claim`; ties and
// no-overlap go to the lowest index.
int best_source_step(const Trajectory& traj, std::string_view claim) {
  const auto words = text::split_words(claim);
  const std::unordered_set<std::string> wanted(words.begin(), words.end());
  int best = traj.steps.front().index;
  std::size_t best_overlap = 0;
  for (const Step& s : traj.steps) {
    std::size_t overlap = 0;
    std::unordered_set<std::string> counted;
    for (const auto& w : text::split_words(s.observation)) {
      if (wanted.count(w) && counted.insert(w).second) ++overlap;
    }
    if (overlap > best_overlap) {
      best_overlap = overlap;
      best = s.index;
    }
  }
  return best;
}

}  // namespace

json to_json(const ReplayOutcome& o) {
  json j = {{"achievements", o.achievements},
            {"key_observations", o.key_observations},
            {"numeric_tokens", o.numeric_tokens},
            {"source_step_indices", o.source_step_indices}};
  if (!o.warnings.empty()) j["warnings"] = o.warnings;
  return j;
}

ReplayOutcome outcome_from_json(const json& j) {
  ReplayOutcome o;
  o.achievements = j.at("achievements").get<std::vector<std::string>>();
  o.key_observations = j.at("key_observations").get<std::vector<std::string>>();
  o.numeric_tokens = j.at("numeric_tokens").get<std::vector<std::string>>();
  o.source_step_indices = j.at("source_step_indices").get<std::vector<int>>();
  if (auto it = j.find("warnings"); it != j.end()) o.warnings = it->get<std::vector<std::string>>();
  return o;
}

std::string render_outcome(const ReplayOutcome& o) {
  return json{{"actual_achievements", o.achievements}, {"key_observations", o.key_observations}}.dump();
}

ReplayOutcome extract_rule(const Trajectory& traj, const Lexicon& lex) {
  ReplayOutcome o;
  std::unordered_set<std::string> seen_achievements;
  std::unordered_set<std::string> seen_tokens;
  for (const Step& s : traj.steps) {
    if (!is_substantive_observation(s.observation, lex)) continue;
    std::string achievement = text::utf8_truncate(text::trim(s.observation), kMaxAchievementChars);
    append_unique_tokens(s.observation, o.numeric_tokens, seen_tokens);
    if (!seen_achievements.insert(achievement).second) continue;
    if (!text::numeric_tokens(achievement).empty()) o.key_observations.push_back(achievement);
    o.achievements.push_back(std::move(achievement));
    o.source_step_indices.push_back(s.index);
  }
  return o;
}

ReplayOutcome extract_judge(const Trajectory& traj, JudgeBackend& judge, double temperature) {
  JudgeRequest req;
  req.template_id = TemplateId::kStage2;
  req.filled_prompt = render_template(TemplateId::kStage2, {{"trajectory", trajectory_text(traj)}});
  req.temperature = temperature;
  const json reply = call_for_json(judge, req, /*reask=*/true);

  std::unordered_set<std::string> observed;
  for (const Step& s : traj.steps) {
    for (const auto& tok : text::numeric_tokens(s.observation)) observed.insert(text::canonical_number(tok));
  }
  ReplayOutcome o;
  auto grounded = [&](const std::string& claim, const char* field) {
    for (const auto& tok : text::numeric_tokens(claim)) {
      if (!observed.count(text::canonical_number(tok))) {
        const std::string msg = std::string("stage2: dropped ") + field + " citing " + tok +
                                ", which no observation contains: \"" + text::utf8_truncate(claim, 80) + "\"";
        log::warn(msg);
        o.warnings.push_back(msg);
        return false;
      }
    }
    return true;
  };

  std::unordered_set<std::string> seen_achievements;
  for (const auto& raw : string_list(reply, "actual_achievements")) {
    std::string a = text::utf8_truncate(text::trim(raw), kMaxAchievementChars);
    if (a.empty() || !grounded(a, "achievement")) continue;
    if (!seen_achievements.insert(a).second) continue;
    o.source_step_indices.push_back(best_source_step(traj, a));
    o.achievements.push_back(std::move(a));
  }
  for (const auto& raw : string_list(reply, "key_observations")) {
    std::string k(text::trim(raw));
    if (k.empty() || !grounded(k, "key observation")) continue;
    o.key_observations.push_back(std::move(k));
  }
  std::unordered_set<std::string> seen_tokens;
  for (const auto& a : o.achievements) append_unique_tokens(a, o.numeric_tokens, seen_tokens);
  for (const auto& k : o.key_observations) append_unique_tokens(k, o.numeric_tokens, seen_tokens);
  return o;
}

}  // namespace agenther

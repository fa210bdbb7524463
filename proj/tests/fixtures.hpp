#pragma once

#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "agenther/judge.hpp"
#include "agenther/outcome.hpp"
#include "agenther/render.hpp"
#include "agenther/trajectory.hpp"
#include "json.hpp"

namespace fixtures {

using namespace agenther;

inline Trajectory copper_trajectory() {
  Trajectory t;
  t.id = "webarena-001";
  t.goal = "Find copper wire suppliers with prices under $5/kg and MOQ below 100 kg.";
  t.steps = {
      {1, "Search for bulk copper wire pricing.", "web_search(\"copper wire bulk pricing\")",
       "5 suppliers found: MetalWorks $6.20/kg (MOQ 50 kg), WireWorld $5.80/kg (MOQ 200 kg), CopperDirect "
       "$4.90/kg (MOQ 500 kg), MicroMetals $5.30/kg (MOQ 10 kg).",
       false},
      {2, "CopperDirect is cheapest; check whether it takes small orders.",
       "web_search(\"CopperDirect small order\")", "min. 500 kg.", false},
      {3, "No supplier meets both constraints, so summarize the best option.", "summarize()",
       "Best: MicroMetals $5.30/kg, MOQ 10 kg.", true},
  };
  return t;
}

// Judge answering from a callback; counts calls per template.
class FnJudge final : public JudgeBackend {
 public:
  using Fn = std::function<std::string(const JudgeRequest&)>;
  explicit FnJudge(Fn fn) : fn_(std::move(fn)) {}

  JudgeResponse call(const JudgeRequest& req) override {
    {
      std::lock_guard lock(mu_);
      ++calls_[req.template_id];
      requests_.push_back(req);
    }
    return make_response(req, fn_(req));
  }
  std::string name() const override { return "fn"; }

  int calls(TemplateId id) const {
    std::lock_guard lock(mu_);
    auto it = calls_.find(id);
    return it == calls_.end() ? 0 : it->second;
  }
  std::vector<JudgeRequest> requests() const {
    std::lock_guard lock(mu_);
    return requests_;
  }

 private:
  Fn fn_;
  mutable std::mutex mu_;
  std::map<TemplateId, int> calls_;
  std::vector<JudgeRequest> requests_;
};

inline const char* kCopperGoal =
    "Compare copper wire suppliers by price per kg and MOQ. Identify the option with the lowest MOQ and report "
    "its price.";

// One scripted Stage-3 answer and, optionally, the second judge's answer.
struct ScriptedAttempt {
  std::string goal;
  bool valid = true;
  double c = 0.0;
  std::optional<std::pair<bool, double>> second;
  bool non_json = false;
};

inline std::string stage3_prompt(const Trajectory& t, const ReplayOutcome& o) {
  return render_template(TemplateId::kStage3, {{"outcome", render_outcome(o)}, {"original_prompt", t.goal}});
}

inline void script(Transcript& tr, const Trajectory& t, const std::vector<ScriptedAttempt>& attempts,
                   const Lexicon& lex = default_lexicon()) {
  const ReplayOutcome o = extract_rule(t, lex);
  const std::string fp = fingerprint(TemplateId::kStage3, stage3_prompt(t, o));
  int k = 0;
  for (const auto& a : attempts) {
    ++k;
    if (a.non_json) {
      tr.add({fp, k, "I think the goal should be about copper."});
      continue;
    }
    nlohmann::json r = {{"hindsight_prompt", a.goal}, {"is_valid", a.valid}, {"rationale", "scripted"},
                        {"confidence", a.c}};
    tr.add({fp, k, r.dump()});
    if (a.second) {
      const std::string p = render_template(TemplateId::kSecondJudge,
                                            {{"hindsight_prompt", a.goal}, {"trajectory", trajectory_text(t)}});
      nlohmann::json s = {{"is_valid", a.second->first},
                          {"confidence", a.second->second},
                          {"rejection_reason_if_any", a.second->first ? "" : "scripted rejection"}};
      tr.add({fingerprint(TemplateId::kSecondJudge, p), k, s.dump()});
    }
  }
}

inline Trajectory simple(const std::string& id, const std::string& goal, std::vector<std::string> observations,
                         const std::string& final_thought) {
  Trajectory t;
  t.id = id;
  t.goal = goal;
  int i = 0;
  for (auto& o : observations) {
    ++i;
    t.steps.push_back({i, "Look up item " + std::to_string(i) + ".", "lookup(" + std::to_string(i) + ")",
                       std::move(o), false});
  }
  t.steps.push_back({i + 1, final_thought, "finish()", "", true});
  return t;
}

struct TraceFixture {
  std::vector<Trajectory> corpus;
  Transcript transcript;
};

// Ten trajectories whose outcomes were traced by hand (theta 0.5, K 3):
//   T01 copper example, .87 / c2 .91                     multi_judge  .89
//   T02 .62 / c2 .30, then .71 / c2 .80                  multi_judge  .755
//   T03 .42 valid, .90 invalid, .35 valid                fallback     .42
//   T04 three invalid attempts                           rejected
//   T05 .30, .38, .25 valid                              rejected (.38 < .4)
//   T06 .80 / c2 .20 (declined), .45, invalid            fallback     .80
//   T07 tool error                                       discarded
//   T08 only error observations                          discarded
//   T09 cites $7.77 (overridden), then .66 / c2 .70      multi_judge  .68
//   T10 reuses the original goal, non-JSON, .50 / c2 .50 multi_judge  .50
inline TraceFixture trace_fixture() {
  TraceFixture f;
  Transcript& tr = f.transcript;

  Trajectory t01 = copper_trajectory();
  t01.id = "T01";
  script(tr, t01, {{kCopperGoal, true, 0.87, std::pair{true, 0.91}}});

  Trajectory t02 = simple("T02", "Book a table for six at a vegan restaurant in Oslo tonight.",
                          {"Green Leaf has a table for four at 19:00.", "Plant Hall is fully booked tonight."},
                          "I ran out of steps before finding a table for six.");
  script(tr, t02,
         {{"Find a vegan restaurant in Oslo with a table for four at 19:00.", true, 0.62, std::pair{false, 0.30}},
          {"Check whether Green Leaf in Oslo has a table for four at 19:00 tonight.", true, 0.71,
           std::pair{true, 0.80}}});

  Trajectory t03 = simple("T03", "Find a flight from Lisbon to Tokyo under $400.",
                          {"Cheapest Lisbon to Tokyo fare is $712 with one stop.",
                           "Direct Lisbon to Tokyo flights start at $1,050."},
                          "Every fare exceeds the budget.");
  script(tr, t03,
         {{"Find the cheapest Lisbon to Tokyo fare.", true, 0.42},
          {"Book the cheapest direct flight.", false, 0.90},
          {"Report the direct Lisbon to Tokyo fare.", true, 0.35}});

  Trajectory t04 = simple("T04", "Summarize the 2023 annual report of Acme Corp.",
                          {"Acme Corp investor page lists press releases only.",
                           "The 2022 annual report PDF is 84 pages long."},
                          "I ran out of steps before locating the 2023 report.");
  script(tr, t04,
         {{"Summarize the 2022 report.", false, 0.70},
          {"List Acme press releases.", false, 0.60},
          {"Describe the investor page.", false, 0.55}});

  Trajectory t05 = simple("T05", "Find a used road bike under $300 in Porto.",
                          {"Listing: carbon road bike in Porto for $950.", "Listing: aluminum road bike for $480."},
                          "No listing is under the budget; every price exceeds it.");
  script(tr, t05,
         {{"Find a carbon road bike for sale in Porto.", true, 0.30},
          {"Find an aluminum road bike listing.", true, 0.38},
          {"List road bikes for sale.", true, 0.25}});

  Trajectory t06 = simple("T06", "Get the population of the smallest Portuguese district capital.",
                          {"Portalegre has a population of 22,359.", "Beja has a population of 35,854."},
                          "The answer I gave looks wrong; the figures mismatch the census table.");
  script(tr, t06,
         {{"Report the population of Portalegre.", true, 0.80, std::pair{false, 0.20}},
          {"Report the population of Beja.", true, 0.45},
          {"Compare district capitals.", false, 0.90}});

  Trajectory t07 = simple("T07", "Fetch the current EUR to JPY exchange rate.",
                          {"Rates API: EUR base currency listing retrieved for 32 currencies.",
                           "Traceback (most recent call last): ConnectionError"},
                          "The tool call failed and I could not recover.");

  Trajectory t08;
  t08.id = "T08";
  t08.goal = "Download the quarterly sales CSV.";
  t08.steps = {{1, "Open the reports page.", "open(\"/reports\")", "Error: 404 not found", false},
               {2, "Try the archive.", "open(\"/archive\")", "timed out", false},
               {3, "Stop here.", "finish()", "", true}};

  Trajectory t09 = simple("T09", "Find a hotel in Rome under $90 per night near the Colosseum.",
                          {"Hotel Forum near the Colosseum costs $140 per night.",
                           "Hostel Roma costs $65 per night, 3 km from the Colosseum."},
                          "The only option under budget is too far, so the result is incomplete.");
  script(tr, t09,
         {{"Find a Rome hotel near the Colosseum for $7.77 per night.", true, 0.93},
          {"Find the nightly price of Hotel Forum near the Colosseum.", true, 0.66, std::pair{true, 0.70}}});

  Trajectory t10 = simple("T10", "Find the opening hours of the Prado Museum on Mondays.",
                          {"The Prado Museum is open 10:00 to 20:00 Monday to Saturday.",
                           "On Sundays the Prado Museum closes at 19:00."},
                          "I stopped early before confirming holiday hours.");
  script(tr, t10,
         {{"Find the opening hours of the Prado Museum on Mondays.", true, 0.95},
          {"", true, 0.0, std::nullopt, true},
          {"Find when the Prado Museum closes on Sundays.", true, 0.50, std::pair{true, 0.50}}});

  f.corpus = {t01, t02, t03, t04, t05, t06, t07, t08, t09, t10};
  return f;
}

}  // namespace fixtures

namespace fixtures {

struct TraceExpectation {
  std::string id;
  std::string status;  // discarded | accepted | rejected
  std::string path;    // multi_judge | fallback | rejected | "" when discarded
  double confidence;   // c*, 0 unless accepted
};

// Hand-traced outcomes of trace_fixture() at the default configuration.
inline std::vector<TraceExpectation> trace_expectations() {
  return {{"T01", "accepted", "multi_judge", (0.87 + 0.91) / 2.0},
          {"T02", "accepted", "multi_judge", (0.71 + 0.80) / 2.0},
          {"T03", "accepted", "fallback", 0.42},
          {"T04", "rejected", "rejected", 0.0},
          {"T05", "rejected", "rejected", 0.0},
          {"T06", "accepted", "fallback", 0.80},
          {"T07", "discarded", "", 0.0},
          {"T08", "discarded", "", 0.0},
          {"T09", "accepted", "multi_judge", (0.66 + 0.70) / 2.0},
          {"T10", "accepted", "multi_judge", (0.50 + 0.50) / 2.0}};
}

}  // namespace fixtures

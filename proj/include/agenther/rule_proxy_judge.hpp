#pragma once

#include <string>

#include "agenther/failure_detector.hpp"
#include "agenther/judge.hpp"

namespace agenther {

// Judge that answers from the rule engines instead of a model. It reads the
// trajectory back out of the filled prompt, so its replies follow the same
// schemas as a real judge and exercise the judge-mode code paths offline.
//   stage1        detect_rule on the parsed trajectory
//   stage2        extract_rule
//   stage3        "Report what you find when checking: <first achievement>",
//                 confidence min(1, 0.4 + 0.1 * #achievements)
//   second_judge  0.5 + 0.5 * share of the prompt's content words (>= 4
//                 letters) found in the observations; valid at >= 0.5
class RuleProxyJudge final : public JudgeBackend {
 public:
  explicit RuleProxyJudge(Lexicon lexicon = default_lexicon()) : lexicon_(std::move(lexicon)) {}

  JudgeResponse call(const JudgeRequest& req) override;
  std::string name() const override { return "rule-proxy"; }

 private:
  Lexicon lexicon_;
};

}  // namespace agenther

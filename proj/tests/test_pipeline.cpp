#include "doctest.h"

#include "agenther/errors.hpp"
#include "agenther/log.hpp"
#include "agenther/pipeline.hpp"
#include "agenther/synthetic.hpp"
#include "fixtures.hpp"

using namespace agenther;

namespace {

struct Quiet {
  Quiet() { log::set_level(log::Level::kOff); }
  ~Quiet() { log::set_level(log::Level::kWarn); }
};

std::string dump_results(const PipelineResult& r) {
  std::string out;
  for (const auto& x : r.results) out += to_json(x).dump() + "\n";
  return out + r.stats.to_json().dump();
}

AcceptedExample example(const std::string& id) {
  AcceptedExample ex;
  ex.trajectory = fixtures::copper_trajectory();
  ex.trajectory.id = id;
  ex.assessment.severity_weight = 0.85;
  ex.decision.accepted = true;
  ex.decision.hindsight_prompt = fixtures::kCopperGoal;
  return ex;
}

}  // namespace

TEST_CASE("acceptance rate arithmetic") {
  RunStats s;
  s.total = 3000;
  s.accepted = 2341;
  CHECK(s.acceptance_rate() == doctest::Approx(0.7803).epsilon(1e-4));
  CHECK(format_percent(2341, 3000) == "78.0");
  CHECK(format_percent(2197, 3000) == "73.2");
  CHECK(format_percent(4123, 5000) == "82.5");
  CHECK(format_percent(0, 0) == "0.0");
  CHECK(RunStats{}.acceptance_rate() == 0.0);
}

TEST_CASE("hand-traced fixture") {
  Quiet q;
  auto f = fixtures::trace_fixture();
  ScriptedJudge judge(f.transcript);
  const auto res = run_pipeline(f.corpus, PipelineConfig{}, judge);
  const auto expected = fixtures::trace_expectations();
  REQUIRE(res.results.size() == expected.size());
  for (std::size_t i = 0; i < expected.size(); ++i) {
    const auto& r = res.results[i];
    const auto& e = expected[i];
    INFO(e.id);
    CHECK(r.id == e.id);
    CHECK(to_string(r.status) == e.status);
    if (e.status == "discarded") {
      CHECK_FALSE(r.decision.has_value());
      continue;
    }
    REQUIRE(r.decision.has_value());
    CHECK(to_string(r.decision->path) == e.path);
    CHECK(r.decision->confidence == e.confidence);
  }
  CHECK(res.results[0].decision->confidence == doctest::Approx(0.89).epsilon(1e-15));
  CHECK(res.results[6].reason == "severity_below_delta");
  CHECK(res.results[7].reason == "unrecoverable");
  CHECK(res.results[3].reason == "no_valid_attempt");
  CHECK(res.results[4].reason == "below_fallback");
  CHECK(res.results[9].decision->attempts[0].override_reason.find("original") != std::string::npos);
  CHECK(res.results[9].decision->attempts[1].judge_error);
  CHECK(res.results[8].decision->attempts[0].override_reason.find("7.77") != std::string::npos);

  const auto& s = res.stats;
  CHECK(s.total == 10);
  CHECK(s.discarded_stage1 == 2);
  CHECK(s.relabel_attempted == 8);
  CHECK(s.accepted == 6);
  CHECK(s.accepted_by_path.multi_judge == 4);
  CHECK(s.accepted_by_path.fallback == 2);
  CHECK(s.rejected == 2);
  CHECK(s.acceptance_rate() == 0.6);
  CHECK(s.consistent());
  CHECK(res.accepted_examples(f.corpus).size() == 6);
}

TEST_CASE("single-judge run over the fixture") {
  Quiet q;
  auto f = fixtures::trace_fixture();
  ScriptedJudge judge(f.transcript);
  PipelineConfig cfg;
  cfg.multi_judge = false;
  const auto res = run_pipeline(f.corpus, cfg, judge);
  CHECK(res.stats.accepted == 6);
  CHECK(res.stats.accepted_by_path.single_judge == 5);
  CHECK(res.stats.accepted_by_path.fallback == 1);
  CHECK(res.results[1].decision->confidence == 0.62);
}

TEST_CASE("everything discarded at the gate") {
  auto f = fixtures::trace_fixture();
  ScriptedJudge judge(f.transcript);
  PipelineConfig cfg;
  cfg.delta = 1.0;
  const auto res = run_pipeline(f.corpus, cfg, judge);
  CHECK(res.stats.discarded_stage1 == 10);
  CHECK(res.stats.accepted == 0);
  CHECK(res.stats.consistent());
  CHECK(res.accepted_examples(f.corpus).empty());
  CHECK(run_pipeline({}, cfg, judge).stats.total == 0);
}

TEST_CASE("judge errors reject only the affected trajectory") {
  Quiet q;
  auto f = fixtures::trace_fixture();
  PipelineConfig cfg;
  cfg.stage1_mode = StageMode::kJudge;
  ScriptedJudge judge(f.transcript);  // has no stage-1 answers
  const auto res = run_pipeline(f.corpus, cfg, judge);
  CHECK(res.stats.rejected == 10);
  CHECK(res.stats.rejected_with_error == 10);
  CHECK(res.stats.relabel_attempted == 10);
  CHECK(res.stats.consistent());
  CHECK(res.results[0].error.find("stage1") != std::string::npos);
}

TEST_CASE("counts are conserved on synthetic corpora") {
  Quiet q;
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const auto corpus = generate_corpus(150, seed);
    MockJudge judge(seed);
    PipelineConfig cfg;
    cfg.theta = 0.3 * static_cast<double>(seed);
    const auto res = run_pipeline(corpus.trajectories, cfg, judge);
    const auto& s = res.stats;
    CHECK(s.consistent());
    CHECK(s.total == 150);
    CHECK(s.discarded_stage1 + s.accepted + s.rejected == s.total);
    std::size_t per_type = 0;
    for (const auto& [t, c] : s.per_failure_type) per_type += c.total;
    CHECK(per_type == s.total);
  }
}

TEST_CASE("concurrency does not change the output") {
  Quiet q;
  const auto corpus = generate_corpus(200, 42);
  MockJudge judge(42);
  PipelineConfig one;
  PipelineConfig eight;
  eight.concurrency = 8;
  const auto a = run_pipeline(corpus.trajectories, one, judge);
  const auto b = run_pipeline(corpus.trajectories, eight, judge);
  CHECK(dump_results(a) == dump_results(b));
}

TEST_CASE("stats merge adds partials") {
  Quiet q;
  auto f = fixtures::trace_fixture();
  ScriptedJudge judge(f.transcript);
  const auto whole = run_pipeline(f.corpus, PipelineConfig{}, judge).stats;
  RunStats a, b;
  for (std::size_t i = 0; i < f.corpus.size(); ++i) {
    const auto r = process_trajectory(f.corpus[i], i, PipelineConfig{}, judge, default_lexicon());
    (i < 4 ? a : b).record(r);
  }
  a.merge(b);
  CHECK(a.to_json() == whole.to_json());
}

TEST_CASE("result json round trip") {
  Quiet q;
  auto f = fixtures::trace_fixture();
  ScriptedJudge judge(f.transcript);
  for (const auto& r : run_pipeline(f.corpus, PipelineConfig{}, judge).results) {
    CHECK(to_json(result_from_json(to_json(r))) == to_json(r));
  }
  CHECK_THROWS_AS(result_from_json(nlohmann::json{{"status", "weird"}}), DataError);
}

TEST_CASE("rounds accumulate") {
  std::vector<AcceptedExample> first;
  for (int i = 0; i < 2197; ++i) first.push_back(example("a" + std::to_string(i)));
  auto acc = accumulate_round({}, RoundLedger{1, "round one", 3000, 0, 0}, {}, first);
  REQUIRE(acc.ledger.size() == 1);
  CHECK(acc.ledger[0].accepted == 2197);
  CHECK(acc.ledger[0].cumulative_corpus_size == 2197);
  CHECK(acc.examples.front().trajectory.id == "r1/a0");

  std::vector<AcceptedExample> second;
  for (int i = 0; i < 1750; ++i) second.push_back(example("a" + std::to_string(i)));
  acc = accumulate_round(acc.ledger, RoundLedger{2, "round two", 2500, 0, 0}, acc.examples, second);
  CHECK(acc.ledger.size() == 2);
  CHECK(acc.ledger[1].cumulative_corpus_size == 3947);
  CHECK(acc.examples.size() == 3947);
  CHECK(acc.examples.back().trajectory.id == "r2/a1749");

  CHECK_THROWS_AS(accumulate_round(acc.ledger, RoundLedger{4, "gap", 1, 0, 0}, acc.examples, {}), DataError);
  CHECK_THROWS_AS(accumulate_round(acc.ledger, RoundLedger{3, "short", 1, 0, 0}, first, {}), DataError);
  CHECK_THROWS_AS(accumulate_round({}, RoundLedger{1, "dup", 2, 0, 0}, {}, {example("x"), example("x")}),
                  DataError);
  CHECK(to_json(acc.ledger[1])["cumulative_corpus_size"] == 3947);
}

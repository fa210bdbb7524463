#include "doctest.h"

#include <atomic>
#include <cstdlib>
#include <thread>

#include "agenther/errors.hpp"
#include "agenther/judge.hpp"
#include "agenther/log.hpp"
#include "agenther/rule_proxy_judge.hpp"
#include "fixtures.hpp"
#include "httplib.h"
#include "test_util.hpp"

using namespace agenther;

TEST_CASE("placeholders and rendering") {
  CHECK(placeholders("a {x} b {y_z} {\"k\": 1} {x}") == std::vector<std::string>{"x", "y_z", "x"});
  CHECK(render_text("{a} and {b}", {{"a", "{b}"}, {"b", "2"}}) == "{b} and 2");
  CHECK_THROWS_AS(render_text("{a} {missing}", {{"a", "1"}}), std::invalid_argument);
  const std::string s1 = render_template(TemplateId::kStage1, {{"original_prompt", "P"}, {"trajectory", "T"}});
  CHECK(s1.find("Original prompt: P\nTrajectory: T") != std::string::npos);
  CHECK(placeholders(template_text(TemplateId::kStage3)) == std::vector<std::string>{"outcome", "original_prompt"});
  CHECK(placeholders(template_text(TemplateId::kSecondJudge)) ==
        std::vector<std::string>{"hindsight_prompt", "trajectory"});
}

TEST_CASE("anchor phrases survive rendering") {
  const Bindings b = {{"original_prompt", "p"}, {"trajectory", "t"}, {"outcome", "o"}, {"hindsight_prompt", "h"}};
  CHECK(render_template(TemplateId::kStage1, b).find("Respond ONLY with valid JSON") != std::string::npos);
  CHECK(render_template(TemplateId::kStage2, b).find("Be STRICTLY factual") != std::string::npos);
  CHECK(render_template(TemplateId::kStage3, b).find("Do NOT reference or reuse") != std::string::npos);
  CHECK(render_template(TemplateId::kSecondJudge, b).find("Be conservative: only accept") != std::string::npos);
}

TEST_CASE("code fences are stripped") {
  CHECK(strip_code_fences("```json\n{\"a\":1}\n```") == "{\"a\":1}");
  CHECK(strip_code_fences("  ```\n{}\n```  ") == "{}");
  CHECK(strip_code_fences("{\"a\":1}") == "{\"a\":1}");
  CHECK(parse_judge_json("```json\n{\"a\":1}\n```")->at("a") == 1);
  CHECK_FALSE(parse_judge_json("sure! here it is").has_value());
}

TEST_CASE("response size cap") {
  JudgeRequest req;
  req.filled_prompt = "x";
  req.max_response_bytes = 4;
  CHECK_THROWS_AS(make_response(req, "12345"), BackendError);
  CHECK(make_response(req, "1234").raw_text == "1234");
}

TEST_CASE("fingerprints separate templates and prompts") {
  CHECK(fingerprint(TemplateId::kStage1, "p") == fingerprint(TemplateId::kStage1, "p"));
  CHECK(fingerprint(TemplateId::kStage1, "p") != fingerprint(TemplateId::kStage2, "p"));
  CHECK(fingerprint(TemplateId::kStage1, "p") != fingerprint(TemplateId::kStage1, "q"));
  CHECK(fingerprint(TemplateId::kStage1, "p").size() == 16);
}

TEST_CASE("mock judge is deterministic and roughly uniform") {
  MockJudge a(42), b(42), c(43);
  JudgeRequest req;
  req.template_id = TemplateId::kSecondJudge;
  req.filled_prompt = "prompt";
  CHECK(a.call(req).raw_text == b.call(req).raw_text);
  CHECK(a.confidence_for(req) != c.confidence_for(req));

  double sum = 0.0;
  const int n = 10000;
  for (int i = 0; i < n; ++i) {
    req.filled_prompt = "prompt number " + std::to_string(i);
    const double v = a.confidence_for(req);
    CHECK(v >= 0.0);
    CHECK(v < 1.0);
    sum += v;
  }
  CHECK(sum / n >= 0.45);
  CHECK(sum / n <= 0.55);
}

TEST_CASE("mock answers follow each schema") {
  MockJudge mock(1);
  const auto t = fixtures::copper_trajectory();
  JudgeRequest r1{TemplateId::kStage1,
                  render_template(TemplateId::kStage1, {{"original_prompt", t.goal}, {"trajectory", trajectory_text(t)}})};
  const auto j1 = *mock.call(r1).parsed_json;
  for (const char* k : {"failure_type", "severity_score", "recoverability", "severity_weight"}) CHECK(j1.contains(k));
  JudgeRequest r2{TemplateId::kStage2, render_template(TemplateId::kStage2, {{"trajectory", trajectory_text(t)}})};
  CHECK(mock.call(r2).parsed_json->at("actual_achievements").size() == 3);
  JudgeRequest r3{TemplateId::kStage3, fixtures::stage3_prompt(t, extract_rule(t, default_lexicon()))};
  const auto j3 = *mock.call(r3).parsed_json;
  CHECK(j3.at("hindsight_prompt").get<std::string>().rfind("Find and report: ", 0) == 0);
  r3.sample = 2;
  CHECK(mock.call(r3).parsed_json->at("confidence") != j3.at("confidence"));
}

TEST_CASE("scripted judge replays copper example") {
  auto f = fixtures::trace_fixture();
  ScriptedJudge judge(f.transcript);
  const auto& t = f.corpus[0];
  JudgeRequest req{TemplateId::kStage3, fixtures::stage3_prompt(t, extract_rule(t, default_lexicon()))};
  const auto resp = judge.call(req);
  CHECK(resp.parsed_json->at("confidence") == 0.87);
  req.filled_prompt += " ";
  CHECK_THROWS_AS(judge.call(req), TranscriptMissError);
}

TEST_CASE("transcript lookup prefers the exact sample") {
  Transcript tr;
  tr.add({"abc", std::nullopt, "any"});
  tr.add({"abc", 2, "second"});
  CHECK(tr.find("abc", 1)->raw_text == "any");
  CHECK(tr.find("abc", 2)->raw_text == "second");
  CHECK(tr.find("xyz", 1) == nullptr);
  const auto back = Transcript::parse(tr.serialize());
  CHECK(back.size() == 2);
  CHECK(back.serialize() == tr.serialize());
}

TEST_CASE("recording judge captures a replayable transcript") {
  MockJudge mock(5);
  RecordingJudge rec(mock);
  JudgeRequest req{TemplateId::kSecondJudge, "hello"};
  const std::string first = rec.call(req).raw_text;
  ScriptedJudge replay(rec.transcript());
  CHECK(replay.call(req).raw_text == first);
}

TEST_CASE("rule proxy judge answers every template") {
  RuleProxyJudge judge;
  const auto t = fixtures::copper_trajectory();
  const std::string traj = trajectory_text(t);
  JudgeRequest r1{TemplateId::kStage1,
                  render_template(TemplateId::kStage1, {{"original_prompt", t.goal}, {"trajectory", traj}})};
  CHECK(judge.call(r1).parsed_json->at("failure_type") == "constraint_violation");
  JudgeRequest r3{TemplateId::kStage3, fixtures::stage3_prompt(t, extract_rule(t, default_lexicon()))};
  const auto j3 = *judge.call(r3).parsed_json;
  CHECK(j3.at("confidence") == doctest::Approx(0.6));
  JudgeRequest r4{TemplateId::kSecondJudge,
                  render_template(TemplateId::kSecondJudge,
                                  {{"hindsight_prompt", j3.at("hindsight_prompt").get<std::string>()},
                                   {"trajectory", traj}})};
  CHECK(judge.call(r4).parsed_json->at("is_valid") == true);
}

namespace {

struct StubServer {
  httplib::Server server;
  int port = 0;
  std::thread thread;

  explicit StubServer(httplib::Server::Handler handler) {
    server.Post("/v1/chat/completions", std::move(handler));
    port = server.bind_to_any_port("127.0.0.1");
    thread = std::thread([this] { server.listen_after_bind(); });
    server.wait_until_ready();
  }
  ~StubServer() {
    server.stop();
    thread.join();
  }
  std::string url() const { return "http://127.0.0.1:" + std::to_string(port) + "/v1/chat/completions"; }
};

std::string completion(const std::string& content) {
  return nlohmann::json{{"choices", {{{"message", {{"role", "assistant"}, {"content", content}}}}}}}.dump();
}

}  // namespace

TEST_CASE("http judge retries 429 and returns the body unchanged") {
  setenv("AGENTHER_TEST_KEY", "secret-token", 1);
  log::set_level(log::Level::kOff);
  std::atomic<int> hits{0};
  std::string seen_auth;
  nlohmann::json seen_body;
  const std::string content = "{\"is_valid\": true, \"confidence\": 0.91,  \"rejection_reason_if_any\": \"\"}";
  StubServer stub([&](const httplib::Request& req, httplib::Response& res) {
    if (++hits <= 2) {
      res.status = 429;
      return;
    }
    seen_auth = req.get_header_value("Authorization");
    seen_body = nlohmann::json::parse(req.body);
    res.set_content(completion(content), "application/json");
  });

  HttpJudgeConfig cfg;
  cfg.endpoint = stub.url();
  cfg.api_key_env = "AGENTHER_TEST_KEY";
  cfg.model = "judge-model";
  std::vector<std::chrono::milliseconds> sleeps;
  HttpJudge judge(cfg, [&](std::chrono::milliseconds d) { sleeps.push_back(d); });
  JudgeRequest req{TemplateId::kSecondJudge, "PROMPT", 0.0};
  const auto resp = judge.call(req);
  CHECK(resp.attempt == 3);
  CHECK(hits == 3);
  CHECK(resp.raw_text == content);
  CHECK(resp.parsed_json->at("confidence") == 0.91);
  CHECK(sleeps.size() == 2);
  CHECK(seen_auth == "Bearer secret-token");
  CHECK(seen_body["model"] == "judge-model");
  CHECK(seen_body["temperature"] == 0.0);
  CHECK(seen_body["messages"][0]["role"] == "system");
  CHECK(seen_body["messages"][1]["content"] == "PROMPT");
  log::set_level(log::Level::kWarn);
}

TEST_CASE("http judge respects the retry budget") {
  setenv("AGENTHER_TEST_KEY", "k", 1);
  log::set_level(log::Level::kOff);
  std::atomic<int> hits{0};
  StubServer stub([&](const httplib::Request&, httplib::Response& res) {
    ++hits;
    res.status = 503;
  });
  HttpJudgeConfig cfg;
  cfg.endpoint = stub.url();
  cfg.api_key_env = "AGENTHER_TEST_KEY";
  cfg.retry_budget = 2;
  HttpJudge judge(cfg, [](std::chrono::milliseconds) {});
  CHECK_THROWS_AS(judge.call(JudgeRequest{TemplateId::kStage1, "p"}), TransportError);
  CHECK(hits == 3);
  log::set_level(log::Level::kWarn);
}

TEST_CASE("http judge auth failures") {
  HttpJudgeConfig cfg;
  cfg.api_key_env = "AGENTHER_SURELY_UNSET_KEY";
  unsetenv("AGENTHER_SURELY_UNSET_KEY");
  HttpJudge judge(cfg, [](std::chrono::milliseconds) {});
  CHECK_THROWS_AS(judge.call(JudgeRequest{TemplateId::kStage1, "p"}), AuthError);

  setenv("AGENTHER_TEST_KEY", "k", 1);
  StubServer stub([](const httplib::Request&, httplib::Response& res) { res.status = 401; });
  cfg.endpoint = stub.url();
  cfg.api_key_env = "AGENTHER_TEST_KEY";
  HttpJudge denied(cfg, [](std::chrono::milliseconds) {});
  CHECK_THROWS_AS(denied.call(JudgeRequest{TemplateId::kStage1, "p"}), AuthError);
}

TEST_CASE("backoff grows and is capped") {
  HttpJudgeConfig cfg;
  cfg.backoff_base = std::chrono::milliseconds(100);
  cfg.backoff_max = std::chrono::milliseconds(1000);
  HttpJudge judge(cfg);
  // Jitter keeps each delay within [d/2, d].
  CHECK(judge.backoff_delay(1).count() >= 50);
  CHECK(judge.backoff_delay(1).count() <= 100);
  CHECK(judge.backoff_delay(4).count() >= 400);
  CHECK(judge.backoff_delay(4).count() <= 800);
  for (int r = 1; r < 12; ++r) CHECK(judge.backoff_delay(r).count() <= 1000);
}

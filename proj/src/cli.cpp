#include "agenther/cli.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <set>
#include <sstream>

#include "CLI11.hpp"
#include "agenther/analysis.hpp"
#include "agenther/augmenter.hpp"
#include "agenther/errors.hpp"
#include "agenther/judge.hpp"
#include "agenther/log.hpp"
#include "agenther/pipeline.hpp"
#include "agenther/render.hpp"
#include "agenther/rule_proxy_judge.hpp"
#include "agenther/synthetic.hpp"
#include "agenther/text.hpp"

namespace agenther::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// ---------------------------------------------------------------------------
// small file helpers

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw DataError("cannot open " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& p, const std::string& contents) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot open " + p.string() + " for writing");
  out << contents;
  if (!out) throw DataError("write failed: " + p.string());
}

void append_file(const fs::path& p, const std::string& contents) {
  std::ofstream out(p, std::ios::binary | std::ios::app);
  if (!out) throw DataError("cannot open " + p.string() + " for writing");
  out << contents;
}

std::vector<TrajectoryResult> read_results(const fs::path& p) {
  std::vector<TrajectoryResult> out;
  std::istringstream in(read_file(p));
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (text::trim(line).empty()) continue;
    const json j = json::parse(line, nullptr, false);
    if (j.is_discarded()) throw agenther::ParseError(p.string() + ": invalid JSON", line_no, 0);
    out.push_back(result_from_json(j));
  }
  return out;
}

// One goal per non-empty line.
std::vector<std::string> read_goal_lines(const fs::path& p) {
  std::vector<std::string> goals;
  std::istringstream in(read_file(p));
  std::string line;
  while (std::getline(in, line)) {
    const auto t = text::trim(line);
    if (!t.empty()) goals.emplace_back(t);
  }
  return goals;
}

std::vector<std::string> accepted_goals(const fs::path& decisions) {
  std::vector<std::string> goals;
  for (const auto& r : read_results(decisions)) {
    if (r.status == TrajectoryStatus::kAccepted) goals.push_back(r.decision->hindsight_prompt);
  }
  return goals;
}

std::map<std::string, std::size_t> index_by_id(const std::vector<Trajectory>& corpus) {
  std::map<std::string, std::size_t> m;
  for (std::size_t i = 0; i < corpus.size(); ++i) m[corpus[i].id] = i;
  return m;
}

std::vector<AcceptedExample> accepted_from(const std::vector<TrajectoryResult>& results,
                                           const std::vector<Trajectory>& corpus) {
  const auto ids = index_by_id(corpus);
  std::vector<AcceptedExample> out;
  for (const auto& r : results) {
    if (r.status != TrajectoryStatus::kAccepted) continue;
    auto it = ids.find(r.id);
    if (it == ids.end()) throw DataError("decision for '" + r.id + "' has no trajectory in the corpus");
    out.push_back({corpus[it->second], *r.assessment, *r.decision});
  }
  return out;
}

std::vector<OutputFormat> parse_formats(const std::vector<std::string>& names) {
  std::vector<OutputFormat> out;
  for (const auto& n : names) {
    const OutputFormat f = parse_output_format(n);
    if (std::find(out.begin(), out.end(), f) == out.end()) out.push_back(f);
  }
  return out;
}

void emit_all(const std::vector<AcceptedExample>& accepted, const std::vector<OutputFormat>& formats,
              const fs::path& dir, double beta) {
  for (OutputFormat f : formats) emit_dataset(accepted, f, dir / default_file_name(f), beta);
}

// ---------------------------------------------------------------------------
// relabel

struct RelabelArgs {
  std::string input;
  std::string output_dir;
  double theta = 0.5;
  double delta = 0.3;
  int max_retries = 3;
  bool multi_judge = true;
  std::string stage1_mode = "rule";
  std::string stage2_mode = "rule";
  std::string judge = "mock";
  std::string transcript;
  std::string record_transcript;
  std::string lexicon;
  std::uint64_t seed = 42;
  int concurrency = 1;
  std::vector<std::string> formats{"sft", "dpo", "sharegpt"};
  double beta = kDefaultDpoBeta;
  bool resume = false;
  std::size_t chunk = 256;
  HttpJudgeConfig http;
  int timeout_ms = 60000;
};

int cmd_relabel(const RelabelArgs& a, std::ostream& out, std::ostream& err) {
  PipelineConfig cfg;
  cfg.theta = a.theta;
  cfg.delta = a.delta;
  cfg.max_retries = a.max_retries;
  cfg.multi_judge = a.multi_judge;
  cfg.stage1_mode = parse_stage_mode(a.stage1_mode);
  cfg.stage2_mode = parse_stage_mode(a.stage2_mode);
  cfg.concurrency = a.concurrency;
  cfg.seed = a.seed;
  cfg.validate();
  if (a.judge == "scripted" && a.transcript.empty()) throw ConfigError("--judge scripted needs --transcript");
  if (a.chunk == 0) throw ConfigError("--chunk must be >= 1");
  const auto formats = parse_formats(a.formats);
  if (!(a.beta > 0.0)) throw ConfigError("--beta must be positive");

  const std::vector<Trajectory> corpus = read_corpus(a.input);
  const Lexicon lexicon = a.lexicon.empty() ? default_lexicon() : Lexicon::load(a.lexicon);

  std::unique_ptr<JudgeBackend> backend;
  if (a.judge == "mock") {
    backend = std::make_unique<MockJudge>(a.seed);
  } else if (a.judge == "scripted") {
    backend = std::make_unique<ScriptedJudge>(Transcript::load(a.transcript));
  } else if (a.judge == "rule-proxy") {
    backend = std::make_unique<RuleProxyJudge>(lexicon);
  } else {
    HttpJudgeConfig hc = a.http;
    hc.timeout = std::chrono::milliseconds(a.timeout_ms);
    hc.jitter_seed = a.seed;
    backend = std::make_unique<HttpJudge>(hc);
  }
  std::unique_ptr<RecordingJudge> recorder;
  JudgeBackend* judge = backend.get();
  if (!a.record_transcript.empty()) {
    recorder = std::make_unique<RecordingJudge>(*backend);
    judge = recorder.get();
  }

  const fs::path dir(a.output_dir);
  fs::create_directories(dir);
  const fs::path decisions_path = dir / "decisions.jsonl";
  const fs::path checkpoint_path = dir / "checkpoint.txt";

  std::vector<TrajectoryResult> prior;
  if (a.resume && fs::exists(decisions_path)) prior = read_results(decisions_path);
  const auto ids = index_by_id(corpus);
  std::set<std::string> done;
  for (auto& r : prior) {
    auto it = ids.find(r.id);
    if (it == ids.end()) throw DataError("checkpointed id '" + r.id + "' is not in the corpus");
    r.index = it->second;
    done.insert(r.id);
  }
  if (!a.resume) {
    write_file(decisions_path, "");
    write_file(checkpoint_path, "");
  } else if (!prior.empty()) {
    log::info("resuming: " + std::to_string(prior.size()) + " trajectories already processed");
  }

  std::vector<std::size_t> todo;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    if (!done.count(corpus[i].id)) todo.push_back(i);
  }

  std::vector<std::optional<TrajectoryResult>> slots(corpus.size());
  for (auto& r : prior) slots[r.index] = std::move(r);
  // Chunks are appended to the decisions file and checkpoint as they
  // finish, so an interrupted run can pick up where it stopped.
  for (std::size_t start = 0; start < todo.size(); start += a.chunk) {
    const std::size_t end = std::min(todo.size(), start + a.chunk);
    std::vector<Trajectory> batch;
    for (std::size_t i = start; i < end; ++i) batch.push_back(corpus[todo[i]]);
    PipelineResult pr = run_pipeline(batch, cfg, *judge, lexicon);
    std::string lines;
    std::string ckpt;
    for (auto& r : pr.results) {
      r.index = todo[start + r.index];
      lines += to_json(r).dump() + "\n";
      ckpt += r.id + "\n";
      slots[r.index] = std::move(r);
    }
    append_file(decisions_path, lines);
    append_file(checkpoint_path, ckpt);
  }

  std::vector<TrajectoryResult> results;
  RunStats stats;
  std::string rejects;
  for (auto& s : slots) {
    stats.record(*s);
    if (s->status != TrajectoryStatus::kAccepted) {
      json j = {{"trajectory_id", s->id}, {"status", to_string(s->status)}, {"reason", s->reason}};
      if (!s->error.empty()) j["error"] = s->error;
      rejects += j.dump() + "\n";
    }
    results.push_back(std::move(*s));
  }
  write_file(dir / "rejects.jsonl", rejects);
  emit_all(accepted_from(results, corpus), formats, dir, a.beta);
  write_file(dir / "stats.json", stats.to_json().dump(2) + "\n");
  if (recorder) recorder->transcript().save(a.record_transcript);

  out << stats.to_json().dump(2) << "\n";
  err << stats.table();
  if (stats.relabel_attempted > 0 && stats.accepted == 0 &&
      stats.rejected_with_error == stats.relabel_attempted) {
    err << "error: every judge call failed; no trajectory was completed\n";
    return kBackend;
  }
  return kOk;
}

// ---------------------------------------------------------------------------
// pack

struct PackArgs {
  std::string input;
  std::string decisions;
  std::string output_dir;
  std::vector<std::string> formats{"sft", "dpo", "sharegpt"};
  double beta = kDefaultDpoBeta;
};

int cmd_pack(const PackArgs& a, std::ostream& out, std::ostream&) {
  const auto formats = parse_formats(a.formats);
  if (!(a.beta > 0.0)) throw ConfigError("--beta must be positive");
  const auto corpus = read_corpus(a.input);
  const auto accepted = accepted_from(read_results(a.decisions), corpus);
  fs::create_directories(a.output_dir);
  emit_all(accepted, formats, a.output_dir, a.beta);
  json files = json::array();
  for (OutputFormat f : formats) files.push_back((fs::path(a.output_dir) / default_file_name(f)).string());
  out << json{{"records", accepted.size()}, {"files", files}}.dump(2) << "\n";
  return kOk;
}

// ---------------------------------------------------------------------------
// synth

struct SynthArgs {
  std::size_t n = 0;
  std::uint64_t seed = 42;
  std::string mix;
  std::string output_dir;
  bool oracle_transcript = false;
  double noise = 0.0;
  double corruption = 0.3;
  int max_retries = 3;
};

int cmd_synth(const SynthArgs& a, std::ostream& out, std::ostream&) {
  const TypeMix mix = a.mix.empty() ? uniform_type_mix() : parse_type_mix(a.mix);
  const SyntheticCorpus sc = generate_corpus(a.n, a.seed, mix);
  const fs::path dir(a.output_dir);
  fs::create_directories(dir);
  write_file(dir / "corpus.jsonl", serialize_corpus(sc.trajectories));
  write_tasks(sc.tasks, dir / "tasks.jsonl");
  json counts = json::object();
  for (FailureType t : kAllFailureTypes) counts[to_string(t)] = 0;
  for (const auto& t : sc.tasks) counts[to_string(t.planted_failure_type)] = counts[to_string(t.planted_failure_type)].get<int>() + 1;
  json report = {{"trajectories", sc.trajectories.size()},
                 {"planted_failure_types", counts},
                 {"corpus", (dir / "corpus.jsonl").string()},
                 {"tasks", (dir / "tasks.jsonl").string()}};
  if (a.oracle_transcript) {
    PipelineConfig cfg;
    cfg.max_retries = a.max_retries;
    cfg.validate();
    const Transcript t = build_oracle_transcript(sc, cfg, {a.noise, a.corruption, a.seed});
    t.save(dir / "oracle_transcript.jsonl");
    report["oracle_transcript"] = (dir / "oracle_transcript.jsonl").string();
    report["transcript_entries"] = t.size();
  }
  out << report.dump(2) << "\n";
  return kOk;
}

// ---------------------------------------------------------------------------
// score / stats

struct ScoreArgs {
  std::string decisions;
  std::string tasks;
};

int cmd_score(const ScoreArgs& a, std::ostream& out, std::ostream& err) {
  const ScoreReport rep = score_pipeline(scored_decisions(read_results(a.decisions)), read_tasks(a.tasks));
  out << rep.to_json().dump(2) << "\n";
  err << rep.table();
  return kOk;
}

struct StatsArgs {
  std::string decisions;
  std::optional<std::size_t> accepted;
  std::optional<std::size_t> total;
};

int cmd_stats(const StatsArgs& a, std::ostream& out, std::ostream& err) {
  if (!a.decisions.empty()) {
    if (a.accepted || a.total) throw ConfigError("--decisions cannot be combined with --accepted/--total");
    RunStats s;
    for (const auto& r : read_results(a.decisions)) s.record(r);
    json j = s.to_json();
    j["acceptance_percent"] = format_percent(s.accepted, s.total);
    out << j.dump(2) << "\n";
    err << s.table();
    return kOk;
  }
  if (!a.accepted || !a.total) throw ConfigError("give --decisions, or both --accepted and --total");
  if (*a.accepted > *a.total) throw ConfigError("--accepted exceeds --total");
  RunStats s;
  s.total = *a.total;
  s.accepted = *a.accepted;
  out << json{{"accepted", s.accepted},
              {"total", s.total},
              {"acceptance_rate", s.acceptance_rate()},
              {"acceptance_percent", format_percent(s.accepted, s.total)}}
             .dump(2)
      << "\n";
  err << "acceptance rate " << format_percent(s.accepted, s.total) << "%\n";
  return kOk;
}

// ---------------------------------------------------------------------------
// analysis commands

std::vector<std::vector<int>> read_matrix(const fs::path& p) {
  const json j = json::parse(read_file(p), nullptr, false);
  if (j.is_discarded() || !j.is_array()) throw DataError(p.string() + ": expected a JSON array of count rows");
  try {
    return j.get<std::vector<std::vector<int>>>();
  } catch (const json::exception& e) {
    throw DataError(p.string() + ": " + e.what());
  }
}

json bound_json(const NoiseBound& b, double p, double delta, double eps) {
  return {{"precision", p},
          {"delta_perfect", delta},
          {"epsilon", eps},
          {"lower_bound", b.lower_bound},
          {"max_harm_multiplier", b.max_harm_multiplier},
          {"positive", b.positive}};
}

struct BoundArgs {
  double precision = 0.0;
  double delta_perfect = 0.0;
  double epsilon = 0.0;
};

int cmd_bound(const BoundArgs& a, std::ostream& out, std::ostream& err) {
  const NoiseBound b = noise_bound(a.precision, a.delta_perfect, a.epsilon);
  out << bound_json(b, a.precision, a.delta_perfect, a.epsilon).dump(2) << "\n";
  char buf[160];
  std::snprintf(buf, sizeof(buf), "max harm multiplier %.3f; lower bound %.6g (%s)\n", b.max_harm_multiplier,
                b.lower_bound, b.positive ? "positive" : "not positive");
  err << buf;
  return kOk;
}

struct KappaArgs {
  std::string matrix;
};

int cmd_kappa(const KappaArgs& a, std::ostream& out, std::ostream&) {
  const double k = fleiss_kappa(read_matrix(a.matrix));
  out << json{{"kappa", k}}.dump() << "\n";
  return kOk;
}

struct AnalyzeArgs {
  std::string decisions;
  std::string goals;
  std::string compare_decisions;
  std::string compare_goals;
  std::size_t k = kDefaultClusters;
  std::uint64_t seed = 42;
  std::size_t dim = 256;
  std::string kappa_matrix;
  std::optional<double> precision;
  double delta_perfect = 0.0;
  double epsilon = 0.0;
};

int cmd_analyze(const AnalyzeArgs& a, std::ostream& out, std::ostream& err) {
  if (a.decisions.empty() == a.goals.empty()) throw ConfigError("give exactly one of --decisions or --goals");
  if (!a.compare_decisions.empty() && !a.compare_goals.empty()) {
    throw ConfigError("give at most one of --compare-decisions or --compare-goals");
  }
  if (a.dim == 0) throw ConfigError("--dim must be >= 1");
  const auto goals = a.decisions.empty() ? read_goal_lines(a.goals) : accepted_goals(a.decisions);
  const HashedBowEmbedder embedder(a.dim, a.seed);
  json report = {{"goals", goals.size()}, {"k", a.k}, {"jsd", nullptr}, {"kappa", nullptr}, {"bound", nullptr}};

  std::vector<std::string> other;
  if (!a.compare_decisions.empty()) other = accepted_goals(a.compare_decisions);
  if (!a.compare_goals.empty()) other = read_goal_lines(a.compare_goals);
  if (!a.compare_decisions.empty() || !a.compare_goals.empty()) {
    const GoalSetComparison c = compare_goal_sets(goals, other, a.k, embedder, a.seed);
    report["entropy"] = c.a.entropy_nats;
    report["coverage"] = c.a.coverage;
    report["compare"] = {{"goals", other.size()}, {"entropy", c.b.entropy_nats}, {"coverage", c.b.coverage}};
    report["jsd"] = c.jsd_nats;
  } else {
    const GoalDistribution d = cluster_goals(goals, a.k, embedder, a.seed);
    report["entropy"] = d.entropy_nats;
    report["coverage"] = d.coverage;
  }
  if (!a.kappa_matrix.empty()) report["kappa"] = fleiss_kappa(read_matrix(a.kappa_matrix));
  if (a.precision) {
    report["bound"] = bound_json(noise_bound(*a.precision, a.delta_perfect, a.epsilon), *a.precision,
                                 a.delta_perfect, a.epsilon);
  }
  out << report.dump(2) << "\n";
  err << "entropy " << report["entropy"].get<double>() << " nats, coverage " << report["coverage"].get<std::size_t>()
      << "/" << a.k << "\n";
  return kOk;
}

struct ReviewArgs {
  std::string input;
  std::string decisions;
  std::size_t n = 200;
  std::uint64_t seed = 42;
  std::string output;
};

int cmd_sample_review(const ReviewArgs& a, std::ostream& out, std::ostream&) {
  const auto corpus = read_corpus(a.input);
  std::vector<ReviewItem> pool;
  for (const auto& ex : accepted_from(read_results(a.decisions), corpus)) {
    pool.push_back({ex.trajectory.id, trajectory_text(ex.trajectory), ex.decision.hindsight_prompt});
  }
  std::string lines;
  for (const auto& item : sample_for_review(pool, a.n, a.seed)) lines += to_json(item).dump() + "\n";
  if (a.output.empty()) {
    out << lines;
  } else {
    write_file(a.output, lines);
  }
  return kOk;
}

// CLI11 only reads config files for the top-level app, so subcommands take
// a plain path and apply it after parsing.
void add_config(CLI::App* sub, std::map<const CLI::App*, std::string>& paths) {
  sub->add_option("--config", paths[sub], "key=value file; flags given on the command line win")
      ->check(CLI::ExistingFile);
}

void apply_config(CLI::App* sub, const std::string& path) {
  for (const auto& item : CLI::ConfigINI().from_file(path)) {
    if (item.name == "++" || item.name == "--") continue;  // section markers
    const std::string key = item.parents.empty() ? item.name : item.parents.back() + "." + item.name;
    CLI::Option* opt = sub->get_option_no_throw("--" + item.name);
    if (!item.parents.empty() && item.parents.back() != sub->get_name()) opt = nullptr;
    if (opt == nullptr || opt->get_single_name() == "config") {
      throw CLI::ConfigError::Extras(path + ": unknown key " + key);
    }
    if (opt->count() > 0) continue;
    opt->add_result(item.inputs);
    opt->run_callback();
  }
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Turns failed agent trajectories into hindsight-relabeled training data.", "agenther"};
  app.require_subcommand(1);
  std::string log_level = "warn";
  app.add_option("--log-level", log_level, "debug|info|warn|error|off")
      ->check(CLI::IsMember({"debug", "info", "warn", "error", "off"}));

  std::map<const CLI::App*, std::string> config_paths;
  RelabelArgs ra;
  auto* relabel = app.add_subcommand("relabel", "Run the relabeling pipeline over a failed-trajectory corpus");
  add_config(relabel, config_paths);
  relabel->add_option("--input", ra.input, "failed-trajectory JSONL")->required()->check(CLI::ExistingFile);
  relabel->add_option("--output-dir", ra.output_dir, "directory for datasets, decisions and stats")->required();
  relabel->add_option("--theta", ra.theta, "judge confidence gate")->capture_default_str()->check(CLI::Range(0.0, 1.0));
  relabel->add_option("--delta", ra.delta, "severity weight gate")->capture_default_str()->check(CLI::Range(0.0, 1.0));
  relabel->add_option("--max-retries", ra.max_retries, "relabel attempts K")->capture_default_str()->check(CLI::PositiveNumber);
  relabel->add_option("--multi-judge", ra.multi_judge, "require a second judge (true|false)")->capture_default_str();
  relabel->add_option("--stage1-mode", ra.stage1_mode, "rule|judge")->capture_default_str()->check(CLI::IsMember({"rule", "judge"}));
  relabel->add_option("--stage2-mode", ra.stage2_mode, "rule|judge")->capture_default_str()->check(CLI::IsMember({"rule", "judge"}));
  relabel->add_option("--judge", ra.judge, "mock|scripted|rule-proxy|http")
      ->capture_default_str()
      ->check(CLI::IsMember({"mock", "scripted", "rule-proxy", "http"}));
  relabel->add_option("--transcript", ra.transcript, "transcript JSONL for --judge scripted");
  relabel->add_option("--record-transcript", ra.record_transcript, "save every judge answer to this JSONL file");
  relabel->add_option("--lexicon", ra.lexicon, "rule-mode lexicon JSON")->check(CLI::ExistingFile);
  relabel->add_option("--seed", ra.seed, "mock judge seed and jitter seed")->capture_default_str();
  relabel->add_option("--concurrency", ra.concurrency, "worker threads")->capture_default_str()->check(CLI::Range(1, 256));
  relabel->add_option("--format", ra.formats, "output formats: sft dpo sharegpt")
      ->capture_default_str()
      ->delimiter(',')
      ->check(CLI::IsMember({"sft", "dpo", "sharegpt"}));
  relabel->add_option("--beta", ra.beta, "DPO beta written to dpo.jsonl")->capture_default_str();
  relabel->add_flag("--resume", ra.resume, "skip trajectories already in decisions.jsonl");
  relabel->add_option("--chunk", ra.chunk, "trajectories per checkpoint")->capture_default_str();
  relabel->add_option("--endpoint", ra.http.endpoint, "chat-completion URL")->capture_default_str();
  relabel->add_option("--model", ra.http.model, "judge model name")->capture_default_str();
  relabel->add_option("--api-key-env", ra.http.api_key_env, "env var holding the API key")->capture_default_str();
  relabel->add_option("--timeout-ms", ra.timeout_ms, "HTTP timeout")->capture_default_str()->check(CLI::PositiveNumber);
  relabel->add_option("--retry-budget", ra.http.retry_budget, "HTTP retries after the first attempt")
      ->capture_default_str()
      ->check(CLI::NonNegativeNumber);
  relabel->add_option("--max-in-flight", ra.http.max_in_flight, "concurrent HTTP requests")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);

  PackArgs pa;
  auto* pack = app.add_subcommand("pack", "Write datasets from an existing decisions file");
  add_config(pack, config_paths);
  pack->add_option("--input", pa.input, "failed-trajectory JSONL")->required()->check(CLI::ExistingFile);
  pack->add_option("--decisions", pa.decisions, "decisions.jsonl from relabel")->required()->check(CLI::ExistingFile);
  pack->add_option("--output-dir", pa.output_dir, "output directory")->required();
  pack->add_option("--format", pa.formats, "output formats: sft dpo sharegpt")
      ->capture_default_str()
      ->delimiter(',')
      ->check(CLI::IsMember({"sft", "dpo", "sharegpt"}));
  pack->add_option("--beta", pa.beta, "DPO beta")->capture_default_str();

  SynthArgs sa;
  auto* synth = app.add_subcommand("synth", "Generate a synthetic failed corpus with ground truth");
  add_config(synth, config_paths);
  synth->add_option("--n", sa.n, "number of trajectories")->required();
  synth->add_option("--seed", sa.seed, "generator seed")->capture_default_str();
  synth->add_option("--mix", sa.mix, "failure type mix, e.g. incomplete:0.35,constraint_violation:0.28");
  synth->add_option("--output-dir", sa.output_dir, "writes corpus.jsonl and tasks.jsonl")->required();
  synth->add_flag("--oracle-transcript", sa.oracle_transcript, "also write oracle_transcript.jsonl");
  synth->add_option("--noise", sa.noise, "verdict flip probability")->capture_default_str()->check(CLI::Range(0.0, 1.0));
  synth->add_option("--corruption", sa.corruption, "share of corrupted proposals")
      ->capture_default_str()
      ->check(CLI::Range(0.0, 1.0));
  synth->add_option("--max-retries", sa.max_retries, "attempts covered by the transcript")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);

  ScoreArgs sca;
  auto* score = app.add_subcommand("score", "Precision and recall of decisions against synthetic ground truth");
  add_config(score, config_paths);
  score->add_option("--decisions", sca.decisions, "decisions.jsonl")->required()->check(CLI::ExistingFile);
  score->add_option("--tasks", sca.tasks, "tasks.jsonl from synth")->required()->check(CLI::ExistingFile);

  AnalyzeArgs aa;
  auto* analyze = app.add_subcommand("analyze", "Goal entropy, cluster coverage and divergence");
  add_config(analyze, config_paths);
  analyze->add_option("--decisions", aa.decisions, "use accepted hindsight goals")->check(CLI::ExistingFile);
  analyze->add_option("--goals", aa.goals, "plain text, one goal per line")->check(CLI::ExistingFile);
  analyze->add_option("--compare-decisions", aa.compare_decisions, "second goal set for divergence")
      ->check(CLI::ExistingFile);
  analyze->add_option("--compare-goals", aa.compare_goals, "second goal set, one per line")->check(CLI::ExistingFile);
  analyze->add_option("--k", aa.k, "clusters")->capture_default_str()->check(CLI::PositiveNumber);
  analyze->add_option("--seed", aa.seed, "clustering seed")->capture_default_str();
  analyze->add_option("--dim", aa.dim, "embedding dimension")->capture_default_str();
  analyze->add_option("--kappa-matrix", aa.kappa_matrix, "vote counts to include kappa")->check(CLI::ExistingFile);
  analyze->add_option("--precision", aa.precision, "judge precision to include the bound");
  analyze->add_option("--delta-perfect", aa.delta_perfect, "gain with a perfect judge")->capture_default_str();
  analyze->add_option("--epsilon", aa.epsilon, "harm per invalid example")->capture_default_str();

  BoundArgs ba;
  auto* bound = app.add_subcommand("bound", "Noise-robustness lower bound");
  add_config(bound, config_paths);
  bound->add_option("--precision", ba.precision, "judge precision p in (0, 1)")->required();
  bound->add_option("--delta-perfect", ba.delta_perfect, "gain with a perfect judge")->capture_default_str();
  bound->add_option("--epsilon", ba.epsilon, "harm per invalid example")->capture_default_str();

  KappaArgs ka;
  auto* kappa = app.add_subcommand("kappa", "Fleiss' kappa of a vote-count matrix");
  add_config(kappa, config_paths);
  kappa->add_option("--matrix", ka.matrix, "JSON array of per-item category counts")->required()->check(CLI::ExistingFile);

  ReviewArgs rva;
  auto* review = app.add_subcommand("sample-review", "Sample accepted relabelings for human review");
  add_config(review, config_paths);
  review->add_option("--input", rva.input, "failed-trajectory JSONL")->required()->check(CLI::ExistingFile);
  review->add_option("--decisions", rva.decisions, "decisions.jsonl")->required()->check(CLI::ExistingFile);
  review->add_option("--n", rva.n, "sample size")->capture_default_str();
  review->add_option("--seed", rva.seed, "sampling seed")->capture_default_str();
  review->add_option("--output", rva.output, "JSONL file (default stdout)");

  StatsArgs sta;
  auto* stats = app.add_subcommand("stats", "Run statistics from a decisions file, or a bare rate");
  add_config(stats, config_paths);
  stats->add_option("--decisions", sta.decisions, "decisions.jsonl")->check(CLI::ExistingFile);
  stats->add_option("--accepted", sta.accepted, "accepted count");
  stats->add_option("--total", sta.total, "total count");

  try {
    app.parse(argc, argv);
    for (CLI::App* sub : app.get_subcommands()) {
      if (!config_paths[sub].empty()) apply_config(sub, config_paths[sub]);
    }
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsage;
  }

  static const std::map<std::string, log::Level> kLevels = {{"debug", log::Level::kDebug},
                                                             {"info", log::Level::kInfo},
                                                             {"warn", log::Level::kWarn},
                                                             {"error", log::Level::kError},
                                                             {"off", log::Level::kOff}};
  log::set_level(kLevels.at(log_level));

  try {
    if (relabel->parsed()) return cmd_relabel(ra, out, err);
    if (pack->parsed()) return cmd_pack(pa, out, err);
    if (synth->parsed()) return cmd_synth(sa, out, err);
    if (score->parsed()) return cmd_score(sca, out, err);
    if (analyze->parsed()) return cmd_analyze(aa, out, err);
    if (bound->parsed()) return cmd_bound(ba, out, err);
    if (kappa->parsed()) return cmd_kappa(ka, out, err);
    if (review->parsed()) return cmd_sample_review(rva, out, err);
    if (stats->parsed()) return cmd_stats(sta, out, err);
  } catch (const DataError& e) {
    err << "data error: " << e.what() << "\n";
    return kData;
  } catch (const BackendError& e) {
    err << "backend error: " << e.what() << "\n";
    return kBackend;
  } catch (const std::invalid_argument& e) {
    err << "usage error: " << e.what() << "\n";
    return kUsage;
  } catch (const json::exception& e) {
    err << "data error: " << e.what() << "\n";
    return kData;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kData;
  }
  return kUsage;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  std::vector<const char*> argv;
  argv.reserve(args.size());
  for (const auto& a : args) argv.push_back(a.c_str());
  return run(static_cast<int>(argv.size()), argv.data(), out, err);
}

}  // namespace agenther::cli

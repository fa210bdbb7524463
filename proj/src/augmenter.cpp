#include "agenther/augmenter.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

#include "agenther/errors.hpp"
#include "agenther/render.hpp"

namespace agenther {

using nlohmann::json;

namespace {

void check_weight(double weight) {
  if (!(weight > 0.0 && weight <= 1.0)) {
    throw std::invalid_argument("weight must be in (0, 1], got " + std::to_string(weight));
  }
}

}  // namespace

std::string reconstruct_response(const Trajectory& traj) {
  std::string out;
  std::string final_answer;
  for (const Step& s : traj.steps) {
    if (!out.empty()) out += '\n';
    out += "Thought: " + s.thought + "\nAction: " + s.action;
    if (!s.observation.empty()) final_answer = s.observation;
  }
  out += "\nFinal answer: " + final_answer;
  return out;
}

SftRecord pack_sft(const std::string& goal, const Trajectory& traj, double weight) {
  check_weight(weight);
  return SftRecord{{{"user", goal}, {"assistant", reconstruct_response(traj)}}, weight};
}

DpoRecord pack_dpo(const std::string& hindsight_goal, const std::string& original_goal, const Trajectory& traj,
                   double weight, double beta) {
  check_weight(weight);
  if (!(beta > 0.0) || !std::isfinite(beta)) throw std::invalid_argument("beta must be positive");
  if (hindsight_goal == original_goal) {
    throw DataError("DPO record for '" + traj.id + "': chosen and rejected goals are identical");
  }
  return DpoRecord{hindsight_goal, original_goal, trajectory_text(traj), weight, beta};
}

ShareGptRecord pack_sharegpt(const std::string& goal, const Trajectory& traj) {
  ShareGptRecord r;
  r.conversations.push_back({"human", goal});
  for (auto& turn : trajectory_turns(traj)) {
    r.conversations.push_back({turn.role == TurnRole::kHuman ? "human" : "gpt", std::move(turn.text)});
  }
  return r;
}

json to_json(const SftRecord& r) {
  json messages = json::array();
  for (const auto& m : r.messages) messages.push_back({{"role", m.role}, {"content", m.content}});
  return {{"messages", std::move(messages)}, {"weight", r.weight}};
}

json to_json(const DpoRecord& r) {
  return {{"prompt_chosen", r.chosen_goal},
          {"prompt_rejected", r.rejected_goal},
          {"trajectory", r.trajectory_text},
          {"weight", r.weight},
          {"beta", r.beta}};
}

json to_json(const ShareGptRecord& r) {
  json conv = json::array();
  for (const auto& t : r.conversations) conv.push_back({{"from", t.from}, {"value", t.value}});
  return {{"conversations", std::move(conv)}};
}

SftRecord sft_from_json(const json& j) {
  SftRecord r;
  for (const auto& m : j.at("messages")) {
    r.messages.push_back({m.at("role").get<std::string>(), m.at("content").get<std::string>()});
  }
  r.weight = j.at("weight").get<double>();
  if (r.messages.size() != 2 || r.messages[0].role != "user" || r.messages[1].role != "assistant") {
    throw DataError("SFT record must be exactly [user, assistant]");
  }
  return r;
}

DpoRecord dpo_from_json(const json& j) {
  return DpoRecord{j.at("prompt_chosen").get<std::string>(), j.at("prompt_rejected").get<std::string>(),
                   j.at("trajectory").get<std::string>(), j.at("weight").get<double>(),
                   j.at("beta").get<double>()};
}

ShareGptRecord sharegpt_from_json(const json& j) {
  ShareGptRecord r;
  for (const auto& t : j.at("conversations")) {
    r.conversations.push_back({t.at("from").get<std::string>(), t.at("value").get<std::string>()});
  }
  return r;
}

double softplus(double z) {
  if (z > 0.0) return z + std::log1p(std::exp(-z));
  return std::log1p(std::exp(z));
}

double dpo_loss(double logp_chosen_policy, double logp_chosen_ref, double logp_rejected_policy,
                double logp_rejected_ref, double beta, double weight) {
  for (double v : {logp_chosen_policy, logp_chosen_ref, logp_rejected_policy, logp_rejected_ref, beta, weight}) {
    if (!std::isfinite(v)) throw std::invalid_argument("dpo_loss: non-finite input");
  }
  if (!(beta > 0.0)) throw std::invalid_argument("dpo_loss: beta must be positive");
  check_weight(weight);
  const double margin = (logp_chosen_policy - logp_chosen_ref) - (logp_rejected_policy - logp_rejected_ref);
  // -log sigmoid(x) == softplus(-x)
  const double unweighted = softplus(-(beta * margin));
  return weight * unweighted;
}

std::string to_string(OutputFormat f) {
  switch (f) {
    case OutputFormat::kSft: return "sft";
    case OutputFormat::kDpo: return "dpo";
    case OutputFormat::kShareGpt: return "sharegpt";
  }
  return "unknown";
}

OutputFormat parse_output_format(std::string_view s) {
  if (s == "sft") return OutputFormat::kSft;
  if (s == "dpo") return OutputFormat::kDpo;
  if (s == "sharegpt") return OutputFormat::kShareGpt;
  throw std::invalid_argument("unknown output format '" + std::string(s) + "'");
}

std::string default_file_name(OutputFormat f) {
  switch (f) {
    case OutputFormat::kSft: return "sft.jsonl";
    case OutputFormat::kDpo: return "dpo.jsonl";
    case OutputFormat::kShareGpt: return "sharegpt.json";
  }
  return "out";
}

std::string render_dataset(const std::vector<AcceptedExample>& accepted, OutputFormat format, double beta) {
  std::string out;
  json sharegpt = json::array();
  for (const auto& ex : accepted) {
    if (!ex.decision.accepted) {
      throw DataError("emit_dataset: decision for '" + ex.trajectory.id + "' is not accepted");
    }
    const double w = ex.assessment.severity_weight;
    switch (format) {
      case OutputFormat::kSft:
        out += to_json(pack_sft(ex.decision.hindsight_prompt, ex.trajectory, w)).dump() + "\n";
        break;
      case OutputFormat::kDpo:
        out += to_json(pack_dpo(ex.decision.hindsight_prompt, ex.trajectory.goal, ex.trajectory, w, beta)).dump() +
               "\n";
        break;
      case OutputFormat::kShareGpt:
        sharegpt.push_back(to_json(pack_sharegpt(ex.decision.hindsight_prompt, ex.trajectory)));
        break;
    }
  }
  if (format == OutputFormat::kShareGpt) out = sharegpt.dump(2) + "\n";
  return out;
}

std::size_t emit_dataset(const std::vector<AcceptedExample>& accepted, OutputFormat format,
                         const std::filesystem::path& path, double beta) {
  const std::string contents = render_dataset(accepted, format, beta);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot open " + path.string() + " for writing");
  out << contents;
  if (!out) throw DataError("write failed: " + path.string());
  return accepted.size();
}

}  // namespace agenther

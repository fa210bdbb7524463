#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "agenther/failure_detector.hpp"
#include "agenther/relabeler.hpp"
#include "agenther/trajectory.hpp"
#include "json.hpp"

namespace agenther {

inline constexpr double kDefaultDpoBeta = 0.1;

struct ChatMessage {
  std::string role;  // "user" | "assistant"
  std::string content;

  friend bool operator==(const ChatMessage&, const ChatMessage&) = default;
};

struct SftRecord {
  std::vector<ChatMessage> messages;  // exactly [user, assistant]
  double weight = 1.0;

  friend bool operator==(const SftRecord&, const SftRecord&) = default;
};

struct DpoRecord {
  std::string chosen_goal;    // hindsight goal
  std::string rejected_goal;  // original goal
  std::string trajectory_text;
  double weight = 1.0;
  double beta = kDefaultDpoBeta;

  friend bool operator==(const DpoRecord&, const DpoRecord&) = default;
};

struct ShareGptTurn {
  std::string from;  // "human" | "gpt"
  std::string value;

  friend bool operator==(const ShareGptTurn&, const ShareGptTurn&) = default;
};

struct ShareGptRecord {
  std::vector<ShareGptTurn> conversations;

  friend bool operator==(const ShareGptRecord&, const ShareGptRecord&) = default;
};

// "Thought: {z}\nAction: {a}" per step, joined by '\n', then
// "\nFinal answer: {last non-empty observation}".
std::string reconstruct_response(const Trajectory& traj);

SftRecord pack_sft(const std::string& goal, const Trajectory& traj, double weight);
DpoRecord pack_dpo(const std::string& hindsight_goal, const std::string& original_goal, const Trajectory& traj,
                   double weight, double beta = kDefaultDpoBeta);
ShareGptRecord pack_sharegpt(const std::string& goal, const Trajectory& traj);

nlohmann::json to_json(const SftRecord& r);
nlohmann::json to_json(const DpoRecord& r);
nlohmann::json to_json(const ShareGptRecord& r);
SftRecord sft_from_json(const nlohmann::json& j);
DpoRecord dpo_from_json(const nlohmann::json& j);
ShareGptRecord sharegpt_from_json(const nlohmann::json& j);

// log(1 + e^z) without overflow.
double softplus(double z);

// Severity-weighted DPO loss with the trajectory fixed and the goal varied:
//   -w * log sigmoid(beta * ((chosen_policy - chosen_ref) - (rejected_policy - rejected_ref)))
// evaluated as w * softplus(-x). Throws std::invalid_argument on
// non-finite input, beta <= 0, or w outside (0, 1].
double dpo_loss(double logp_chosen_policy, double logp_chosen_ref, double logp_rejected_policy,
                double logp_rejected_ref, double beta, double weight);

enum class OutputFormat { kSft, kDpo, kShareGpt };

std::string to_string(OutputFormat f);
OutputFormat parse_output_format(std::string_view s);
// "sft.jsonl", "dpo.jsonl", "sharegpt.json"
std::string default_file_name(OutputFormat f);

// An accepted relabeling with everything Stage 4 needs.
struct AcceptedExample {
  Trajectory trajectory;
  FailureAssessment assessment;
  RelabelDecision decision;
};

// File contents for `format`, records in input order. Throws DataError if
// any decision is not accepted.
std::string render_dataset(const std::vector<AcceptedExample>& accepted, OutputFormat format,
                           double beta = kDefaultDpoBeta);

// Writes render_dataset() to `path`; returns the record count.
std::size_t emit_dataset(const std::vector<AcceptedExample>& accepted, OutputFormat format,
                         const std::filesystem::path& path, double beta = kDefaultDpoBeta);

}  // namespace agenther

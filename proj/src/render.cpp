#include "agenther/render.hpp"

#include <sstream>
#include <string_view>

namespace agenther {

namespace {

constexpr std::string_view kThought = "Thought: ";
constexpr std::string_view kAction = "Action: ";
constexpr std::string_view kObservation = "Observation: ";

bool starts_with(std::string_view s, std::string_view prefix) { return s.substr(0, prefix.size()) == prefix; }

}  // namespace

std::vector<Turn> trajectory_turns(const Trajectory& traj) {
  std::vector<Turn> turns;
  turns.reserve(traj.steps.size() * 2);
  for (std::size_t i = 0; i < traj.steps.size(); ++i) {
    const Step& s = traj.steps[i];
    turns.push_back({TurnRole::kAssistant,
                     std::string(kThought) + s.thought + "\n" + std::string(kAction) + s.action});
    const bool last = i + 1 == traj.steps.size();
    if (!(last && s.observation.empty())) {
      turns.push_back({TurnRole::kHuman, std::string(kObservation) + s.observation});
    }
  }
  return turns;
}

std::string trajectory_text(const Trajectory& traj) {
  std::string out;
  for (const auto& t : trajectory_turns(traj)) {
    if (!out.empty()) out += '\n';
    out += t.text;
  }
  return out;
}

std::vector<Step> parse_trajectory_text(const std::string& text) {
  std::vector<Step> steps;
  enum class Field { kNone, kThought, kAction, kObservation } field = Field::kNone;
  std::istringstream in(text);
  std::string line;
  auto append = [](std::string& dst, std::string_view piece, bool continuation) {
    if (continuation) dst += '\n';
    dst += piece;
  };
  while (std::getline(in, line)) {
    std::string_view v = line;
    if (starts_with(v, kThought)) {
      Step s;
      s.index = static_cast<int>(steps.size()) + 1;
      s.thought = std::string(v.substr(kThought.size()));
      steps.push_back(std::move(s));
      field = Field::kThought;
    } else if (starts_with(v, kAction) && !steps.empty()) {
      steps.back().action = std::string(v.substr(kAction.size()));
      field = Field::kAction;
    } else if (starts_with(v, kObservation) && !steps.empty()) {
      steps.back().observation = std::string(v.substr(kObservation.size()));
      field = Field::kObservation;
    } else if (!steps.empty()) {
      Step& s = steps.back();
      switch (field) {
        case Field::kThought: append(s.thought, v, true); break;
        case Field::kAction: append(s.action, v, true); break;
        case Field::kObservation: append(s.observation, v, true); break;
        case Field::kNone: break;
      }
    }
  }
  if (!steps.empty() && steps.back().observation.empty()) steps.back().terminal = true;
  return steps;
}

}  // namespace agenther

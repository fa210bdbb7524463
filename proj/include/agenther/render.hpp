#pragma once

#include <string>
#include <vector>

#include "agenther/trajectory.hpp"

namespace agenther {

enum class TurnRole { kHuman, kAssistant };

struct Turn {
  TurnRole role;
  std::string text;

  friend bool operator==(const Turn&, const Turn&) = default;
};

// The one trajectory renderer. Each step becomes an assistant turn
// "Thought: {z}\nAction: {a}" followed by a human turn "Observation: {o}".
// The observation turn is dropped only for a final step whose observation
// is empty, so roles always alternate.
std::vector<Turn> trajectory_turns(const Trajectory& traj);

// Turn texts joined with '\n'. Used for the {trajectory} prompt slot and
// the DPO `trajectory` field.
std::string trajectory_text(const Trajectory& traj);

// Inverse of trajectory_text() for judges that only see the prompt.
// Multi-line fields survive as long as no line starts with one of the
// labels.
std::vector<Step> parse_trajectory_text(const std::string& text);

}  // namespace agenther

#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "vtt/domain.hpp"
#include "vtt/grading.hpp"
#include "vtt/responders.hpp"
#include "vtt/strategies.hpp"

namespace vtt {

struct EpisodeConfig {
  double gamma = 0.8;
  int max_questions = kNumQuestions;
  AssumptionMode mode = AssumptionMode::SimpleA;
  // Append (s_term, random action, reward 0) after a terminal episode; used
  // only as an extra training sample.
  bool include_terminal_tuples = false;

  void validate() const;  // InvalidInput
};

struct Transition {
  StateMatrix state;
  Question action;
  Response answer = Response::NotAsked;
  int reward = 0;  // -1, 0 or 1
  StateMatrix next_state;
  bool terminal = false;
};

struct Episode {
  std::string image_id;
  std::vector<Transition> transitions;
  double return_g = 0.0;
  // Grade implied by the final state when the episode ended terminal.
  std::optional<Grade> diagnosis;
  std::optional<Transition> terminal_tuple;

  int length() const { return static_cast<int>(transitions.size()); }
  bool reached_terminal() const { return diagnosis.has_value(); }
};

// Reward: -1 for a repeated question, otherwise 1 when the next state is
// terminal and 0 when not. Contradictory states count as non-terminal.
Transition step(const StateMatrix& state, const QuestionMask& asked, Question q,
                Response answer, AssumptionMode mode);

// Sum of reward_t * gamma^t.
double discounted_return(std::span<const Transition> transitions, double gamma);

// Starts from the empty state and stops at a terminal state, after
// max_questions, or when every question has been asked. Throws
// ContractViolation if the strategy repeats a question.
Episode run_episode(const QuestioningStrategy& qs, const Responder& mue,
                    const GroundTruthImage& img, const EpisodeConfig& cfg,
                    std::uint64_t rng_seed);

// CSV with columns image_id,step,concept,location,answer,reward,terminal.
void write_episode_log(std::ostream& out, std::span<const Episode> episodes);

}  // namespace vtt

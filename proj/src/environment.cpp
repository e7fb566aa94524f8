#include "vtt/environment.hpp"

#include <cmath>
#include <ostream>

#include "vtt/errors.hpp"

namespace vtt {

void EpisodeConfig::validate() const {
  if (!(gamma > 0.0 && gamma < 1.0)) throw InvalidInput("gamma must lie in (0, 1)");
  if (max_questions < 1 || max_questions > kNumQuestions) {
    throw InvalidInput("max_questions must lie in [1, 15]");
  }
}

Transition step(const StateMatrix& state, const QuestionMask& asked, Question q,
                Response answer, AssumptionMode mode) {
  if (answer == Response::NotAsked) throw InvalidInput("step needs a Yes/No answer");
  Transition t;
  t.state = state;
  t.action = q;
  t.answer = answer;
  t.next_state = state.with(q, answer);
  t.terminal = assess(t.next_state, mode).terminal();
  if (asked.contains(q)) {
    t.reward = -1;
  } else {
    t.reward = t.terminal ? 1 : 0;
  }
  return t;
}

double discounted_return(std::span<const Transition> transitions, double gamma) {
  double g = 0.0;
  double discount = 1.0;
  for (const auto& t : transitions) {
    g += t.reward * discount;
    discount *= gamma;
  }
  return g;
}

Episode run_episode(const QuestioningStrategy& qs, const Responder& mue,
                    const GroundTruthImage& img, const EpisodeConfig& cfg,
                    std::uint64_t rng_seed) {
  cfg.validate();
  Rng rng(rng_seed);
  Episode ep;
  ep.image_id = img.id();
  StateMatrix s;
  QuestionMask asked;
  while (ep.length() < cfg.max_questions && !asked.full()) {
    const Question q = qs.next_question(s, asked, rng);
    if (asked.contains(q)) {
      throw ContractViolation(qs.name() + " repeated question " + q.label());
    }
    Transition t = step(s, asked, q, mue.answer(img, q), cfg.mode);
    asked.insert(q);
    s = t.next_state;
    const bool done = t.terminal;
    ep.transitions.push_back(std::move(t));
    if (done) {
      ep.diagnosis = assess(s, cfg.mode).grade;
      break;
    }
  }
  ep.return_g = discounted_return(ep.transitions, cfg.gamma);
  if (cfg.include_terminal_tuples && ep.reached_terminal() && !asked.full()) {
    Transition extra;
    extra.state = s;
    extra.action = random_qs_next(asked, rng);
    extra.reward = 0;
    extra.next_state = s;
    extra.terminal = true;
    ep.terminal_tuple = extra;
  }
  return ep;
}

void write_episode_log(std::ostream& out, std::span<const Episode> episodes) {
  out << "image_id,step,concept,location,answer,reward,terminal\n";
  for (const auto& ep : episodes) {
    for (std::size_t i = 0; i < ep.transitions.size(); ++i) {
      const auto& t = ep.transitions[i];
      out << ep.image_id << ',' << i << ',' << concept_name(t.action.kind) << ','
          << location_name(t.action.location) << ',' << response_name(t.answer) << ','
          << t.reward << ',' << (t.terminal ? 1 : 0) << '\n';
    }
  }
}

}  // namespace vtt

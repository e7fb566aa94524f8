#include <doctest.h>

#include <cmath>
#include <sstream>

#include "vtt/data.hpp"
#include "vtt/environment.hpp"
#include "vtt/errors.hpp"

using namespace vtt;

namespace {

constexpr Question ex(Location l) { return {Concept::HardExudate, l}; }

class AlwaysNo final : public Responder {
 public:
  Response answer(const GroundTruthImage&, Question) const override { return Response::No; }
  std::string name() const override { return "always-no"; }
};

class Repeater final : public QuestioningStrategy {
 public:
  Question next_question(const StateMatrix&, const QuestionMask&, Rng&) const override {
    return Question{Concept::OpticDisc, Location::Q1};
  }
  std::string name() const override { return "repeater"; }
};

const SyntheticResponder kTruth({ResponderKind::Groundtruth, 1.0, 0}, AssumptionMode::SimpleA);

}  // namespace

TEST_CASE("step rewards") {
  const StateMatrix s;
  const Transition t0 = step(s, {}, ex(Location::Q1), Response::Yes, AssumptionMode::SimpleA);
  CHECK(t0.reward == 0);
  CHECK_FALSE(t0.terminal);
  CHECK(t0.next_state.at(ex(Location::Q1)) == Response::Yes);

  const Transition t1 = step(s, {}, ex(Location::WholeImage), Response::No, AssumptionMode::SimpleA);
  CHECK(t1.reward == 1);
  CHECK(t1.terminal);

  QuestionMask asked;
  asked.insert(ex(Location::Q1));
  const Transition t2 = step(t0.next_state, asked, ex(Location::Q1), Response::Yes,
                             AssumptionMode::SimpleA);
  CHECK(t2.reward == -1);
}

TEST_CASE("discounted return") {
  std::vector<Transition> tr(5);
  tr[4].reward = 1;
  CHECK(discounted_return(tr, 0.8) == doctest::Approx(0.4096).epsilon(1e-15));
  tr[1].reward = -1;
  CHECK(discounted_return(tr, 0.8) == doctest::Approx(0.4096 - 0.8));
}

TEST_CASE("textbook on a healthy image, simple-A: one question, return 1") {
  const auto img = GroundTruthImage::from_quadrants("h", 0, 0b0011, 0b1000);
  EpisodeConfig cfg;
  const Episode ep = run_episode(TextbookStrategy(AssumptionMode::SimpleA), kTruth, img, cfg, 0);
  CHECK(ep.length() == 1);
  CHECK(ep.return_g == 1.0);
  CHECK(ep.diagnosis == Grade::G0);
}

TEST_CASE("terminal at the fifth question returns 0.8^4") {
  // exudate in Q1 and fovea in Q1: EX whole, FOV Q1, EX Q1, OD Q1, OD Q2
  const auto img = GroundTruthImage::from_quadrants("g2", 0b0001, 0b0010, 0b0001);
  const Episode ep =
      run_episode(TextbookStrategy(AssumptionMode::SimpleA), kTruth, img, EpisodeConfig{}, 0);
  REQUIRE(ep.length() == 5);
  CHECK(ep.return_g == doctest::Approx(std::pow(0.8, 4)).epsilon(1e-15));
}

TEST_CASE("truncation without a terminal state returns 0") {
  // with every answer No the fovea is never found: no extra-U-A terminal state exists
  const auto img = GroundTruthImage::from_quadrants("h", 0, 1, 1);
  EpisodeConfig cfg;
  cfg.mode = AssumptionMode::ExtraUA;
  const AlwaysNo no;
  const Episode full = run_episode(RandomStrategy(), no, img, cfg, 4);
  CHECK(full.length() == 15);
  CHECK(full.return_g == 0.0);
  CHECK_FALSE(full.reached_terminal());

  cfg.max_questions = 6;
  const Episode cut = run_episode(RandomStrategy(), no, img, cfg, 4);
  CHECK(cut.length() == 6);
  CHECK(cut.return_g == 0.0);

  cfg.max_questions = 20;
  CHECK_THROWS_AS(run_episode(RandomStrategy(), no, img, cfg, 4), InvalidInput);
}

TEST_CASE("config validation") {
  EpisodeConfig cfg;
  cfg.gamma = 1.0;
  CHECK_THROWS_AS(cfg.validate(), InvalidInput);
  cfg.gamma = 0.0;
  CHECK_THROWS_AS(cfg.validate(), InvalidInput);
  cfg = EpisodeConfig{};
  cfg.max_questions = 0;
  CHECK_THROWS_AS(cfg.validate(), InvalidInput);
}

TEST_CASE("a strategy that repeats itself violates the contract") {
  const auto img = GroundTruthImage::from_quadrants("g", 0b0001, 0b0001, 0b0010);
  CHECK_THROWS_AS(run_episode(Repeater(), kTruth, img, EpisodeConfig{}, 0), ContractViolation);
}

TEST_CASE("terminal tuples") {
  const auto img = GroundTruthImage::from_quadrants("h", 0, 0b0011, 0b1000);
  EpisodeConfig cfg;
  cfg.include_terminal_tuples = true;
  const Episode ep = run_episode(TextbookStrategy(AssumptionMode::SimpleA), kTruth, img, cfg, 0);
  REQUIRE(ep.terminal_tuple.has_value());
  CHECK(ep.terminal_tuple->reward == 0);
  CHECK(ep.terminal_tuple->terminal);
  CHECK(ep.terminal_tuple->state == ep.transitions.back().next_state);
  CHECK_FALSE(ep.terminal_tuple->state.asked(ep.terminal_tuple->action));
  CHECK(ep.return_g == 1.0);
}

TEST_CASE("masked episodes: no repeats and returns on the gamma ladder") {
  DatasetConfig dc;
  const auto images = generate_dataset(dc);
  const SyntheticResponder noisy({ResponderKind::Random, 0.7, 1}, AssumptionMode::SimpleA);
  for (auto mode : {AssumptionMode::SimpleA, AssumptionMode::ExtraUA}) {
    EpisodeConfig cfg;
    cfg.mode = mode;
    for (std::size_t i = 0; i < images.size(); ++i) {
      for (const Responder* r : {static_cast<const Responder*>(&kTruth),
                                 static_cast<const Responder*>(&noisy)}) {
        const Episode ep = run_episode(RandomStrategy(), *r, images[i], cfg, i);
        for (const auto& t : ep.transitions) CHECK(t.reward >= 0);
        if (ep.reached_terminal()) {
          CHECK(ep.return_g == doctest::Approx(std::pow(0.8, ep.length() - 1)));
        } else {
          CHECK(ep.return_g == 0.0);
        }
      }
    }
  }
}

TEST_CASE("episodes are deterministic under the seed") {
  const auto img = GroundTruthImage::from_quadrants("g", 0b0101, 0b0001, 0b0010);
  const SyntheticResponder noisy({ResponderKind::Random, 0.7, 1}, AssumptionMode::SimpleA);
  const Episode a = run_episode(RandomStrategy(), noisy, img, EpisodeConfig{}, 12);
  const Episode b = run_episode(RandomStrategy(), noisy, img, EpisodeConfig{}, 12);
  REQUIRE(a.length() == b.length());
  for (int i = 0; i < a.length(); ++i) CHECK(a.transitions[i].action == b.transitions[i].action);
  CHECK(a.return_g == b.return_g);
}

TEST_CASE("episode log") {
  const auto img = GroundTruthImage::from_quadrants("h", 0, 0b0011, 0b1000);
  const Episode ep =
      run_episode(TextbookStrategy(AssumptionMode::SimpleA), kTruth, img, EpisodeConfig{}, 0);
  std::ostringstream out;
  write_episode_log(out, std::vector<Episode>{ep});
  CHECK(out.str() ==
        "image_id,step,concept,location,answer,reward,terminal\n"
        "h,0,EX,whole,No,1,1\n");
}

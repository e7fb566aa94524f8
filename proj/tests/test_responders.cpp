#include <doctest.h>

#include "vtt/data.hpp"
#include "vtt/errors.hpp"
#include "vtt/responders.hpp"
#include "vtt/strategies.hpp"

using namespace vtt;

namespace {

std::vector<GroundTruthImage> dataset(std::uint64_t seed = 0) {
  DatasetConfig cfg;
  cfg.seed = seed;
  return generate_dataset(cfg);
}

struct Rates {
  double overall = 0.0;
  double focus = 0.0;
};

// Realized accuracy over n uniformly drawn (image, question) pairs.
Rates realized(const SyntheticResponder& r, const std::vector<GroundTruthImage>& images, int n,
               std::uint64_t seed) {
  Rng rng(seed);
  long hits = 0;
  long focus_n = 0;
  long focus_hits = 0;
  for (int i = 0; i < n; ++i) {
    const auto& img = images[rng() % images.size()];
    const Question q = Question::from_index(static_cast<int>(rng() % kNumQuestions));
    const bool ok = r.answer(img, q) == img.truthful_answer(q);
    hits += ok;
    if (r.in_focus(img, q)) {
      ++focus_n;
      focus_hits += ok;
    }
  }
  return {static_cast<double>(hits) / n,
          focus_n ? static_cast<double>(focus_hits) / focus_n : 0.0};
}

}  // namespace

TEST_CASE("off-focus accuracy solves the balance equation") {
  CHECK(off_focus_accuracy(0.7, 3) == doctest::Approx(0.6375));
  CHECK(off_focus_accuracy(0.7, 0) == doctest::Approx(0.7));
  // unclamped: may leave [0, 1]
  CHECK(off_focus_accuracy(0.7, 14) < 0.0);
}

TEST_CASE("groundtruth and perfect random responders answer truthfully") {
  const auto images = dataset();
  const SyntheticResponder gt({ResponderKind::Groundtruth, 1.0, 3}, AssumptionMode::SimpleA);
  const SyntheticResponder perfect({ResponderKind::Random, 1.0, 3}, AssumptionMode::SimpleA);
  for (const auto& img : images) {
    for (int i = 0; i < kNumQuestions; ++i) {
      const Question q = Question::from_index(i);
      CHECK(gt.answer(img, q) == img.truthful_answer(q));
      CHECK(perfect.answer(img, q) == img.truthful_answer(q));
    }
  }
}

TEST_CASE("accuracy outside [0, 1] is rejected") {
  CHECK_THROWS_AS(SyntheticResponder({ResponderKind::Random, 1.2, 0}, AssumptionMode::SimpleA),
                  InvalidInput);
  CHECK_THROWS_AS(SyntheticResponder({ResponderKind::Reasonable, -0.1, 0}, AssumptionMode::SimpleA),
                  InvalidInput);
}

TEST_CASE("answers are a deterministic function of seed, image and question") {
  const auto images = dataset();
  const SyntheticResponder a({ResponderKind::Random, 0.6, 5}, AssumptionMode::SimpleA);
  const SyntheticResponder b({ResponderKind::Random, 0.6, 5}, AssumptionMode::SimpleA);
  const SyntheticResponder c({ResponderKind::Random, 0.6, 6}, AssumptionMode::SimpleA);
  int differ = 0;
  for (const auto& img : images) {
    for (int i = 0; i < kNumQuestions; ++i) {
      const Question q = Question::from_index(i);
      CHECK(a.answer(img, q) == a.answer(img, q));
      CHECK(a.answer(img, q) == b.answer(img, q));
      differ += a.answer(img, q) != c.answer(img, q);
    }
  }
  CHECK(differ > 100);
}

TEST_CASE("per-image solution for a reasonable responder") {
  // grade 2 image whose textbook path has three questions is impossible in
  // simple-A, so check the formula against the image's own |R|.
  const auto img = GroundTruthImage::from_quadrants("g2", 0b0001, 0b0001, 0b0001);
  const SyntheticResponder r({ResponderKind::Reasonable, 0.7, 0}, AssumptionMode::SimpleA);
  const int k = relevant_questions(img, AssumptionMode::SimpleA).count();
  for (int i = 0; i < kNumQuestions; ++i) {
    const Question q = Question::from_index(i);
    const double expected = r.in_focus(img, q) ? kFocusAccuracy : off_focus_accuracy(0.7, k);
    CHECK(r.correct_probability(img, q) == doctest::Approx(expected));
  }
}

TEST_CASE("calibrated responders realize their target accuracy") {
  for (auto mode : {AssumptionMode::SimpleA, AssumptionMode::ExtraUA}) {
    const auto images = dataset(2);
    for (double acc : {0.6, 0.7, 0.9}) {
      for (auto kind : {ResponderKind::Random, ResponderKind::Reasonable,
                        ResponderKind::Unreasonable}) {
        const SyntheticResponder r({kind, acc, 99}, mode, images);
        CAPTURE(r.name());
        CAPTURE(mode_name(mode));
        const Rates rates = realized(r, images, 100000, 5);
        if (r.clamped()) {
          // the focus set alone already exceeds the target
          CHECK(rates.overall > acc + 0.02);
          CHECK(*r.pooled_off_focus_accuracy() == 0.0);
          continue;
        }
        CHECK(std::abs(rates.overall - acc) <= 0.02);
        if (kind != ResponderKind::Random) CHECK(std::abs(rates.focus - 0.95) <= 0.02);
      }
    }
  }
}

TEST_CASE("only the extreme unreasonable case clamps") {
  const auto images = dataset(2);
  CHECK(SyntheticResponder({ResponderKind::Unreasonable, 0.6, 0}, AssumptionMode::SimpleA, images)
            .clamped());
  CHECK_FALSE(
      SyntheticResponder({ResponderKind::Unreasonable, 0.7, 0}, AssumptionMode::SimpleA, images)
          .clamped());
}

TEST_CASE("names") {
  CHECK(SyntheticResponder({ResponderKind::Reasonable, 0.7, 0}, AssumptionMode::SimpleA).name() ==
        "reasonable(0.7)");
  CHECK(SyntheticResponder({ResponderKind::Groundtruth, 1.0, 0}, AssumptionMode::SimpleA).name() ==
        "groundtruth");
  CHECK(parse_responder_kind("unreasonable") == ResponderKind::Unreasonable);
  CHECK_FALSE(parse_responder_kind("oracle").has_value());
}

#include "vtt/responders.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "vtt/errors.hpp"
#include "vtt/rng.hpp"
#include "vtt/strategies.hpp"

namespace vtt {

std::string_view responder_kind_name(ResponderKind k) {
  switch (k) {
    case ResponderKind::Groundtruth:
      return "groundtruth";
    case ResponderKind::Random:
      return "random";
    case ResponderKind::Reasonable:
      return "reasonable";
    case ResponderKind::Unreasonable:
      return "unreasonable";
  }
  return "?";
}

std::optional<ResponderKind> parse_responder_kind(std::string_view s) {
  for (auto k : {ResponderKind::Groundtruth, ResponderKind::Random, ResponderKind::Reasonable,
                 ResponderKind::Unreasonable}) {
    if (responder_kind_name(k) == s) return k;
  }
  return std::nullopt;
}

double off_focus_accuracy(double accuracy, int focus_count, int total, double focus_accuracy) {
  if (focus_count >= total) return focus_accuracy;
  return (accuracy * total - focus_accuracy * focus_count) / (total - focus_count);
}

namespace {

void check_accuracy(const ResponderSpec& spec) {
  if (!(spec.accuracy >= 0.0 && spec.accuracy <= 1.0)) {
    throw InvalidInput("responder accuracy must lie in [0, 1]");
  }
}

}  // namespace

SyntheticResponder::SyntheticResponder(ResponderSpec spec, AssumptionMode mode)
    : spec_(spec), mode_(mode) {
  check_accuracy(spec_);
}

SyntheticResponder::SyntheticResponder(ResponderSpec spec, AssumptionMode mode,
                                       std::span<const GroundTruthImage> calibration)
    : spec_(spec), mode_(mode) {
  check_accuracy(spec_);
  if (calibration.empty()) return;
  if (spec_.kind != ResponderKind::Reasonable && spec_.kind != ResponderKind::Unreasonable) {
    return;
  }
  long focus = 0;
  for (const auto& img : calibration) {
    const int relevant = relevant_questions(img, mode_).count();
    focus += spec_.kind == ResponderKind::Reasonable ? relevant : kNumQuestions - relevant;
  }
  const long total = static_cast<long>(calibration.size()) * kNumQuestions;
  double x = total == focus
                 ? kFocusAccuracy
                 : (spec_.accuracy * total - kFocusAccuracy * focus) / static_cast<double>(total - focus);
  if (x < 0.0 || x > 1.0) {
    clamped_ = true;
    x = std::clamp(x, 0.0, 1.0);
  }
  pooled_ = x;
}

bool SyntheticResponder::in_focus(const GroundTruthImage& img, Question q) const {
  if (spec_.kind != ResponderKind::Reasonable && spec_.kind != ResponderKind::Unreasonable) {
    return false;
  }
  const bool relevant = relevant_questions(img, mode_).contains(q);
  return spec_.kind == ResponderKind::Reasonable ? relevant : !relevant;
}

double SyntheticResponder::correct_probability(const GroundTruthImage& img, Question q) const {
  switch (spec_.kind) {
    case ResponderKind::Groundtruth:
      return 1.0;
    case ResponderKind::Random:
      return spec_.accuracy;
    case ResponderKind::Reasonable:
    case ResponderKind::Unreasonable:
      break;
  }
  if (in_focus(img, q)) return kFocusAccuracy;
  if (pooled_) return *pooled_;
  const int relevant = relevant_questions(img, mode_).count();
  const int focus =
      spec_.kind == ResponderKind::Reasonable ? relevant : kNumQuestions - relevant;
  return std::clamp(off_focus_accuracy(spec_.accuracy, focus), 0.0, 1.0);
}

Response SyntheticResponder::answer(const GroundTruthImage& img, Question q) const {
  const Response truth = img.truthful_answer(q);
  if (spec_.kind == ResponderKind::Groundtruth) return truth;
  std::uint64_t h = splitmix64(spec_.seed);
  h = splitmix64(h ^ stable_hash(img.id()));
  h = splitmix64(h ^ static_cast<std::uint64_t>(q.index() + 1));
  if (unit_interval(h) < correct_probability(img, q)) return truth;
  return truth == Response::Yes ? Response::No : Response::Yes;
}

std::string SyntheticResponder::name() const {
  std::string n(responder_kind_name(spec_.kind));
  if (spec_.kind != ResponderKind::Groundtruth) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%g", spec_.accuracy);
    n += '(';
    n += buf;
    n += ')';
  }
  return n;
}

}  // namespace vtt

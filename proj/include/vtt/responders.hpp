#pragma once

// Black-box methods under evaluation (MuEs). The synthetic kinds share one
// overall accuracy and differ only in *which* questions they get right.

#include <cstdint>
#include <optional>
#include <span>
#include <string>

#include "vtt/domain.hpp"
#include "vtt/grading.hpp"

namespace vtt {

class Responder {
 public:
  virtual ~Responder() = default;
  virtual Response answer(const GroundTruthImage& img, Question q) const = 0;
  virtual std::string name() const = 0;
};

enum class ResponderKind : std::uint8_t { Groundtruth, Random, Reasonable, Unreasonable };

std::string_view responder_kind_name(ResponderKind k);  // "groundtruth", "random", ...
std::optional<ResponderKind> parse_responder_kind(std::string_view s);

struct ResponderSpec {
  ResponderKind kind = ResponderKind::Groundtruth;
  double accuracy = 1.0;
  std::uint64_t seed = 0;
};

// Accuracy on the favoured questions of reasonable/unreasonable responders.
inline constexpr double kFocusAccuracy = 0.95;

// Solves focus_accuracy*k + x*(n-k) = accuracy*n for x, unclamped.
double off_focus_accuracy(double accuracy, int focus_count, int total = kNumQuestions,
                          double focus_accuracy = kFocusAccuracy);

class SyntheticResponder final : public Responder {
 public:
  // Off-focus accuracy is solved per image. Throws InvalidInput when the
  // accuracy lies outside [0, 1].
  SyntheticResponder(ResponderSpec spec, AssumptionMode mode);
  // Off-focus accuracy is solved once, pooled over `calibration`, so the
  // overall accuracy on that image population matches the target even where
  // a per-image solution would leave [0, 1].
  SyntheticResponder(ResponderSpec spec, AssumptionMode mode,
                     std::span<const GroundTruthImage> calibration);

  // Deterministic in (seed, image id, question).
  Response answer(const GroundTruthImage& img, Question q) const override;
  std::string name() const override;

  // Probability that q is answered truthfully on img.
  double correct_probability(const GroundTruthImage& img, Question q) const;
  // Whether q falls in the set this responder favours.
  bool in_focus(const GroundTruthImage& img, Question q) const;

  const ResponderSpec& spec() const { return spec_; }
  std::optional<double> pooled_off_focus_accuracy() const { return pooled_; }
  // True when the pooled solution left [0, 1] and was clamped.
  bool clamped() const { return clamped_; }

 private:
  ResponderSpec spec_;
  AssumptionMode mode_;
  std::optional<double> pooled_;
  bool clamped_ = false;
};

}  // namespace vtt

#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "vtt/domain.hpp"

namespace vtt {

enum class Grade : std::uint8_t { G0 = 0, G1 = 1, G2 = 2 };
inline constexpr int kNumGrades = 3;

enum class AssumptionMode : std::uint8_t {
  // Grade decidable; optic disc localized whenever exudates are confirmed.
  SimpleA,
  // SimpleA plus fovea and optic disc always localized.
  ExtraUA,
};

std::string_view mode_name(AssumptionMode m);  // "simple-A" / "extra-U-A"
std::optional<AssumptionMode> parse_mode(std::string_view s);

// 4-bit quadrant set; bit i stands for quadrant Q(i+1).
using QuadrantMask = std::uint8_t;
inline constexpr QuadrantMask kAllQuadrantsMask = 0xF;
constexpr QuadrantMask quadrant_bit(Location l) {
  return static_cast<QuadrantMask>(1u << (static_cast<int>(l) - 1));
}
// Single quadrants and the four side-sharing pairs of the 2x2 tiling.
const std::vector<QuadrantMask>& valid_optic_disc_masks();

// Annotation-level ground truth of one fundus image.
class GroundTruthImage {
 public:
  // Derives the whole-image row and the grade; throws InvalidInput when the
  // fovea is not in exactly one quadrant or the optic disc is not one
  // quadrant or two adjacent ones.
  static GroundTruthImage from_quadrants(std::string id, QuadrantMask exudates,
                                         QuadrantMask optic_disc, QuadrantMask fovea);
  // Full 15-cell presence grid in canonical question order. Additionally
  // rejects grids whose whole-image cells disagree with their quadrants.
  static GroundTruthImage from_presence(std::string id,
                                        const std::array<bool, kNumQuestions>& presence);

  const std::string& id() const { return id_; }
  bool present(Question q) const { return presence_[q.index()]; }
  bool present(Concept c, Location l) const { return present(Question{c, l}); }
  const std::array<bool, kNumQuestions>& presence() const { return presence_; }
  QuadrantMask quadrants(Concept c) const;
  Location fovea_quadrant() const;
  Grade grade() const { return grade_; }
  Response truthful_answer(Question q) const {
    return present(q) ? Response::Yes : Response::No;
  }

  friend bool operator==(const GroundTruthImage&, const GroundTruthImage&) = default;

 private:
  GroundTruthImage() = default;

  std::string id_;
  std::array<bool, kNumQuestions> presence_{};
  Grade grade_ = Grade::G0;
};

// G0 without exudates, G2 when an exudate shares the fovea's quadrant, G1
// otherwise. Re-validates the presence grid (InvalidInput on failure).
Grade grade(const GroundTruthImage& img);
Grade grade_of(QuadrantMask exudates, Location fovea);

enum class DecisionStatus : std::uint8_t { NonTerminal, Terminal, Inconsistent };

struct Decision {
  DecisionStatus status = DecisionStatus::NonTerminal;
  Grade grade = Grade::G0;  // meaningful only when Terminal

  bool terminal() const { return status == DecisionStatus::Terminal; }
  friend bool operator==(const Decision&, const Decision&) = default;
};

// Grades realized by at least one valid image consistent with the answers;
// all false when the state is inconsistent.
std::array<bool, kNumGrades> possible_grades(const StateMatrix& s);

// Tri-state assessment: Inconsistent when no valid image matches the
// answers. Never throws.
Decision assess(const StateMatrix& s, AssumptionMode mode);

// Terminal(g) or nullopt; throws InconsistentState when no valid image
// matches the answers.
std::optional<Grade> is_terminal(const StateMatrix& s, AssumptionMode mode);

// Exhaustive check over all 512 valid images. Same contract as is_terminal;
// kept free of the closed-form reasoning in assess().
std::optional<Grade> brute_force_decidable(const StateMatrix& s, AssumptionMode mode);
Decision brute_force_assess(const StateMatrix& s, AssumptionMode mode);

// Every structurally valid image, in a fixed enumeration order.
const std::vector<GroundTruthImage>& all_valid_images();

}  // namespace vtt

#include "vtt/grading.hpp"

#include <bit>

#include "vtt/errors.hpp"

namespace vtt {

std::string_view mode_name(AssumptionMode m) {
  return m == AssumptionMode::SimpleA ? "simple-A" : "extra-U-A";
}

std::optional<AssumptionMode> parse_mode(std::string_view s) {
  if (s == "simple-A") return AssumptionMode::SimpleA;
  if (s == "extra-U-A") return AssumptionMode::ExtraUA;
  return std::nullopt;
}

const std::vector<QuadrantMask>& valid_optic_disc_masks() {
  static const std::vector<QuadrantMask> masks = {0b0001, 0b0010, 0b0100, 0b1000,
                                                  0b0011, 0b0110, 0b1100, 0b1001};
  return masks;
}

namespace {

bool valid_optic_disc(QuadrantMask m) {
  for (QuadrantMask v : valid_optic_disc_masks()) {
    if (v == m) return true;
  }
  return false;
}

Location quadrant_of_bit(int bit) { return static_cast<Location>(bit + 1); }

}  // namespace

Grade grade_of(QuadrantMask exudates, Location fovea) {
  if (exudates == 0) return Grade::G0;
  return (exudates & quadrant_bit(fovea)) ? Grade::G2 : Grade::G1;
}

GroundTruthImage GroundTruthImage::from_quadrants(std::string id, QuadrantMask exudates,
                                                  QuadrantMask optic_disc,
                                                  QuadrantMask fovea) {
  if ((exudates | optic_disc | fovea) & ~kAllQuadrantsMask) {
    throw InvalidInput("quadrant mask out of range");
  }
  if (std::popcount(static_cast<unsigned>(fovea)) != 1) {
    throw InvalidInput("fovea must lie in exactly one quadrant");
  }
  if (!valid_optic_disc(optic_disc)) {
    throw InvalidInput("optic disc must occupy one quadrant or two adjacent quadrants");
  }
  GroundTruthImage img;
  img.id_ = std::move(id);
  const std::array<std::pair<Concept, QuadrantMask>, 3> rows = {
      std::pair{Concept::HardExudate, exudates}, std::pair{Concept::OpticDisc, optic_disc},
      std::pair{Concept::Fovea, fovea}};
  for (const auto& [c, mask] : rows) {
    img.presence_[Question{c, Location::WholeImage}.index()] = mask != 0;
    for (Location l : kQuadrants) {
      img.presence_[Question{c, l}.index()] = (mask & quadrant_bit(l)) != 0;
    }
  }
  img.grade_ = grade_of(exudates, quadrant_of_bit(std::countr_zero(fovea)));
  return img;
}

GroundTruthImage GroundTruthImage::from_presence(
    std::string id, const std::array<bool, kNumQuestions>& presence) {
  std::array<QuadrantMask, kNumConcepts> masks{};
  for (Concept c : kAllConcepts) {
    QuadrantMask m = 0;
    for (Location l : kQuadrants) {
      if (presence[Question{c, l}.index()]) m |= quadrant_bit(l);
    }
    if (presence[Question{c, Location::WholeImage}.index()] != (m != 0)) {
      throw InvalidInput(std::string("whole-image ") + std::string(concept_name(c)) +
                         " disagrees with its quadrants");
    }
    masks[static_cast<int>(c)] = m;
  }
  return from_quadrants(std::move(id), masks[0], masks[1], masks[2]);
}

QuadrantMask GroundTruthImage::quadrants(Concept c) const {
  QuadrantMask m = 0;
  for (Location l : kQuadrants) {
    if (present(c, l)) m |= quadrant_bit(l);
  }
  return m;
}

Location GroundTruthImage::fovea_quadrant() const {
  return quadrant_of_bit(std::countr_zero(static_cast<unsigned>(quadrants(Concept::Fovea))));
}

Grade grade(const GroundTruthImage& img) {
  return GroundTruthImage::from_presence(img.id(), img.presence()).grade();
}

namespace {

struct RowAnswers {
  Response whole = Response::NotAsked;
  QuadrantMask yes = 0;
  QuadrantMask no = 0;
};

RowAnswers row_answers(const StateMatrix& s, Concept c) {
  RowAnswers r;
  r.whole = s.at(c, Location::WholeImage);
  for (Location l : kQuadrants) {
    if (s.at(c, l) == Response::Yes) r.yes |= quadrant_bit(l);
    if (s.at(c, l) == Response::No) r.no |= quadrant_bit(l);
  }
  return r;
}

bool localization_satisfied(const StateMatrix& s, AssumptionMode mode) {
  const bool od_localized = s.any_quadrant(Concept::OpticDisc, Response::Yes);
  bool exudate_confirmed = s.at(Concept::HardExudate, Location::WholeImage) == Response::Yes ||
                           s.any_quadrant(Concept::HardExudate, Response::Yes);
  if (exudate_confirmed && !od_localized) return false;
  if (mode == AssumptionMode::ExtraUA) {
    return od_localized && s.any_quadrant(Concept::Fovea, Response::Yes);
  }
  return true;
}

Decision from_grade_set(std::array<bool, kNumGrades> possible, const StateMatrix& s,
                        AssumptionMode mode) {
  int n = 0;
  int last = 0;
  for (int g = 0; g < kNumGrades; ++g) {
    if (possible[g]) {
      ++n;
      last = g;
    }
  }
  if (n == 0) return {DecisionStatus::Inconsistent, Grade::G0};
  if (n == 1 && localization_satisfied(s, mode)) {
    return {DecisionStatus::Terminal, static_cast<Grade>(last)};
  }
  return {DecisionStatus::NonTerminal, Grade::G0};
}

}  // namespace

std::array<bool, kNumGrades> possible_grades(const StateMatrix& s) {
  constexpr std::array<bool, kNumGrades> kNone{};

  // Fovea: present in exactly one quadrant.
  const RowAnswers fov = row_answers(s, Concept::Fovea);
  if (fov.whole == Response::No || std::popcount(static_cast<unsigned>(fov.yes)) > 1) {
    return kNone;
  }
  const QuadrantMask fovea_candidates =
      fov.yes ? fov.yes : static_cast<QuadrantMask>(~fov.no & kAllQuadrantsMask);
  if (fovea_candidates == 0) return kNone;

  // Optic disc: some single or adjacent-pair footprint must fit the answers.
  const RowAnswers od = row_answers(s, Concept::OpticDisc);
  if (od.whole == Response::No) return kNone;
  bool od_fits = false;
  for (QuadrantMask m : valid_optic_disc_masks()) {
    if ((od.yes & ~m) == 0 && (od.no & m) == 0) od_fits = true;
  }
  if (!od_fits) return kNone;

  // Exudates: any subset E with yes <= E <= allowed.
  const RowAnswers ex = row_answers(s, Concept::HardExudate);
  QuadrantMask allowed = static_cast<QuadrantMask>(~ex.no & kAllQuadrantsMask);
  if (ex.whole == Response::No) {
    if (ex.yes) return kNone;
    allowed = 0;
  }
  const bool must_be_nonempty = ex.whole == Response::Yes;
  if (must_be_nonempty && allowed == 0) return kNone;

  std::array<bool, kNumGrades> possible{};
  possible[0] = ex.yes == 0 && !must_be_nonempty;
  if (ex.whole != Response::No) {
    for (int bit = 0; bit < kNumQuadrants; ++bit) {
      const auto f = static_cast<QuadrantMask>(1u << bit);
      if (!(fovea_candidates & f)) continue;
      if (allowed & f) possible[2] = true;
      if (!(ex.yes & f) && (ex.yes != 0 || (allowed & ~f) != 0)) possible[1] = true;
    }
  }
  return possible;
}

Decision assess(const StateMatrix& s, AssumptionMode mode) {
  return from_grade_set(possible_grades(s), s, mode);
}

std::optional<Grade> is_terminal(const StateMatrix& s, AssumptionMode mode) {
  const Decision d = assess(s, mode);
  if (d.status == DecisionStatus::Inconsistent) {
    throw InconsistentState("no valid image is consistent with the answers");
  }
  if (d.terminal()) return d.grade;
  return std::nullopt;
}

const std::vector<GroundTruthImage>& all_valid_images() {
  static const std::vector<GroundTruthImage> images = [] {
    std::vector<GroundTruthImage> out;
    for (int f = 0; f < kNumQuadrants; ++f) {
      for (QuadrantMask od : valid_optic_disc_masks()) {
        for (int ex = 0; ex < 16; ++ex) {
          out.push_back(GroundTruthImage::from_quadrants(
              "enum", static_cast<QuadrantMask>(ex), od, static_cast<QuadrantMask>(1u << f)));
        }
      }
    }
    return out;
  }();
  return images;
}

Decision brute_force_assess(const StateMatrix& s, AssumptionMode mode) {
  std::array<bool, kNumGrades> possible{};
  for (const GroundTruthImage& img : all_valid_images()) {
    bool consistent = true;
    for (int i = 0; i < kNumQuestions && consistent; ++i) {
      const Response r = s.at(Question::from_index(i));
      if (r == Response::NotAsked) continue;
      consistent = (r == Response::Yes) == img.presence()[i];
    }
    if (!consistent) continue;
    // Grade recomputed straight from the cells rather than via grade_of().
    bool any_ex = false;
    bool ex_at_fovea = false;
    for (Location l : kQuadrants) {
      const bool ex = img.present(Concept::HardExudate, l);
      any_ex = any_ex || ex;
      ex_at_fovea = ex_at_fovea || (ex && img.present(Concept::Fovea, l));
    }
    possible[!any_ex ? 0 : (ex_at_fovea ? 2 : 1)] = true;
  }
  return from_grade_set(possible, s, mode);
}

std::optional<Grade> brute_force_decidable(const StateMatrix& s, AssumptionMode mode) {
  const Decision d = brute_force_assess(s, mode);
  if (d.status == DecisionStatus::Inconsistent) {
    throw InconsistentState("no valid image is consistent with the answers");
  }
  if (d.terminal()) return d.grade;
  return std::nullopt;
}

}  // namespace vtt

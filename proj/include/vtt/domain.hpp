#pragma once

// Question vocabulary for DME grading: three concepts probed over the whole
// image and its four quadrants, the Yes/No responses, and the order-free
// state matrix a questioning history is reduced to.

#include <array>
#include <bitset>
#include <compare>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace vtt {

enum class Concept : std::uint8_t { HardExudate = 0, OpticDisc = 1, Fovea = 2 };
enum class Location : std::uint8_t { WholeImage = 0, Q1 = 1, Q2 = 2, Q3 = 3, Q4 = 4 };
enum class Response : std::uint8_t { NotAsked = 0, No = 1, Yes = 2 };

inline constexpr int kNumConcepts = 3;
inline constexpr int kNumLocations = 5;
inline constexpr int kNumQuadrants = 4;
inline constexpr int kNumQuestions = kNumConcepts * kNumLocations;

inline constexpr std::array<Concept, kNumConcepts> kAllConcepts = {
    Concept::HardExudate, Concept::OpticDisc, Concept::Fovea};
inline constexpr std::array<Location, kNumLocations> kAllLocations = {
    Location::WholeImage, Location::Q1, Location::Q2, Location::Q3, Location::Q4};
inline constexpr std::array<Location, kNumQuadrants> kQuadrants = {
    Location::Q1, Location::Q2, Location::Q3, Location::Q4};

// "EX", "OD", "FOV"
std::string_view concept_name(Concept c);
// "whole", "Q1".."Q4"
std::string_view location_name(Location l);
std::optional<Concept> parse_concept(std::string_view s);
std::optional<Location> parse_location(std::string_view s);
std::string_view response_name(Response r);

struct Question {
  Concept kind = Concept::HardExudate;
  Location location = Location::WholeImage;

  // Canonical action index: concept-major, location-minor.
  constexpr int index() const {
    return static_cast<int>(kind) * kNumLocations + static_cast<int>(location);
  }
  static constexpr Question from_index(int i) {
    return {static_cast<Concept>(i / kNumLocations),
            static_cast<Location>(i % kNumLocations)};
  }
  std::string label() const;

  friend constexpr auto operator<=>(const Question& a, const Question& b) {
    return a.index() <=> b.index();
  }
  friend constexpr bool operator==(const Question& a, const Question& b) {
    return a.index() == b.index();
  }
};

using QuestionSet = std::vector<Question>;

// Cartesian product in canonical order. Throws InvalidInput on empty or
// duplicated inputs.
QuestionSet build_question_set(std::span<const Location> locations,
                               std::span<const Concept> concepts);
// All 15 questions.
const QuestionSet& full_question_set();

// Not asked -> 0, No -> 0.5, Yes -> 1.
constexpr double encode_response(Response r) {
  switch (r) {
    case Response::No:
      return 0.5;
    case Response::Yes:
      return 1.0;
    case Response::NotAsked:
      break;
  }
  return 0.0;
}

// Set of asked questions.
class QuestionMask {
 public:
  QuestionMask() = default;

  bool contains(Question q) const { return bits_.test(q.index()); }
  void insert(Question q) { bits_.set(q.index()); }
  int count() const { return static_cast<int>(bits_.count()); }
  bool full() const { return bits_.all(); }
  bool empty() const { return bits_.none(); }
  std::vector<Question> unasked() const;
  std::vector<Question> members() const;

  friend bool operator==(const QuestionMask&, const QuestionMask&) = default;

 private:
  std::bitset<kNumQuestions> bits_;
};

struct QuestionResponse {
  Question question;
  Response response = Response::NotAsked;
  friend bool operator==(const QuestionResponse&, const QuestionResponse&) = default;
};

// Ordered question-response pairs; no question twice, never NotAsked.
class History {
 public:
  History() = default;
  // Validates the invariants; throws InvalidInput.
  explicit History(std::vector<QuestionResponse> pairs);

  void add(Question q, Response r);
  std::span<const QuestionResponse> pairs() const { return pairs_; }
  std::size_t size() const { return pairs_.size(); }
  bool contains(Question q) const { return asked_.contains(q); }

 private:
  std::vector<QuestionResponse> pairs_;
  QuestionMask asked_;
};

// N_C x N_L grid over {0, 0.5, 1}; 0 iff the question was not asked.
class StateMatrix {
 public:
  StateMatrix() { cells_.fill(Response::NotAsked); }

  Response at(Question q) const { return cells_[q.index()]; }
  Response at(Concept c, Location l) const { return at(Question{c, l}); }
  double value(Question q) const { return encode_response(at(q)); }
  double value(Concept c, Location l) const { return value(Question{c, l}); }
  bool asked(Question q) const { return at(q) != Response::NotAsked; }
  QuestionMask asked_mask() const;
  int asked_count() const;

  // Copy with q set to r.
  StateMatrix with(Question q, Response r) const;
  void set(Question q, Response r) { cells_[q.index()] = r; }

  // Row-major flattening in canonical question order.
  std::array<double, kNumQuestions> flat() const;
  // Throws InvalidInput unless every entry is one of {0, 0.5, 1}.
  static StateMatrix from_flat(std::span<const double> values);

  // Base-3 packing of the cells; a perfect key for hashing.
  std::uint32_t code() const;

  // 15 comma-separated values in canonical order, no newline.
  std::string to_csv_row() const;
  static StateMatrix from_csv_row(std::string_view row);

  // Concept row helpers.
  bool any_quadrant(Concept c, Response r) const;
  std::optional<Location> first_quadrant(Concept c, Response r) const;

  friend bool operator==(const StateMatrix&, const StateMatrix&) = default;

 private:
  std::array<Response, kNumQuestions> cells_{};
};

// Throws InvalidInput when a question appears twice or a response is NotAsked.
StateMatrix state_from_history(std::span<const QuestionResponse> pairs);
inline StateMatrix state_from_history(const History& h) {
  return state_from_history(h.pairs());
}

}  // namespace vtt

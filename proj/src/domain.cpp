#include "vtt/domain.hpp"

#include <cstdlib>

#include "vtt/errors.hpp"

namespace vtt {

std::string_view concept_name(Concept c) {
  switch (c) {
    case Concept::HardExudate:
      return "EX";
    case Concept::OpticDisc:
      return "OD";
    case Concept::Fovea:
      return "FOV";
  }
  return "?";
}

std::string_view location_name(Location l) {
  switch (l) {
    case Location::WholeImage:
      return "whole";
    case Location::Q1:
      return "Q1";
    case Location::Q2:
      return "Q2";
    case Location::Q3:
      return "Q3";
    case Location::Q4:
      return "Q4";
  }
  return "?";
}

std::optional<Concept> parse_concept(std::string_view s) {
  for (Concept c : kAllConcepts) {
    if (concept_name(c) == s) return c;
  }
  return std::nullopt;
}

std::optional<Location> parse_location(std::string_view s) {
  for (Location l : kAllLocations) {
    if (location_name(l) == s) return l;
  }
  return std::nullopt;
}

std::string_view response_name(Response r) {
  switch (r) {
    case Response::No:
      return "No";
    case Response::Yes:
      return "Yes";
    case Response::NotAsked:
      break;
  }
  return "N/A";
}

std::string Question::label() const {
  std::string s(concept_name(kind));
  s += '@';
  s += location_name(location);
  return s;
}

QuestionSet build_question_set(std::span<const Location> locations,
                               std::span<const Concept> concepts) {
  if (locations.empty() || concepts.empty()) {
    throw InvalidInput("question set needs at least one location and one concept");
  }
  std::bitset<kNumLocations> seen_l;
  for (Location l : locations) {
    const auto i = static_cast<std::size_t>(l);
    if (seen_l.test(i)) throw InvalidInput("duplicate location in question set");
    seen_l.set(i);
  }
  std::bitset<kNumConcepts> seen_c;
  for (Concept c : concepts) {
    const auto i = static_cast<std::size_t>(c);
    if (seen_c.test(i)) throw InvalidInput("duplicate concept in question set");
    seen_c.set(i);
  }
  QuestionSet out;
  out.reserve(locations.size() * concepts.size());
  for (Concept c : kAllConcepts) {
    if (!seen_c.test(static_cast<std::size_t>(c))) continue;
    for (Location l : kAllLocations) {
      if (seen_l.test(static_cast<std::size_t>(l))) out.push_back({c, l});
    }
  }
  return out;
}

const QuestionSet& full_question_set() {
  static const QuestionSet all = build_question_set(kAllLocations, kAllConcepts);
  return all;
}

std::vector<Question> QuestionMask::unasked() const {
  std::vector<Question> out;
  for (int i = 0; i < kNumQuestions; ++i) {
    if (!bits_.test(i)) out.push_back(Question::from_index(i));
  }
  return out;
}

std::vector<Question> QuestionMask::members() const {
  std::vector<Question> out;
  for (int i = 0; i < kNumQuestions; ++i) {
    if (bits_.test(i)) out.push_back(Question::from_index(i));
  }
  return out;
}

History::History(std::vector<QuestionResponse> pairs) {
  for (const auto& p : pairs) add(p.question, p.response);
}

void History::add(Question q, Response r) {
  if (r == Response::NotAsked) throw InvalidInput("history entries must be answered");
  if (asked_.contains(q)) throw InvalidInput("question " + q.label() + " asked twice");
  asked_.insert(q);
  pairs_.push_back({q, r});
}

QuestionMask StateMatrix::asked_mask() const {
  QuestionMask m;
  for (int i = 0; i < kNumQuestions; ++i) {
    if (cells_[i] != Response::NotAsked) m.insert(Question::from_index(i));
  }
  return m;
}

int StateMatrix::asked_count() const {
  int n = 0;
  for (Response r : cells_) n += r != Response::NotAsked;
  return n;
}

StateMatrix StateMatrix::with(Question q, Response r) const {
  StateMatrix s = *this;
  s.set(q, r);
  return s;
}

std::array<double, kNumQuestions> StateMatrix::flat() const {
  std::array<double, kNumQuestions> out{};
  for (int i = 0; i < kNumQuestions; ++i) out[i] = encode_response(cells_[i]);
  return out;
}

StateMatrix StateMatrix::from_flat(std::span<const double> values) {
  if (values.size() != kNumQuestions) {
    throw InvalidInput("state matrix needs exactly 15 values");
  }
  StateMatrix s;
  for (int i = 0; i < kNumQuestions; ++i) {
    const double v = values[i];
    if (v == 0.0) {
      s.cells_[i] = Response::NotAsked;
    } else if (v == 0.5) {
      s.cells_[i] = Response::No;
    } else if (v == 1.0) {
      s.cells_[i] = Response::Yes;
    } else {
      throw InvalidInput("state entry " + std::to_string(i) + " not in {0, 0.5, 1}");
    }
  }
  return s;
}

std::uint32_t StateMatrix::code() const {
  std::uint32_t c = 0;
  for (int i = kNumQuestions - 1; i >= 0; --i) {
    c = c * 3 + static_cast<std::uint32_t>(cells_[i]);
  }
  return c;
}

std::string StateMatrix::to_csv_row() const {
  std::string out;
  for (int i = 0; i < kNumQuestions; ++i) {
    if (i) out += ',';
    switch (cells_[i]) {
      case Response::NotAsked:
        out += '0';
        break;
      case Response::No:
        out += "0.5";
        break;
      case Response::Yes:
        out += '1';
        break;
    }
  }
  return out;
}

StateMatrix StateMatrix::from_csv_row(std::string_view row) {
  std::vector<double> values;
  std::size_t start = 0;
  while (start <= row.size()) {
    std::size_t end = row.find(',', start);
    if (end == std::string_view::npos) end = row.size();
    std::string field(row.substr(start, end - start));
    char* stop = nullptr;
    const double v = std::strtod(field.c_str(), &stop);
    if (field.empty() || stop != field.c_str() + field.size()) {
      throw InvalidInput("malformed state value '" + field + "'");
    }
    values.push_back(v);
    start = end + 1;
  }
  return from_flat(values);
}

bool StateMatrix::any_quadrant(Concept c, Response r) const {
  return first_quadrant(c, r).has_value();
}

std::optional<Location> StateMatrix::first_quadrant(Concept c, Response r) const {
  for (Location l : kQuadrants) {
    if (at(c, l) == r) return l;
  }
  return std::nullopt;
}

StateMatrix state_from_history(std::span<const QuestionResponse> pairs) {
  StateMatrix s;
  for (const auto& p : pairs) {
    if (p.response == Response::NotAsked) {
      throw InvalidInput("history entry " + p.question.label() + " has no response");
    }
    if (s.asked(p.question)) {
      throw InvalidInput("question " + p.question.label() + " appears twice in history");
    }
    s.set(p.question, p.response);
  }
  return s;
}

}  // namespace vtt

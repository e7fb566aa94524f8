#include "vtt/strategies.hpp"

#include <deque>
#include <sstream>

#include "vtt/errors.hpp"

namespace vtt {

namespace {

std::optional<Question> first_unasked(const QuestionMask& asked, Concept c) {
  for (Location l : kQuadrants) {
    const Question q{c, l};
    if (!asked.contains(q)) return q;
  }
  return std::nullopt;
}

int grade_count(const std::array<bool, kNumGrades>& possible) {
  int n = 0;
  for (bool b : possible) n += b;
  return n;
}

std::optional<Question> textbook_step(const StateMatrix& s, const QuestionMask& asked,
                                      AssumptionMode mode) {
  const Question ex_whole{Concept::HardExudate, Location::WholeImage};
  if (!asked.contains(ex_whole)) return ex_whole;

  const bool exudates = s.at(ex_whole) == Response::Yes;
  const bool localize = exudates || mode == AssumptionMode::ExtraUA;

  if (localize && !s.any_quadrant(Concept::Fovea, Response::Yes)) {
    if (auto q = first_unasked(asked, Concept::Fovea)) return q;
  }
  if (exudates) {
    if (auto fovea = s.first_quadrant(Concept::Fovea, Response::Yes)) {
      const Question at_fovea{Concept::HardExudate, *fovea};
      if (!asked.contains(at_fovea)) return at_fovea;
    }
  }
  if (localize && !s.any_quadrant(Concept::OpticDisc, Response::Yes)) {
    if (auto q = first_unasked(asked, Concept::OpticDisc)) return q;
  }
  if (grade_count(possible_grades(s)) > 1) {
    if (auto q = first_unasked(asked, Concept::HardExudate)) return q;
  }
  return std::nullopt;
}

}  // namespace

Question random_qs_next(const QuestionMask& asked, Rng& rng) {
  const auto options = asked.unasked();
  if (options.empty()) throw Exhausted("every question has been asked");
  std::uniform_int_distribution<std::size_t> pick(0, options.size() - 1);
  return options[pick(rng)];
}

Question textbook_qs_next(const StateMatrix& s, const QuestionMask& asked, AssumptionMode mode) {
  if (assess(s, mode).terminal()) {
    throw ContractViolation("textbook strategy queried on a terminal state");
  }
  if (auto q = textbook_step(s, asked, mode)) return *q;
  const auto rest = asked.unasked();
  if (rest.empty()) throw Exhausted("every question has been asked");
  return rest.front();
}

Question tree_qs_next(const DecisionTreeModel& model, const StateMatrix& s,
                      const QuestionMask& asked, AssumptionMode mode, Rng& rng) {
  if (assess(s, mode).terminal()) {
    throw ContractViolation("tree strategy queried on a terminal state");
  }
  const auto& nodes = model.nodes();
  int i = 0;
  while (!nodes[i].is_leaf()) {
    const auto& n = nodes[i];
    const Question q = Question::from_index(n.feature);
    if (!asked.contains(q)) return q;
    i = s.value(q) <= n.threshold ? n.left : n.right;
  }
  return random_qs_next(asked, rng);
}

Question RandomStrategy::next_question(const StateMatrix&, const QuestionMask& asked,
                                       Rng& rng) const {
  return random_qs_next(asked, rng);
}

Question TextbookStrategy::next_question(const StateMatrix& s, const QuestionMask& asked,
                                         Rng&) const {
  return textbook_qs_next(s, asked, mode_);
}

Question TreeStrategy::next_question(const StateMatrix& s, const QuestionMask& asked,
                                     Rng& rng) const {
  return tree_qs_next(model_, s, asked, mode_, rng);
}

QuestionMask relevant_questions(const GroundTruthImage& img, AssumptionMode mode) {
  StateMatrix s;
  QuestionMask asked;
  while (!asked.full() && !assess(s, mode).terminal()) {
    const Question q = textbook_qs_next(s, asked, mode);
    s.set(q, img.truthful_answer(q));
    asked.insert(q);
  }
  return asked;
}

UnrolledTree unroll_qs_to_tree(const QuestioningStrategy& qs, AssumptionMode mode, int depth,
                               int rollouts, std::uint64_t seed) {
  if (depth < 1) throw InvalidInput("unroll depth must be at least 1");
  if (rollouts < 1) throw InvalidInput("rollouts must be at least 1");
  Rng rng(seed);
  UnrolledTree tree;
  struct Pending {
    int node;
    StateMatrix state;
  };
  std::deque<Pending> queue;

  auto classify = [&](const StateMatrix& s, int d) {
    UnrolledNode n;
    n.depth = d;
    const Decision dec = assess(s, mode);
    if (dec.status == DecisionStatus::Terminal) {
      n.kind = UnrolledNode::Kind::Leaf;
      n.grade = dec.grade;
    } else if (dec.status == DecisionStatus::Inconsistent || s.asked_mask().full()) {
      n.kind = UnrolledNode::Kind::Inconsistent;
    } else if (d > depth) {
      n.kind = UnrolledNode::Kind::Truncated;
    } else {
      n.kind = UnrolledNode::Kind::Question;
    }
    tree.nodes.push_back(n);
    const int id = static_cast<int>(tree.nodes.size()) - 1;
    if (n.kind == UnrolledNode::Kind::Question) queue.push_back({id, s});
    return id;
  };

  classify(StateMatrix{}, 1);
  while (!queue.empty()) {
    const Pending p = queue.front();
    queue.pop_front();
    const QuestionMask asked = p.state.asked_mask();
    Question q;
    if (qs.stochastic()) {
      std::array<int, kNumQuestions> votes{};
      for (int k = 0; k < rollouts; ++k) ++votes[qs.next_question(p.state, asked, rng).index()];
      int best = 0;
      for (int i = 1; i < kNumQuestions; ++i) {
        if (votes[i] > votes[best]) best = i;
      }
      q = Question::from_index(best);
    } else {
      q = qs.next_question(p.state, asked, rng);
    }
    if (asked.contains(q)) {
      throw ContractViolation(qs.name() + " returned already-asked question " + q.label());
    }
    const int d = tree.nodes[p.node].depth;
    tree.nodes[p.node].question = q;
    const int no = classify(p.state.with(q, Response::No), d + 1);
    const int yes = classify(p.state.with(q, Response::Yes), d + 1);
    tree.nodes[p.node].no_child = no;
    tree.nodes[p.node].yes_child = yes;
  }
  return tree;
}

std::string UnrolledTree::to_dot(const std::string& graph_name) const {
  std::ostringstream out;
  out << "digraph \"" << graph_name << "\" {\n";
  out << "  node [fontname=\"Helvetica\"];\n";
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const UnrolledNode& n = nodes[i];
    out << "  n" << i << " [";
    switch (n.kind) {
      case UnrolledNode::Kind::Question:
        out << "shape=box, label=\"" << concept_name(n.question.kind) << "\\n"
            << location_name(n.question.location) << "\"";
        break;
      case UnrolledNode::Kind::Leaf:
        out << "shape=circle, label=\"" << static_cast<int>(n.grade) << "\"";
        break;
      case UnrolledNode::Kind::Inconsistent:
        out << "shape=point, label=\"\"";
        break;
      case UnrolledNode::Kind::Truncated:
        out << "shape=plaintext, label=\"...\"";
        break;
    }
    out << "];\n";
  }
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const UnrolledNode& n = nodes[i];
    if (n.kind != UnrolledNode::Kind::Question) continue;
    out << "  n" << i << " -> n" << n.no_child << " [label=\"No\"];\n";
    out << "  n" << i << " -> n" << n.yes_child << " [label=\"Yes\"];\n";
  }
  out << "}\n";
  return out.str();
}

}  // namespace vtt

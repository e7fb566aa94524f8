#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "vtt/decision_tree.hpp"
#include "vtt/domain.hpp"
#include "vtt/grading.hpp"
#include "vtt/rng.hpp"

namespace vtt {

// Interrogator: maps the current state to the next question. Implementations
// must never return a member of `asked` (masked policy).
class QuestioningStrategy {
 public:
  virtual ~QuestioningStrategy() = default;

  virtual Question next_question(const StateMatrix& s, const QuestionMask& asked,
                                 Rng& rng) const = 0;
  virtual std::string name() const = 0;
  // True when next_question consumes randomness.
  virtual bool stochastic() const { return false; }
};

// Uniform over unasked questions; Exhausted when none remain.
Question random_qs_next(const QuestionMask& asked, Rng& rng);

// Clinical procedure with fixed Q1..Q4 probe order:
//   1. EX@whole
//   2. if exudates (or always, in extra-U-A): FOV quadrants until a Yes
//   3. EX at the fovea quadrant
//   4. same condition as 2: OD quadrants until a Yes
//   5. remaining EX quadrants while the grade is still open
// then any unasked question in canonical order (only reachable with
// contradictory answers). Throws ContractViolation on a terminal state.
Question textbook_qs_next(const StateMatrix& s, const QuestionMask& asked, AssumptionMode mode);

// Follows the tree from the root and returns the first split question that
// has not been asked; falls back to a uniform unasked question once a leaf is
// reached.
Question tree_qs_next(const DecisionTreeModel& model, const StateMatrix& s,
                      const QuestionMask& asked, AssumptionMode mode, Rng& rng);

class RandomStrategy final : public QuestioningStrategy {
 public:
  Question next_question(const StateMatrix& s, const QuestionMask& asked,
                         Rng& rng) const override;
  std::string name() const override { return "random"; }
  bool stochastic() const override { return true; }
};

class TextbookStrategy final : public QuestioningStrategy {
 public:
  explicit TextbookStrategy(AssumptionMode mode) : mode_(mode) {}
  Question next_question(const StateMatrix& s, const QuestionMask& asked,
                         Rng& rng) const override;
  std::string name() const override { return "textbook"; }

 private:
  AssumptionMode mode_;
};

class TreeStrategy final : public QuestioningStrategy {
 public:
  TreeStrategy(DecisionTreeModel model, AssumptionMode mode, std::string name)
      : model_(std::move(model)), mode_(mode), name_(std::move(name)) {}
  Question next_question(const StateMatrix& s, const QuestionMask& asked,
                         Rng& rng) const override;
  std::string name() const override { return name_; }
  bool stochastic() const override { return true; }
  const DecisionTreeModel& model() const { return model_; }

 private:
  DecisionTreeModel model_;
  AssumptionMode mode_;
  std::string name_;
};

// Strategy tree obtained by asking the strategy what it would pose after
// every hypothetical answer sequence.
struct UnrolledNode {
  enum class Kind : std::uint8_t { Question, Leaf, Inconsistent, Truncated };
  Kind kind = Kind::Truncated;
  Question question;         // Kind::Question
  Grade grade = Grade::G0;   // Kind::Leaf
  int depth = 1;
  int no_child = -1;
  int yes_child = -1;
};

struct UnrolledTree {
  std::vector<UnrolledNode> nodes;  // nodes[0] is the root

  // Graphviz: questions as "CONCEPT\nREGION" boxes, leaves as grade-digit
  // circles, left edge No, right edge Yes.
  std::string to_dot(const std::string& graph_name = "qs") const;
};

// Breadth-first expansion down to `depth` question levels. Stochastic
// strategies are summarised by the modal question over `rollouts` draws.
UnrolledTree unroll_qs_to_tree(const QuestioningStrategy& qs, AssumptionMode mode, int depth,
                               int rollouts = 64, std::uint64_t seed = 0);

// Question set of the textbook path for img answered truthfully.
QuestionMask relevant_questions(const GroundTruthImage& img, AssumptionMode mode);

}  // namespace vtt

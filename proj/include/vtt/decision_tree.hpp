#pragma once

#include <array>
#include <span>
#include <vector>

#include "vtt/domain.hpp"
#include "vtt/grading.hpp"

namespace vtt {

struct LabeledState {
  StateMatrix state;
  Grade grade = Grade::G0;
};

struct TreeParams {
  int max_depth = 0;  // 0: unlimited
  int min_samples_leaf = 1;
};

// Binary CART classifier over state entries. Each split sends
// value <= threshold left; thresholds are 0.25 or 0.75.
class DecisionTreeModel {
 public:
  struct Node {
    int feature = -1;  // question index; -1 for leaves
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    Grade prediction = Grade::G0;
    std::array<int, kNumGrades> counts{};

    bool is_leaf() const { return feature < 0; }
  };

  DecisionTreeModel() = default;
  explicit DecisionTreeModel(std::vector<Node> nodes);

  Grade predict(const StateMatrix& s) const;
  const std::vector<Node>& nodes() const { return nodes_; }
  const Node& root() const { return nodes_.front(); }
  int depth() const;  // a single leaf has depth 0
  int leaf_count() const;

 private:
  std::vector<Node> nodes_;
};

// Greedy Gini-minimising tree. A single-class budget yields a single leaf.
// Throws InvalidInput on an empty budget.
DecisionTreeModel train_decision_tree(std::span<const LabeledState> budget,
                                      const TreeParams& params = {});

double gini_impurity(const std::array<int, kNumGrades>& counts);

}  // namespace vtt

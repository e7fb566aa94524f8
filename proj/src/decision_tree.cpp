#include "vtt/decision_tree.hpp"

#include <algorithm>

#include "vtt/errors.hpp"

namespace vtt {

namespace {

constexpr std::array<double, 2> kThresholds = {0.25, 0.75};

Grade majority(const std::array<int, kNumGrades>& counts) {
  int best = 0;
  for (int g = 1; g < kNumGrades; ++g) {
    if (counts[g] > counts[best]) best = g;
  }
  return static_cast<Grade>(best);
}

class Builder {
 public:
  Builder(std::span<const LabeledState> budget, const TreeParams& params)
      : budget_(budget), params_(params) {}

  std::vector<DecisionTreeModel::Node> build() {
    std::vector<int> all(budget_.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = static_cast<int>(i);
    grow(all, 0);
    return std::move(nodes_);
  }

 private:
  std::array<int, kNumGrades> count(const std::vector<int>& idx) const {
    std::array<int, kNumGrades> c{};
    for (int i : idx) ++c[static_cast<int>(budget_[i].grade)];
    return c;
  }

  int grow(const std::vector<int>& idx, int depth) {
    const int id = static_cast<int>(nodes_.size());
    nodes_.emplace_back();
    const auto counts = count(idx);
    nodes_[id].counts = counts;
    nodes_[id].prediction = majority(counts);

    const double parent = gini_impurity(counts);
    if (parent == 0.0 || (params_.max_depth > 0 && depth >= params_.max_depth)) return id;

    const auto n = static_cast<double>(idx.size());
    double best_impurity = parent;
    int best_feature = -1;
    double best_threshold = 0.0;
    for (int f = 0; f < kNumQuestions; ++f) {
      const Question q = Question::from_index(f);
      for (double t : kThresholds) {
        std::array<int, kNumGrades> left{};
        std::array<int, kNumGrades> right{};
        int n_left = 0;
        for (int i : idx) {
          if (budget_[i].state.value(q) <= t) {
            ++left[static_cast<int>(budget_[i].grade)];
            ++n_left;
          } else {
            ++right[static_cast<int>(budget_[i].grade)];
          }
        }
        const int n_right = static_cast<int>(idx.size()) - n_left;
        if (n_left < params_.min_samples_leaf || n_right < params_.min_samples_leaf) continue;
        const double impurity =
            (n_left * gini_impurity(left) + n_right * gini_impurity(right)) / n;
        // Strict improvement; ties keep the lowest (feature, threshold).
        if (impurity < best_impurity - 1e-12) {
          best_impurity = impurity;
          best_feature = f;
          best_threshold = t;
        }
      }
    }
    if (best_feature < 0) return id;

    std::vector<int> left_idx;
    std::vector<int> right_idx;
    const Question q = Question::from_index(best_feature);
    for (int i : idx) {
      (budget_[i].state.value(q) <= best_threshold ? left_idx : right_idx).push_back(i);
    }
    nodes_[id].feature = best_feature;
    nodes_[id].threshold = best_threshold;
    const int l = grow(left_idx, depth + 1);
    const int r = grow(right_idx, depth + 1);
    nodes_[id].left = l;
    nodes_[id].right = r;
    return id;
  }

  std::span<const LabeledState> budget_;
  TreeParams params_;
  std::vector<DecisionTreeModel::Node> nodes_;
};

}  // namespace

double gini_impurity(const std::array<int, kNumGrades>& counts) {
  int total = 0;
  for (int c : counts) total += c;
  if (total == 0) return 0.0;
  double sum_sq = 0.0;
  for (int c : counts) {
    const double p = static_cast<double>(c) / total;
    sum_sq += p * p;
  }
  return 1.0 - sum_sq;
}

DecisionTreeModel::DecisionTreeModel(std::vector<Node> nodes) : nodes_(std::move(nodes)) {
  if (nodes_.empty()) throw InvalidInput("decision tree needs at least one node");
  for (const Node& n : nodes_) {
    if (n.is_leaf()) continue;
    if (n.feature >= kNumQuestions || n.left < 0 || n.right < 0 ||
        n.left >= static_cast<int>(nodes_.size()) || n.right >= static_cast<int>(nodes_.size())) {
      throw InvalidInput("malformed decision tree node");
    }
  }
}

Grade DecisionTreeModel::predict(const StateMatrix& s) const {
  int i = 0;
  while (!nodes_[i].is_leaf()) {
    const Node& n = nodes_[i];
    i = s.value(Question::from_index(n.feature)) <= n.threshold ? n.left : n.right;
  }
  return nodes_[i].prediction;
}

int DecisionTreeModel::depth() const {
  std::vector<int> d(nodes_.size(), 0);
  int deepest = 0;
  // Children are always stored after their parent.
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    deepest = std::max(deepest, d[i]);
    if (!nodes_[i].is_leaf()) {
      d[nodes_[i].left] = d[i] + 1;
      d[nodes_[i].right] = d[i] + 1;
    }
  }
  return deepest;
}

int DecisionTreeModel::leaf_count() const {
  return static_cast<int>(
      std::count_if(nodes_.begin(), nodes_.end(), [](const Node& n) { return n.is_leaf(); }));
}

DecisionTreeModel train_decision_tree(std::span<const LabeledState> budget,
                                      const TreeParams& params) {
  if (budget.empty()) throw InvalidInput("decision tree budget is empty");
  if (params.min_samples_leaf < 1) throw InvalidInput("min_samples_leaf must be >= 1");
  return DecisionTreeModel(Builder(budget, params).build());
}

}  // namespace vtt

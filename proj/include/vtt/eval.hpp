#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "vtt/decision_tree.hpp"
#include "vtt/environment.hpp"

namespace vtt {

struct RewardTable {
  std::array<std::optional<double>, 3> grade_reward;
  std::array<std::optional<double>, 3> grade_questions;
  std::array<int, 3> grade_count{};
  std::optional<double> total_reward;
  std::optional<double> total_questions;
  int total_count = 0;
};

// One episode per image; per-grade means are absent for empty grades.
RewardTable reward_table(const QuestioningStrategy& qs, const Responder& mue,
                         std::span<const GroundTruthImage> images, const EpisodeConfig& cfg,
                         std::uint64_t seed);

// Same, also returning the episodes in image order.
RewardTable reward_table(const QuestioningStrategy& qs, const Responder& mue,
                         std::span<const GroundTruthImage> images, const EpisodeConfig& cfg,
                         std::uint64_t seed, std::vector<Episode>& episodes);

void write_reward_table_header(std::ostream& out);
void write_reward_table_row(std::ostream& out, const std::string& qs, const std::string& mue,
                            const RewardTable& t);

struct BetaPerception {
  double alpha = 1.0;
  double beta = 1.0;

  double mean() const { return alpha / (alpha + beta); }
  friend bool operator==(const BetaPerception&, const BetaPerception&) = default;
};

BetaPerception update_beta(BetaPerception p, bool correct);

inline constexpr int kDefaultGridPoints = 4096;

// Mean over i of KL(p_i || (1/k) sum_j p_j), trapezoid rule on a uniform grid
// over [1e-6, 1 - 1e-6]. Needs at least two perceptions (one gives 0) and
// at least 64 grid points.
double information_radius(std::span<const BetaPerception> perceptions,
                          int grid_points = kDefaultGridPoints);

struct SeparationReport {
  std::vector<std::string> strategies;
  std::vector<std::string> responders;
  long n_u = 0;
  int grid_points = kDefaultGridPoints;
  // [strategy][responder]
  std::vector<std::vector<BetaPerception>> perceptions;
  // Correctness of the first min(N_u, available) question-responses.
  std::vector<std::vector<std::vector<std::uint8_t>>> outcomes;
  std::vector<double> radius;
};

// Every strategy interrogates every responder over `images`. N_u is the
// smallest total question count among the (strategy, responder) runs; each
// perception is updated with the first N_u answers of its run, judged
// against the ground-truth presence grid.
SeparationReport separation_experiment(std::span<const QuestioningStrategy* const> strategies,
                                       std::span<const Responder* const> responders,
                                       std::span<const GroundTruthImage> images,
                                       const EpisodeConfig& cfg, std::uint64_t seed,
                                       int grid_points = kDefaultGridPoints);

// Final states of the terminal episodes of qs on `images` with truthful
// answers, labeled with the true grade: the training budget of a tree QS.
std::vector<LabeledState> tree_budget(const QuestioningStrategy& qs,
                                      std::span<const GroundTruthImage> images,
                                      const EpisodeConfig& cfg, std::uint64_t seed);
// Fraction of the labeled states the tree classifies correctly.
double tree_accuracy(const DecisionTreeModel& model, std::span<const LabeledState> states);

std::string separation_report_json(const SeparationReport& r);
// qs,mue,step,alpha,beta,mean after every update.
void write_beta_curves(std::ostream& out, const SeparationReport& r);

}  // namespace vtt

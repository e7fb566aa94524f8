#include "vtt/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>

#include <json.hpp>

#include "vtt/errors.hpp"

namespace vtt {

namespace {

std::string fixed(std::optional<double> v) {
  if (!v) return "NA";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", *v);
  return buf;
}

double log_beta_density(double x, const BetaPerception& p) {
  return (p.alpha - 1.0) * std::log(x) + (p.beta - 1.0) * std::log1p(-x) +
         std::lgamma(p.alpha + p.beta) - std::lgamma(p.alpha) - std::lgamma(p.beta);
}

}  // namespace

RewardTable reward_table(const QuestioningStrategy& qs, const Responder& mue,
                         std::span<const GroundTruthImage> images, const EpisodeConfig& cfg,
                         std::uint64_t seed, std::vector<Episode>& episodes) {
  if (images.empty()) throw InvalidInput("reward_table needs at least one image");
  std::array<double, 3> reward_sum{};
  std::array<double, 3> question_sum{};
  RewardTable t;
  episodes.clear();
  for (std::size_t i = 0; i < images.size(); ++i) {
    Episode ep = run_episode(qs, mue, images[i], cfg, derive_seed(seed, i));
    const auto g = static_cast<std::size_t>(grade(images[i]));
    reward_sum[g] += ep.return_g;
    question_sum[g] += ep.length();
    ++t.grade_count[g];
    episodes.push_back(std::move(ep));
  }
  double total_reward = 0.0;
  double total_questions = 0.0;
  for (std::size_t g = 0; g < 3; ++g) {
    total_reward += reward_sum[g];
    total_questions += question_sum[g];
    t.total_count += t.grade_count[g];
    if (t.grade_count[g] > 0) {
      t.grade_reward[g] = reward_sum[g] / t.grade_count[g];
      t.grade_questions[g] = question_sum[g] / t.grade_count[g];
    }
  }
  t.total_reward = total_reward / t.total_count;
  t.total_questions = total_questions / t.total_count;
  return t;
}

RewardTable reward_table(const QuestioningStrategy& qs, const Responder& mue,
                         std::span<const GroundTruthImage> images, const EpisodeConfig& cfg,
                         std::uint64_t seed) {
  std::vector<Episode> episodes;
  return reward_table(qs, mue, images, cfg, seed, episodes);
}

void write_reward_table_header(std::ostream& out) {
  out << "qs,mue";
  for (int g = 0; g < 3; ++g) {
    out << ",grade" << g << "_reward,grade" << g << "_questions,grade" << g << "_count";
  }
  out << ",total_reward,total_questions,total_count\n";
}

void write_reward_table_row(std::ostream& out, const std::string& qs, const std::string& mue,
                            const RewardTable& t) {
  out << qs << ',' << mue;
  for (std::size_t g = 0; g < 3; ++g) {
    out << ',' << fixed(t.grade_reward[g]) << ',' << fixed(t.grade_questions[g]) << ','
        << t.grade_count[g];
  }
  out << ',' << fixed(t.total_reward) << ',' << fixed(t.total_questions) << ','
      << t.total_count << '\n';
}

BetaPerception update_beta(BetaPerception p, bool correct) {
  if (correct) {
    p.alpha += 1.0;
  } else {
    p.beta += 1.0;
  }
  return p;
}

double information_radius(std::span<const BetaPerception> perceptions, int grid_points) {
  if (perceptions.empty()) throw InvalidInput("information radius needs perceptions");
  if (grid_points < 64) throw InvalidInput("grid_points must be at least 64");
  for (const auto& p : perceptions) {
    if (!(std::isfinite(p.alpha) && std::isfinite(p.beta) && p.alpha > 0.0 && p.beta > 0.0)) {
      throw NumericFailure("beta perception is not normalizable");
    }
  }
  if (perceptions.size() == 1) return 0.0;

  constexpr double lo = 1e-6;
  constexpr double hi = 1.0 - 1e-6;
  const std::size_t k = perceptions.size();
  const double h = (hi - lo) / (grid_points - 1);
  const double log_k = std::log(static_cast<double>(k));

  std::vector<double> kl(k, 0.0);
  std::vector<double> logp(k);
  for (int j = 0; j < grid_points; ++j) {
    const double x = j + 1 == grid_points ? hi : lo + j * h;
    double top = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < k; ++i) {
      logp[i] = log_beta_density(x, perceptions[i]);
      top = std::max(top, logp[i]);
    }
    double acc = 0.0;
    for (double l : logp) acc += std::exp(l - top);
    const double log_mean = top + std::log(acc) - log_k;
    const double w = (j == 0 || j + 1 == grid_points) ? 0.5 * h : h;
    for (std::size_t i = 0; i < k; ++i) {
      kl[i] += w * std::exp(logp[i]) * (logp[i] - log_mean);
    }
  }
  double sum = 0.0;
  for (double v : kl) sum += v;
  const double r = sum / static_cast<double>(k);
  if (!std::isfinite(r)) throw NumericFailure("information radius is not finite");
  return std::max(r, 0.0);
}

SeparationReport separation_experiment(std::span<const QuestioningStrategy* const> strategies,
                                       std::span<const Responder* const> responders,
                                       std::span<const GroundTruthImage> images,
                                       const EpisodeConfig& cfg, std::uint64_t seed,
                                       int grid_points) {
  if (strategies.empty() || responders.empty()) {
    throw InvalidInput("separation needs at least one strategy and one responder");
  }
  if (images.empty()) throw InvalidInput("separation needs images");
  SeparationReport r;
  r.grid_points = grid_points;
  for (const auto* qs : strategies) r.strategies.push_back(qs->name());
  for (const auto* mue : responders) r.responders.push_back(mue->name());

  std::vector<std::vector<std::vector<std::uint8_t>>> streams(strategies.size());
  long n_u = std::numeric_limits<long>::max();
  for (std::size_t s = 0; s < strategies.size(); ++s) {
    for (std::size_t m = 0; m < responders.size(); ++m) {
      std::vector<std::uint8_t> stream;
      for (std::size_t i = 0; i < images.size(); ++i) {
        const Episode ep =
            run_episode(*strategies[s], *responders[m], images[i], cfg, derive_seed(seed, i));
        for (const auto& t : ep.transitions) {
          stream.push_back(t.answer == images[i].truthful_answer(t.action) ? 1 : 0);
        }
      }
      n_u = std::min(n_u, static_cast<long>(stream.size()));
      streams[s].push_back(std::move(stream));
    }
  }
  r.n_u = n_u;

  for (std::size_t s = 0; s < strategies.size(); ++s) {
    std::vector<BetaPerception> row;
    for (auto& stream : streams[s]) {
      stream.resize(static_cast<std::size_t>(n_u));
      BetaPerception p;
      for (std::uint8_t c : stream) p = update_beta(p, c != 0);
      row.push_back(p);
    }
    r.radius.push_back(information_radius(row, grid_points));
    r.perceptions.push_back(std::move(row));
  }
  r.outcomes = std::move(streams);
  return r;
}

namespace {

class TruthfulResponder final : public Responder {
 public:
  Response answer(const GroundTruthImage& img, Question q) const override {
    return img.truthful_answer(q);
  }
  std::string name() const override { return "groundtruth"; }
};

}  // namespace

std::vector<LabeledState> tree_budget(const QuestioningStrategy& qs,
                                      std::span<const GroundTruthImage> images,
                                      const EpisodeConfig& cfg, std::uint64_t seed) {
  const TruthfulResponder truth;
  std::vector<LabeledState> budget;
  for (std::size_t i = 0; i < images.size(); ++i) {
    const Episode ep = run_episode(qs, truth, images[i], cfg, derive_seed(seed, i));
    if (!ep.reached_terminal()) continue;
    budget.push_back({ep.transitions.back().next_state, grade(images[i])});
  }
  return budget;
}

double tree_accuracy(const DecisionTreeModel& model, std::span<const LabeledState> states) {
  if (states.empty()) throw InvalidInput("no states to classify");
  std::size_t hits = 0;
  for (const auto& ls : states) hits += model.predict(ls.state) == ls.grade ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(states.size());
}

std::string separation_report_json(const SeparationReport& r) {
  nlohmann::ordered_json j;
  j["n_u"] = r.n_u;
  j["grid_points"] = r.grid_points;
  j["responders"] = r.responders;
  auto list = nlohmann::ordered_json::array();
  for (std::size_t s = 0; s < r.strategies.size(); ++s) {
    nlohmann::ordered_json e;
    e["qs"] = r.strategies[s];
    e["radius"] = r.radius[s];
    auto per = nlohmann::ordered_json::array();
    for (std::size_t m = 0; m < r.responders.size(); ++m) {
      const auto& p = r.perceptions[s][m];
      per.push_back({{"mue", r.responders[m]},
                     {"alpha", p.alpha},
                     {"beta", p.beta},
                     {"mean", p.mean()},
                     {"updates", r.outcomes[s][m].size()}});
    }
    e["perceptions"] = std::move(per);
    list.push_back(std::move(e));
  }
  j["strategies"] = std::move(list);
  return j.dump(2) + "\n";
}

void write_beta_curves(std::ostream& out, const SeparationReport& r) {
  out << "qs,mue,step,alpha,beta,mean\n";
  char buf[32];
  for (std::size_t s = 0; s < r.strategies.size(); ++s) {
    for (std::size_t m = 0; m < r.responders.size(); ++m) {
      BetaPerception p;
      const auto& stream = r.outcomes[s][m];
      for (std::size_t k = 0; k < stream.size(); ++k) {
        p = update_beta(p, stream[k] != 0);
        std::snprintf(buf, sizeof buf, "%.6f", p.mean());
        out << r.strategies[s] << ',' << r.responders[m] << ',' << k + 1 << ',' << p.alpha
            << ',' << p.beta << ',' << buf << '\n';
      }
    }
  }
}

}  // namespace vtt

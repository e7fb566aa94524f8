#pragma once

#include <Eigen/Core>
#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "vtt/environment.hpp"
#include "vtt/strategies.hpp"

namespace vtt {

struct NetworkShape {
  int input = kNumQuestions;
  std::vector<int> hidden = {128, 64};
  int output = kNumQuestions;

  friend bool operator==(const NetworkShape&, const NetworkShape&) = default;
};

using QValues = std::array<double, kNumQuestions>;

// Feed-forward action-value approximator: flattened state in, one value per
// question out. ReLU hidden layers, linear output. All parameters live in a
// single flat vector (per layer: column-major weights, then bias).
class QNetwork {
 public:
  QNetwork() : QNetwork(NetworkShape{}, 0) {}
  QNetwork(NetworkShape shape, std::uint64_t seed, bool zero_output_layer = false);

  const NetworkShape& shape() const { return shape_; }
  int layer_count() const { return static_cast<int>(offsets_.size()); }
  Eigen::Index parameter_count() const { return params_.size(); }
  const Eigen::VectorXd& parameters() const { return params_; }
  Eigen::VectorXd& parameters() { return params_; }

  // One column per sample.
  Eigen::MatrixXd forward(const Eigen::MatrixXd& inputs) const;

  // Mean over the batch of (target_i - Q(x_i, a_i))^2.
  double regression_loss(const Eigen::MatrixXd& inputs, std::span<const int> actions,
                         std::span<const double> targets) const;
  // Same loss; writes d loss / d parameters into `gradient`.
  double regression_loss_and_gradient(const Eigen::MatrixXd& inputs,
                                      std::span<const int> actions,
                                      std::span<const double> targets,
                                      Eigen::VectorXd& gradient) const;

 private:
  struct LayerOffset {
    Eigen::Index weights;
    Eigen::Index bias;
    int in;
    int out;
  };
  Eigen::Map<const Eigen::MatrixXd> weights(int layer) const;
  Eigen::Map<const Eigen::VectorXd> bias(int layer) const;

  NetworkShape shape_;
  std::vector<LayerOffset> offsets_;
  Eigen::VectorXd params_;
};

Eigen::VectorXd encode_state(const StateMatrix& s);
Eigen::MatrixXd encode_states(std::span<const StateMatrix> states);

// Throws NumericFailure when any output is not finite.
QValues predict_q(const QNetwork& net, const StateMatrix& s);

// With probability epsilon a uniform unasked question, otherwise the unasked
// argmax (ties to the lowest canonical index). Exhausted when all are asked.
Question greedy_masked_action(const QValues& qvals, const QuestionMask& asked, double epsilon,
                              Rng& rng);

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

class AdamOptimizer {
 public:
  AdamOptimizer(AdamConfig cfg, Eigen::Index parameter_count);
  void step(Eigen::VectorXd& params, const Eigen::VectorXd& gradient);

 private:
  AdamConfig cfg_;
  Eigen::VectorXd m_;
  Eigen::VectorXd v_;
  long t_ = 0;
};

struct PolicyConfig {
  double epsilon = 1.0;
  double epsilon_decay = 0.9;
  double epsilon_floor = 0.1;

  void validate() const;
  double decayed(double current) const;
};

// Fixed-capacity ring buffer; the oldest transition is overwritten first.
class ReplayMemory {
 public:
  explicit ReplayMemory(std::size_t capacity);

  void push(const Transition& t);
  std::size_t size() const { return buffer_.size(); }
  std::size_t capacity() const { return capacity_; }
  bool full() const { return buffer_.size() == capacity_; }
  // Uniform without replacement; everything when fewer than n are stored.
  std::vector<Transition> sample(std::size_t n, Rng& rng) const;
  // Entries from oldest to newest.
  std::vector<Transition> ordered() const;

 private:
  std::size_t capacity_;
  std::size_t next_ = 0;
  std::vector<Transition> buffer_;
};

// Regression batch for one finished episode: (s_t, a_t) against the
// discounted return-to-go, plus the optional terminal tuple with target 0.
struct RegressionBatch {
  std::vector<StateMatrix> states;
  std::vector<int> actions;
  std::vector<double> targets;
};
RegressionBatch mc_batch(const Episode& episode, double gamma);

// R for terminal transitions; otherwise R + gamma * max over the questions
// still unasked in s' (R alone when none remain).
std::vector<double> q_targets(const QNetwork& net, std::span<const Transition> batch,
                              double gamma);
RegressionBatch q_batch(const QNetwork& net, std::span<const Transition> batch, double gamma);

double batch_loss(const QNetwork& net, const RegressionBatch& batch);
double batch_loss_and_gradient(const QNetwork& net, const RegressionBatch& batch,
                               Eigen::VectorXd& gradient);

struct TrainConfig {
  int epochs = 50;
  // Model selection only considers epochs after this one, unless there are
  // no such epochs.
  int burn_in_epochs = 15;
  AdamConfig optimizer;
  NetworkShape shape;
  std::uint64_t seed = 0;

  void validate() const;
};

struct ReplayConfig {
  std::size_t capacity = 500;
  std::size_t minibatch = 8;
};

struct EpochLog {
  int epoch = 0;  // 1-based
  double epsilon = 0.0;
  double validation_reward = 0.0;
  double mean_loss = 0.0;
};

struct TrainResult {
  QNetwork network;  // selected checkpoint
  int best_epoch = 0;
  double best_validation_reward = 0.0;
  std::vector<EpochLog> log;
  std::vector<std::string> warnings;
};

struct TrainingData {
  std::span<const GroundTruthImage> train;
  std::span<const GroundTruthImage> validation;
};

// Policies are trained against truthful answers.
TrainResult train_mc(const TrainingData& data, const TrainConfig& cfg, const PolicyConfig& pol,
                     const EpisodeConfig& env);
TrainResult train_qlearning(const TrainingData& data, const TrainConfig& cfg,
                            const PolicyConfig& pol, const ReplayConfig& replay,
                            const EpisodeConfig& env);

// Greedy masked policy of a trained network.
class RlStrategy final : public QuestioningStrategy {
 public:
  explicit RlStrategy(QNetwork net, double epsilon = 0.0, std::string name = "rl")
      : net_(std::move(net)), epsilon_(epsilon), name_(std::move(name)) {}
  Question next_question(const StateMatrix& s, const QuestionMask& asked,
                         Rng& rng) const override;
  std::string name() const override { return name_; }
  bool stochastic() const override { return epsilon_ > 0.0; }
  const QNetwork& network() const { return net_; }

 private:
  QNetwork net_;
  double epsilon_;
  std::string name_;
};

// Mean greedy-policy return over the images with truthful answers.
double mean_greedy_reward(const QNetwork& net, std::span<const GroundTruthImage> images,
                          const EpisodeConfig& env);

// JSON checkpoint; load validates the format tag, ordering and dimensions
// (SchemaViolation).
std::string checkpoint_to_json(const QNetwork& net);
QNetwork checkpoint_from_json(const std::string& text);
void save_checkpoint(const QNetwork& net, const std::filesystem::path& path);
QNetwork load_checkpoint(const std::filesystem::path& path);

}  // namespace vtt

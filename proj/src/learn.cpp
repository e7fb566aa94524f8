#include "vtt/learn.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "vtt/errors.hpp"

namespace vtt {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

constexpr const char* kCheckpointFormat = "vtt-qnetwork";
constexpr int kCheckpointVersion = 1;
constexpr const char* kOrderingTag = "concept-major(EX,OD,FOV)/location-minor(whole,Q1,Q2,Q3,Q4)";

}  // namespace

QNetwork::QNetwork(NetworkShape shape, std::uint64_t seed, bool zero_output_layer)
    : shape_(std::move(shape)) {
  if (shape_.input < 1 || shape_.output < 1) throw InvalidInput("network dims must be positive");
  std::vector<int> dims;
  dims.push_back(shape_.input);
  for (int h : shape_.hidden) {
    if (h < 1) throw InvalidInput("hidden layer sizes must be positive");
    dims.push_back(h);
  }
  dims.push_back(shape_.output);

  Index offset = 0;
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    LayerOffset lo{offset, offset + Index{dims[l]} * dims[l + 1], dims[l], dims[l + 1]};
    offsets_.push_back(lo);
    offset = lo.bias + dims[l + 1];
  }
  params_ = VectorXd::Zero(offset);

  // Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) for weights and biases.
  Rng rng(seed);
  for (std::size_t l = 0; l < offsets_.size(); ++l) {
    const LayerOffset& lo = offsets_[l];
    if (zero_output_layer && l + 1 == offsets_.size()) break;
    const double bound = 1.0 / std::sqrt(static_cast<double>(lo.in));
    std::uniform_real_distribution<double> u(-bound, bound);
    const Index end = lo.bias + lo.out;
    for (Index i = lo.weights; i < end; ++i) params_[i] = u(rng);
  }
}

Eigen::Map<const MatrixXd> QNetwork::weights(int layer) const {
  const LayerOffset& lo = offsets_[layer];
  return {params_.data() + lo.weights, lo.out, lo.in};
}

Eigen::Map<const VectorXd> QNetwork::bias(int layer) const {
  const LayerOffset& lo = offsets_[layer];
  return {params_.data() + lo.bias, lo.out};
}

MatrixXd QNetwork::forward(const MatrixXd& inputs) const {
  if (inputs.rows() != shape_.input) throw InvalidInput("input has wrong dimension");
  MatrixXd a = inputs;
  for (int l = 0; l < layer_count(); ++l) {
    MatrixXd z = weights(l) * a;
    z.colwise() += bias(l);
    a = (l + 1 < layer_count()) ? MatrixXd(z.cwiseMax(0.0)) : z;
  }
  return a;
}

double QNetwork::regression_loss(const MatrixXd& inputs, std::span<const int> actions,
                                 std::span<const double> targets) const {
  const MatrixXd out = forward(inputs);
  double loss = 0.0;
  for (Index i = 0; i < out.cols(); ++i) {
    const double d = out(actions[i], i) - targets[i];
    loss += d * d;
  }
  return loss / static_cast<double>(out.cols());
}

double QNetwork::regression_loss_and_gradient(const MatrixXd& inputs,
                                              std::span<const int> actions,
                                              std::span<const double> targets,
                                              VectorXd& gradient) const {
  const Index batch = inputs.cols();
  if (batch == 0 || actions.size() != static_cast<std::size_t>(batch) ||
      targets.size() != actions.size()) {
    throw InvalidInput("regression batch sizes disagree");
  }
  std::vector<MatrixXd> activations{inputs};
  std::vector<MatrixXd> pre;
  for (int l = 0; l < layer_count(); ++l) {
    MatrixXd z = weights(l) * activations.back();
    z.colwise() += bias(l);
    pre.push_back(z);
    activations.push_back(l + 1 < layer_count() ? MatrixXd(z.cwiseMax(0.0)) : z);
  }
  const MatrixXd& out = activations.back();
  MatrixXd delta = MatrixXd::Zero(out.rows(), batch);
  double loss = 0.0;
  for (Index i = 0; i < batch; ++i) {
    const double d = out(actions[i], i) - targets[i];
    loss += d * d;
    delta(actions[i], i) = 2.0 * d / static_cast<double>(batch);
  }
  gradient = VectorXd::Zero(params_.size());
  for (int l = layer_count() - 1; l >= 0; --l) {
    const LayerOffset& lo = offsets_[l];
    Eigen::Map<MatrixXd>(gradient.data() + lo.weights, lo.out, lo.in) =
        delta * activations[l].transpose();
    Eigen::Map<VectorXd>(gradient.data() + lo.bias, lo.out) = delta.rowwise().sum();
    if (l > 0) {
      const MatrixXd back = weights(l).transpose() * delta;
      delta = back.cwiseProduct((pre[l - 1].array() > 0.0).cast<double>().matrix());
    }
  }
  return loss / static_cast<double>(batch);
}

VectorXd encode_state(const StateMatrix& s) {
  const auto flat = s.flat();
  return Eigen::Map<const VectorXd>(flat.data(), kNumQuestions);
}

MatrixXd encode_states(std::span<const StateMatrix> states) {
  MatrixXd m(kNumQuestions, static_cast<Index>(states.size()));
  for (std::size_t i = 0; i < states.size(); ++i) m.col(static_cast<Index>(i)) = encode_state(states[i]);
  return m;
}

QValues predict_q(const QNetwork& net, const StateMatrix& s) {
  if (net.shape().output != kNumQuestions || net.shape().input != kNumQuestions) {
    throw InvalidInput("network is not shaped for the question set");
  }
  const MatrixXd out = net.forward(encode_state(s));
  QValues q{};
  for (int i = 0; i < kNumQuestions; ++i) {
    q[i] = out(i, 0);
    if (!std::isfinite(q[i])) throw NumericFailure("non-finite Q-value");
  }
  return q;
}

Question greedy_masked_action(const QValues& qvals, const QuestionMask& asked, double epsilon,
                              Rng& rng) {
  if (asked.full()) throw Exhausted("every question has been asked");
  if (epsilon > 0.0) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    if (u(rng) < epsilon) return random_qs_next(asked, rng);
  }
  int best = -1;
  for (int i = 0; i < kNumQuestions; ++i) {
    if (asked.contains(Question::from_index(i))) continue;
    if (best < 0 || qvals[i] > qvals[best]) best = i;
  }
  return Question::from_index(best);
}

AdamOptimizer::AdamOptimizer(AdamConfig cfg, Index parameter_count)
    : cfg_(cfg), m_(VectorXd::Zero(parameter_count)), v_(VectorXd::Zero(parameter_count)) {}

void AdamOptimizer::step(VectorXd& params, const VectorXd& gradient) {
  ++t_;
  m_ = cfg_.beta1 * m_ + (1.0 - cfg_.beta1) * gradient;
  v_ = cfg_.beta2 * v_ + (1.0 - cfg_.beta2) * gradient.cwiseProduct(gradient);
  const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  params.array() -=
      cfg_.learning_rate * (m_.array() / c1) / ((v_.array() / c2).sqrt() + cfg_.epsilon);
}

void PolicyConfig::validate() const {
  if (!(epsilon >= 0.0 && epsilon <= 1.0)) throw InvalidInput("epsilon must lie in [0, 1]");
  if (!(epsilon_decay > 0.0 && epsilon_decay <= 1.0)) {
    throw InvalidInput("epsilon_decay must lie in (0, 1]");
  }
  if (!(epsilon_floor >= 0.0 && epsilon_floor <= 1.0)) {
    throw InvalidInput("epsilon_floor must lie in [0, 1]");
  }
}

double PolicyConfig::decayed(double current) const {
  return std::max(current * epsilon_decay, epsilon_floor);
}

ReplayMemory::ReplayMemory(std::size_t capacity) : capacity_(capacity) {
  if (capacity == 0) throw InvalidInput("replay capacity must be positive");
  buffer_.reserve(capacity);
}

void ReplayMemory::push(const Transition& t) {
  if (buffer_.size() < capacity_) {
    buffer_.push_back(t);
  } else {
    buffer_[next_] = t;
  }
  next_ = (next_ + 1) % capacity_;
}

std::vector<Transition> ReplayMemory::sample(std::size_t n, Rng& rng) const {
  if (buffer_.size() <= n) return buffer_;
  std::vector<Transition> out;
  out.reserve(n);
  std::sample(buffer_.begin(), buffer_.end(), std::back_inserter(out), n, rng);
  return out;
}

std::vector<Transition> ReplayMemory::ordered() const {
  if (!full()) return buffer_;
  std::vector<Transition> out(buffer_.begin() + static_cast<long>(next_), buffer_.end());
  out.insert(out.end(), buffer_.begin(), buffer_.begin() + static_cast<long>(next_));
  return out;
}

RegressionBatch mc_batch(const Episode& episode, double gamma) {
  RegressionBatch b;
  const auto& tr = episode.transitions;
  std::vector<double> to_go(tr.size());
  double g = 0.0;
  for (std::size_t i = tr.size(); i-- > 0;) {
    g = tr[i].reward + gamma * g;
    to_go[i] = g;
  }
  for (std::size_t i = 0; i < tr.size(); ++i) {
    b.states.push_back(tr[i].state);
    b.actions.push_back(tr[i].action.index());
    b.targets.push_back(to_go[i]);
  }
  if (episode.terminal_tuple) {
    b.states.push_back(episode.terminal_tuple->state);
    b.actions.push_back(episode.terminal_tuple->action.index());
    b.targets.push_back(0.0);
  }
  return b;
}

std::vector<double> q_targets(const QNetwork& net, std::span<const Transition> batch,
                              double gamma) {
  std::vector<double> y(batch.size());
  std::vector<StateMatrix> next;
  std::vector<std::size_t> bootstrap;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    y[i] = batch[i].reward;
    if (!batch[i].terminal && !batch[i].next_state.asked_mask().full()) {
      next.push_back(batch[i].next_state);
      bootstrap.push_back(i);
    }
  }
  if (next.empty()) return y;
  const MatrixXd q = net.forward(encode_states(next));
  for (std::size_t k = 0; k < bootstrap.size(); ++k) {
    const StateMatrix& s = next[k];
    double best = -std::numeric_limits<double>::infinity();
    for (int a = 0; a < kNumQuestions; ++a) {
      if (!s.asked(Question::from_index(a))) best = std::max(best, q(a, static_cast<Index>(k)));
    }
    y[bootstrap[k]] += gamma * best;
  }
  return y;
}

RegressionBatch q_batch(const QNetwork& net, std::span<const Transition> batch, double gamma) {
  RegressionBatch b;
  b.targets = q_targets(net, batch, gamma);
  for (const auto& t : batch) {
    b.states.push_back(t.state);
    b.actions.push_back(t.action.index());
  }
  return b;
}

double batch_loss(const QNetwork& net, const RegressionBatch& batch) {
  return net.regression_loss(encode_states(batch.states), batch.actions, batch.targets);
}

double batch_loss_and_gradient(const QNetwork& net, const RegressionBatch& batch,
                               VectorXd& gradient) {
  return net.regression_loss_and_gradient(encode_states(batch.states), batch.actions,
                                          batch.targets, gradient);
}

void TrainConfig::validate() const {
  if (epochs < 1) throw InvalidInput("epochs must be at least 1");
  if (burn_in_epochs < 0) throw InvalidInput("burn_in_epochs must be non-negative");
  if (!(optimizer.learning_rate > 0.0)) throw InvalidInput("learning rate must be positive");
}

Question RlStrategy::next_question(const StateMatrix& s, const QuestionMask& asked,
                                   Rng& rng) const {
  return greedy_masked_action(predict_q(net_, s), asked, epsilon_, rng);
}

namespace {

// Epsilon-greedy episode against truthful answers. `on_step` sees every
// transition as soon as it happens.
Episode play_episode(const QNetwork& net, const GroundTruthImage& img, double epsilon,
                     const EpisodeConfig& env, Rng& rng,
                     const std::function<void(const Transition&)>& on_step = {}) {
  Episode ep;
  ep.image_id = img.id();
  StateMatrix s;
  QuestionMask asked;
  while (ep.length() < env.max_questions && !asked.full()) {
    const Question q = greedy_masked_action(predict_q(net, s), asked, epsilon, rng);
    Transition t = step(s, asked, q, img.truthful_answer(q), env.mode);
    asked.insert(q);
    s = t.next_state;
    if (on_step) on_step(t);
    const bool done = t.terminal;
    ep.transitions.push_back(std::move(t));
    if (done) {
      ep.diagnosis = assess(s, env.mode).grade;
      break;
    }
  }
  ep.return_g = discounted_return(ep.transitions, env.gamma);
  if (env.include_terminal_tuples && ep.reached_terminal() && !asked.full()) {
    Transition extra;
    extra.state = s;
    extra.action = random_qs_next(asked, rng);
    extra.next_state = s;
    extra.terminal = true;
    ep.terminal_tuple = extra;
  }
  return ep;
}

class Trainer {
 public:
  Trainer(const TrainingData& data, const TrainConfig& cfg, const PolicyConfig& pol,
          const EpisodeConfig& env)
      : data_(data),
        cfg_(cfg),
        pol_(pol),
        env_(env),
        rng_(derive_seed(cfg.seed, "episodes")),
        net_(cfg.shape, derive_seed(cfg.seed, "init")),
        opt_(cfg.optimizer, net_.parameter_count()) {
    cfg_.validate();
    pol_.validate();
    env_.validate();
    if (data_.train.empty()) throw InvalidInput("training split is empty");
  }

  template <typename EpochBody>
  TrainResult run(EpochBody&& body) {
    TrainResult result;
    const bool waive_burn_in = cfg_.epochs <= cfg_.burn_in_epochs;
    if (waive_burn_in) {
      result.warnings.push_back("epochs <= burn-in; selecting over all epochs");
    }
    std::vector<std::size_t> order(data_.train.size());
    std::iota(order.begin(), order.end(), 0);
    double epsilon = pol_.epsilon;
    bool have_best = false;
    for (int epoch = 1; epoch <= cfg_.epochs; ++epoch) {
      std::shuffle(order.begin(), order.end(), rng_);
      double loss_sum = 0.0;
      long updates = 0;
      for (std::size_t i : order) {
        body(data_.train[i], epsilon, loss_sum, updates);
      }
      const double val = data_.validation.empty()
                             ? 0.0
                             : mean_greedy_reward(net_, data_.validation, env_);
      result.log.push_back(
          {epoch, epsilon, val, updates ? loss_sum / static_cast<double>(updates) : 0.0});
      if ((waive_burn_in || epoch > cfg_.burn_in_epochs) &&
          (!have_best || val > result.best_validation_reward)) {
        have_best = true;
        result.best_validation_reward = val;
        result.best_epoch = epoch;
        result.network = net_;
      }
      epsilon = pol_.decayed(epsilon);
    }
    return result;
  }

  void update(const RegressionBatch& batch, double& loss_sum, long& updates) {
    const double loss = batch_loss_and_gradient(net_, batch, grad_);
    if (!std::isfinite(loss) || !grad_.allFinite()) {
      throw NumericFailure("training loss diverged");
    }
    opt_.step(net_.parameters(), grad_);
    loss_sum += loss;
    ++updates;
  }

  const QNetwork& net() const { return net_; }
  Rng& rng() { return rng_; }
  const EpisodeConfig& env() const { return env_; }

 private:
  TrainingData data_;
  TrainConfig cfg_;
  PolicyConfig pol_;
  EpisodeConfig env_;
  Rng rng_;
  QNetwork net_;
  AdamOptimizer opt_;
  VectorXd grad_;
};

}  // namespace

double mean_greedy_reward(const QNetwork& net, std::span<const GroundTruthImage> images,
                          const EpisodeConfig& env) {
  if (images.empty()) return 0.0;
  EpisodeConfig greedy = env;
  greedy.include_terminal_tuples = false;
  Rng unused(0);
  double sum = 0.0;
  for (const auto& img : images) sum += play_episode(net, img, 0.0, greedy, unused).return_g;
  return sum / static_cast<double>(images.size());
}

TrainResult train_mc(const TrainingData& data, const TrainConfig& cfg, const PolicyConfig& pol,
                     const EpisodeConfig& env) {
  Trainer trainer(data, cfg, pol, env);
  return trainer.run([&](const GroundTruthImage& img, double epsilon, double& loss_sum,
                         long& updates) {
    const Episode ep = play_episode(trainer.net(), img, epsilon, trainer.env(), trainer.rng());
    trainer.update(mc_batch(ep, trainer.env().gamma), loss_sum, updates);
  });
}

TrainResult train_qlearning(const TrainingData& data, const TrainConfig& cfg,
                            const PolicyConfig& pol, const ReplayConfig& replay,
                            const EpisodeConfig& env) {
  if (replay.minibatch == 0) throw InvalidInput("minibatch must be positive");
  Trainer trainer(data, cfg, pol, env);
  ReplayMemory memory(replay.capacity);
  return trainer.run([&](const GroundTruthImage& img, double epsilon, double& loss_sum,
                         long& updates) {
    const Episode ep =
        play_episode(trainer.net(), img, epsilon, trainer.env(), trainer.rng(),
                     [&](const Transition& t) {
                       memory.push(t);
                       const auto minibatch = memory.sample(replay.minibatch, trainer.rng());
                       trainer.update(q_batch(trainer.net(), minibatch, trainer.env().gamma),
                                      loss_sum, updates);
                     });
    if (ep.terminal_tuple) memory.push(*ep.terminal_tuple);
  });
}

std::string checkpoint_to_json(const QNetwork& net) {
  nlohmann::ordered_json j;
  j["format"] = kCheckpointFormat;
  j["version"] = kCheckpointVersion;
  j["ordering"] = kOrderingTag;
  j["input"] = net.shape().input;
  j["hidden"] = net.shape().hidden;
  j["output"] = net.shape().output;
  const VectorXd& p = net.parameters();
  j["parameters"] = std::vector<double>(p.data(), p.data() + p.size());
  return j.dump(1) + "\n";
}

QNetwork checkpoint_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw SchemaViolation(std::string("checkpoint is not valid JSON: ") + e.what());
  }
  try {
    if (j.at("format").get<std::string>() != kCheckpointFormat) {
      throw SchemaViolation("checkpoint format tag mismatch");
    }
    if (j.at("version").get<int>() != kCheckpointVersion) {
      throw SchemaViolation("unsupported checkpoint version");
    }
    if (j.at("ordering").get<std::string>() != kOrderingTag) {
      throw SchemaViolation("checkpoint uses a different question ordering");
    }
    NetworkShape shape;
    shape.input = j.at("input").get<int>();
    shape.hidden = j.at("hidden").get<std::vector<int>>();
    shape.output = j.at("output").get<int>();
    if (shape.input != kNumQuestions || shape.output != kNumQuestions) {
      throw SchemaViolation("checkpoint input/output must both be 15");
    }
    const auto params = j.at("parameters").get<std::vector<double>>();
    QNetwork net(shape, 0);
    if (static_cast<Index>(params.size()) != net.parameter_count()) {
      throw SchemaViolation("checkpoint has " + std::to_string(params.size()) +
                            " parameters, architecture needs " +
                            std::to_string(net.parameter_count()));
    }
    net.parameters() = Eigen::Map<const VectorXd>(params.data(), net.parameter_count());
    if (!net.parameters().allFinite()) throw SchemaViolation("checkpoint has non-finite weights");
    return net;
  } catch (const nlohmann::json::exception& e) {
    throw SchemaViolation(std::string("malformed checkpoint: ") + e.what());
  } catch (const InvalidInput& e) {
    throw SchemaViolation(std::string("malformed checkpoint: ") + e.what());
  }
}

void save_checkpoint(const QNetwork& net, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << checkpoint_to_json(net);
}

QNetwork load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw SchemaViolation("cannot open checkpoint " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return checkpoint_from_json(ss.str());
}

}  // namespace vtt

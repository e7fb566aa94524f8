#include <doctest.h>

#include <cmath>
#include <map>
#include <set>

#include "vtt/data.hpp"
#include "vtt/errors.hpp"
#include "vtt/learn.hpp"

using namespace vtt;

namespace {

const NetworkShape kSmall{kNumQuestions, {7, 5}, kNumQuestions};

StateMatrix random_state(Rng& rng) {
  StateMatrix s;
  std::uniform_int_distribution<int> d(0, 2);
  for (int i = 0; i < kNumQuestions; ++i) {
    const int v = d(rng);
    if (v == 1) s.set(Question::from_index(i), Response::No);
    if (v == 2) s.set(Question::from_index(i), Response::Yes);
  }
  return s;
}

RegressionBatch random_batch(Rng& rng, int n) {
  RegressionBatch b;
  std::uniform_int_distribution<int> a(0, kNumQuestions - 1);
  std::uniform_real_distribution<double> y(-1.0, 1.0);
  for (int i = 0; i < n; ++i) {
    b.states.push_back(random_state(rng));
    b.actions.push_back(a(rng));
    b.targets.push_back(y(rng));
  }
  return b;
}

double max_relative_error(const QNetwork& base, const RegressionBatch& b) {
  Eigen::VectorXd grad;
  batch_loss_and_gradient(base, b, grad);
  QNetwork net = base;
  double worst = 0.0;
  const double h = 1e-6;
  for (Eigen::Index i = 0; i < net.parameter_count(); ++i) {
    const double keep = net.parameters()[i];
    net.parameters()[i] = keep + h;
    const double up = batch_loss(net, b);
    net.parameters()[i] = keep - h;
    const double down = batch_loss(net, b);
    net.parameters()[i] = keep;
    const double fd = (up - down) / (2 * h);
    const double denom = std::max({std::abs(fd), std::abs(grad[i]), 1e-3});
    worst = std::max(worst, std::abs(fd - grad[i]) / denom);
  }
  return worst;
}

// Output layer zeroed, output bias set to b_i = i.
QNetwork indexed_bias_net() {
  QNetwork net(kSmall, 3, true);
  auto& p = net.parameters();
  for (int i = 0; i < kNumQuestions; ++i) p[p.size() - kNumQuestions + i] = i;
  return net;
}

const SyntheticResponder kTruth({ResponderKind::Groundtruth, 1.0, 0}, AssumptionMode::SimpleA);

}  // namespace

TEST_CASE("network shape and zero output layer") {
  const QNetwork net(NetworkShape{}, 1, true);
  CHECK(net.parameter_count() == 15 * 128 + 128 + 128 * 64 + 64 + 64 * 15 + 15);
  const QValues q = predict_q(net, StateMatrix{});
  CHECK(q.size() == 15);
  for (double v : q) CHECK(v == 0.0);

  const QNetwork other(NetworkShape{}, 1);
  CHECK(other.parameters() == QNetwork(NetworkShape{}, 1).parameters());
  CHECK(other.parameters() != QNetwork(NetworkShape{}, 2).parameters());
}

TEST_CASE("state encoding") {
  StateMatrix s;
  s.set({Concept::OpticDisc, Location::Q2}, Response::Yes);
  s.set({Concept::Fovea, Location::WholeImage}, Response::No);
  const Eigen::VectorXd x = encode_state(s);
  CHECK(x.size() == 15);
  CHECK(x[7] == 1.0);
  CHECK(x[10] == 0.5);
  CHECK(x.sum() == 1.5);
}

TEST_CASE("regression loss gradient matches finite differences") {
  Rng rng(17);
  for (int trial = 0; trial < 4; ++trial) {
    const QNetwork net(kSmall, 100 + trial);
    const RegressionBatch b = random_batch(rng, 8);
    CHECK(max_relative_error(net, b) <= 1e-4);
  }
}

TEST_CASE("MC and Q batches have correct gradients") {
  DatasetConfig dc;
  const auto images = generate_dataset(dc);
  EpisodeConfig env;
  env.include_terminal_tuples = true;
  const QNetwork net(kSmall, 5);
  const Episode ep = run_episode(RandomStrategy(), kTruth, images[130], env, 2);
  CHECK(max_relative_error(net, mc_batch(ep, env.gamma)) <= 1e-4);
  std::vector<Transition> tr = ep.transitions;
  tr.push_back(*ep.terminal_tuple);
  CHECK(max_relative_error(net, q_batch(net, tr, env.gamma)) <= 1e-4);
}

TEST_CASE("MC targets are discounted returns to go") {
  // five questions to the terminal state
  const auto img = GroundTruthImage::from_quadrants("g2", 0b0001, 0b0010, 0b0001);
  EpisodeConfig env;
  env.include_terminal_tuples = true;
  const Episode ep = run_episode(TextbookStrategy(AssumptionMode::SimpleA), kTruth, img, env, 0);
  const RegressionBatch b = mc_batch(ep, 0.8);
  REQUIRE(b.targets.size() == 6);
  const double expect[] = {0.4096, 0.512, 0.64, 0.8, 1.0, 0.0};
  for (int i = 0; i < 6; ++i) CHECK(b.targets[i] == doctest::Approx(expect[i]));
  CHECK(b.actions[0] == Question{Concept::HardExudate, Location::WholeImage}.index());

  env.include_terminal_tuples = false;
  const Episode plain =
      run_episode(TextbookStrategy(AssumptionMode::SimpleA), kTruth, img, env, 0);
  CHECK(mc_batch(plain, 0.8).targets.size() == 5);
}

TEST_CASE("Q targets") {
  const QNetwork net = indexed_bias_net();
  Transition terminal;
  terminal.reward = 1;
  terminal.terminal = true;

  Transition open;
  open.reward = 0;
  open.next_state.set(Question::from_index(14), Response::No);
  open.next_state.set(Question::from_index(0), Response::Yes);

  Transition repeat = open;
  repeat.reward = -1;

  Transition all_asked;
  for (int i = 0; i < kNumQuestions; ++i) all_asked.next_state.set(Question::from_index(i), Response::No);

  const std::vector<Transition> batch{terminal, open, repeat, all_asked};
  const auto y = q_targets(net, batch, 0.8);
  CHECK(y[0] == 1.0);
  CHECK(y[1] == doctest::Approx(0.8 * 13));
  CHECK(y[2] == doctest::Approx(-1 + 0.8 * 13));
  CHECK(y[3] == 0.0);
}

TEST_CASE("masked greedy action") {
  Rng rng(1);
  QValues q{};
  q[3] = 2.0;
  q[9] = 5.0;
  QuestionMask asked;
  CHECK(greedy_masked_action(q, asked, 0.0, rng).index() == 9);
  asked.insert(Question::from_index(9));
  CHECK(greedy_masked_action(q, asked, 0.0, rng).index() == 3);

  QValues flat{};
  flat.fill(0.25);
  QuestionMask none;
  none.insert(Question::from_index(0));
  CHECK(greedy_masked_action(flat, none, 0.0, rng).index() == 1);

  // a large value on an asked question never wins
  QValues big{};
  big[0] = 1e9;
  CHECK(greedy_masked_action(big, none, 0.0, rng).index() == 1);

  QuestionMask full;
  for (int i = 0; i < kNumQuestions; ++i) full.insert(Question::from_index(i));
  CHECK_THROWS_AS(greedy_masked_action(q, full, 0.0, rng), Exhausted);
  CHECK_THROWS_AS(greedy_masked_action(q, full, 1.0, rng), Exhausted);
}

TEST_CASE("epsilon one is uniform over unasked questions") {
  Rng rng(8);
  QValues q{};
  q[4] = 10.0;
  QuestionMask asked;
  for (int i : {0, 2, 4, 6, 8}) asked.insert(Question::from_index(i));
  std::map<int, int> hits;
  const int n = 30000;
  for (int k = 0; k < n; ++k) ++hits[greedy_masked_action(q, asked, 1.0, rng).index()];
  CHECK(hits.size() == 10);
  for (const auto& [idx, c] : hits) {
    CHECK_FALSE(asked.contains(Question::from_index(idx)));
    CHECK(std::abs(c - n / 10.0) < 0.1 * n / 10.0);
  }
}

TEST_CASE("greedy choice ignores positive scaling and shifts of the values") {
  Rng rng(4);
  Rng qrng(5);
  std::uniform_real_distribution<double> u(-3, 3);
  for (int t = 0; t < 200; ++t) {
    QValues q;
    for (double& v : q) v = u(qrng);
    QValues scaled;
    for (int i = 0; i < kNumQuestions; ++i) scaled[i] = 3.5 * q[i] - 2.0;
    const StateMatrix s = random_state(qrng);
    if (s.asked_count() == kNumQuestions) continue;
    CHECK(greedy_masked_action(q, s.asked_mask(), 0.0, rng) ==
          greedy_masked_action(scaled, s.asked_mask(), 0.0, rng));
  }
}

TEST_CASE("Adam") {
  Eigen::VectorXd p = Eigen::VectorXd::Zero(3);
  Eigen::VectorXd g(3);
  g << 4.0, -0.01, 0.0;
  AdamOptimizer opt(AdamConfig{}, 3);
  opt.step(p, g);
  // bias-corrected first step moves by the learning rate against the sign
  CHECK(p[0] == doctest::Approx(-1e-3).epsilon(1e-6));
  CHECK(p[1] == doctest::Approx(1e-3).epsilon(1e-4));
  CHECK(p[2] == 0.0);

  // minimizes a quadratic
  Eigen::VectorXd x = Eigen::VectorXd::Constant(2, 3.0);
  AdamOptimizer fast(AdamConfig{0.05}, 2);
  for (int i = 0; i < 2000; ++i) {
    Eigen::VectorXd grad = 2.0 * (x - Eigen::VectorXd::Constant(2, 1.0));
    fast.step(x, grad);
  }
  CHECK(x[0] == doctest::Approx(1.0).epsilon(1e-3));
}

TEST_CASE("epsilon schedule") {
  PolicyConfig pol;
  pol.validate();
  double e = pol.epsilon;
  e = pol.decayed(e);
  CHECK(e == doctest::Approx(0.9));
  e = pol.decayed(e);
  CHECK(e == doctest::Approx(0.81));
  for (int i = 0; i < 40; ++i) e = pol.decayed(e);
  CHECK(e == 0.1);

  pol.epsilon = 1.5;
  CHECK_THROWS_AS(pol.validate(), InvalidInput);
  pol = PolicyConfig{};
  pol.epsilon_decay = 0.0;
  CHECK_THROWS_AS(pol.validate(), InvalidInput);
}

TEST_CASE("replay memory") {
  ReplayMemory mem(500);
  CHECK(mem.capacity() == 500);
  for (int i = 0; i < 501; ++i) {
    Transition t;
    t.reward = 0;
    t.state.set(Question::from_index(i % 15), Response::Yes);
    t.next_state = t.state;
    t.answer = Response::Yes;
    // tag each entry through the action of its index
    t.action = Question::from_index(i % 15);
    t.terminal = i == 0;
    mem.push(t);
  }
  CHECK(mem.size() == 500);
  CHECK(mem.full());
  const auto ordered = mem.ordered();
  // entry 0 (the only terminal one) was evicted; entry 1 is now the oldest
  for (const auto& t : ordered) CHECK_FALSE(t.terminal);
  CHECK(ordered.front().action.index() == 1);
  CHECK(ordered.back().action.index() == 500 % 15);

  ReplayMemory small(20);
  for (int i = 0; i < 20; ++i) {
    Transition t;
    t.reward = i;  // distinct tag
    small.push(t);
  }
  Rng rng(3);
  for (int k = 0; k < 100; ++k) {
    const auto s = small.sample(8, rng);
    REQUIRE(s.size() == 8);
    std::set<int> tags;
    for (const auto& t : s) tags.insert(t.reward);
    CHECK(tags.size() == 8);
  }
  CHECK(small.sample(50, rng).size() == 20);
  CHECK_THROWS(ReplayMemory(0));
}

TEST_CASE("training with one epoch waives burn-in") {
  DatasetConfig dc;
  const auto images = generate_dataset(dc);
  const std::span<const GroundTruthImage> all(images);
  TrainingData data{all.subspan(0, 60), all.subspan(60, 20)};
  TrainConfig cfg;
  cfg.epochs = 1;
  cfg.seed = 9;
  EpisodeConfig env;
  const TrainResult r = train_mc(data, cfg, PolicyConfig{}, env);
  CHECK(r.best_epoch == 1);
  REQUIRE(r.warnings.size() == 1);
  CHECK(r.log.size() == 1);
  CHECK(r.log[0].epsilon == 1.0);

  cfg.epochs = 3;
  cfg.burn_in_epochs = 1;
  const TrainResult q = train_qlearning(data, cfg, PolicyConfig{}, ReplayConfig{}, env);
  CHECK(q.warnings.empty());
  CHECK(q.best_epoch >= 2);
  REQUIRE(q.log.size() == 3);
  CHECK(q.log[1].epsilon == doctest::Approx(0.9));
  CHECK(q.best_validation_reward ==
        doctest::Approx(mean_greedy_reward(q.network, data.validation, env)));

  const TrainResult again = train_qlearning(data, cfg, PolicyConfig{}, ReplayConfig{}, env);
  CHECK(again.network.parameters() == q.network.parameters());
  for (std::size_t i = 0; i < q.log.size(); ++i) {
    CHECK(again.log[i].mean_loss == q.log[i].mean_loss);
  }

  cfg.epochs = 0;
  CHECK_THROWS_AS(train_mc(data, cfg, PolicyConfig{}, env), InvalidInput);
}

TEST_CASE("MC learning beats random questioning") {
  DatasetConfig dc;
  dc.seed = 4;
  const auto images = generate_dataset(dc);
  const std::span<const GroundTruthImage> all(images);
  TrainingData data{all.subspan(0, 120), all.subspan(120, 20)};
  TrainConfig cfg;
  cfg.epochs = 40;
  cfg.seed = 1;
  EpisodeConfig env;
  const TrainResult r = train_mc(data, cfg, PolicyConfig{}, env);
  const auto test = all.subspan(140);
  const double rl = mean_greedy_reward(r.network, test, env);
  double random = 0.0;
  for (std::size_t i = 0; i < test.size(); ++i) {
    random += run_episode(RandomStrategy(), kTruth, test[i], env, i).return_g;
  }
  random /= static_cast<double>(test.size());
  CHECK(rl > random);
  CHECK(r.best_epoch > cfg.burn_in_epochs);
}

TEST_CASE("checkpoint round trip and rejections") {
  const QNetwork net(kSmall, 21);
  const std::string text = checkpoint_to_json(net);
  const QNetwork back = checkpoint_from_json(text);
  CHECK(back.shape() == net.shape());
  CHECK(back.parameters() == net.parameters());
  CHECK(checkpoint_to_json(back) == text);

  auto replace = [&](const std::string& from, const std::string& to) {
    std::string t = text;
    const auto pos = t.find(from);
    REQUIRE(pos != std::string::npos);
    t.replace(pos, from.size(), to);
    return t;
  };
  CHECK_THROWS_AS(checkpoint_from_json(replace("vtt-qnetwork", "other")), SchemaViolation);
  CHECK_THROWS_AS(checkpoint_from_json(replace("\"version\": 1", "\"version\": 2")),
                  SchemaViolation);
  CHECK_THROWS_AS(checkpoint_from_json(replace("concept-major", "location-major")),
                  SchemaViolation);
  CHECK_THROWS_AS(checkpoint_from_json(replace("\"input\": 15", "\"input\": 14")),
                  SchemaViolation);
  CHECK_THROWS_AS(checkpoint_from_json("{"), SchemaViolation);
  CHECK_THROWS_AS(load_checkpoint("/nonexistent/checkpoint.json"), SchemaViolation);
}

TEST_CASE("RL strategy is masked and deterministic when greedy") {
  const RlStrategy qs(indexed_bias_net());
  CHECK_FALSE(qs.stochastic());
  Rng rng(0);
  StateMatrix s;
  s.set(Question::from_index(14), Response::No);
  CHECK(qs.next_question(s, s.asked_mask(), rng).index() == 13);
  CHECK(RlStrategy(indexed_bias_net(), 0.1).stochastic());
}

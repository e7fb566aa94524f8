#include "vtt/cli.hpp"

#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>
#include <set>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "vtt/errors.hpp"
#include "vtt/strategies.hpp"

namespace vtt::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Walks a JSON object while remembering where it is, so that every
// validation message can name the offending path.
class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) fail("expected an object");
  }

  void allow(std::initializer_list<const char*> keys) const {
    const std::set<std::string> ok(keys.begin(), keys.end());
    for (const auto& [k, v] : j_.items()) {
      if (!ok.count(k)) throw ConfigError(path_ + "." + k + ": unknown key");
    }
  }

  bool has(const char* key) const { return j_.contains(key) && !j_.at(key).is_null(); }
  std::string at(const char* key) const { return path_ + "." + key; }
  const json& raw(const char* key) const { return j_.at(key); }
  Section sub(const char* key) const { return {j_.at(key), at(key)}; }

  template <typename T>
  void read(const char* key, T& out) const {
    if (!has(key)) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const json::exception&) {
      throw ConfigError(at(key) + ": wrong type");
    }
  }

  [[noreturn]] void fail(const std::string& msg) const { throw ConfigError(path_ + ": " + msg); }

 private:
  const json& j_;
  std::string path_;
};

template <typename F>
void check(const std::string& path, F&& validate) {
  try {
    validate();
  } catch (const InvalidInput& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

void read_data(const Section& d, RunConfig& cfg) {
  d.allow({"n_images", "grade_mix", "ex_quadrant_rate", "od_two_quadrant_rate", "annotations",
           "split"});
  d.read("n_images", cfg.data.n_images);
  d.read("grade_mix", cfg.data.grade_mix);
  d.read("ex_quadrant_rate", cfg.data.ex_quadrant_rate);
  d.read("od_two_quadrant_rate", cfg.data.od_two_quadrant_rate);
  check("$.data", [&] { cfg.data.validate(); });
  if (d.has("annotations")) {
    std::string p;
    d.read("annotations", p);
    if (!fs::exists(p)) throw ConfigError(d.at("annotations") + ": file does not exist: " + p);
    cfg.annotations = p;
  }
  if (d.has("split")) {
    const Section s = d.sub("split");
    s.allow({"train", "validation", "test"});
    s.read("train", cfg.split.train);
    s.read("validation", cfg.split.validation);
    s.read("test", cfg.split.test);
    check(d.at("split"), [&] { cfg.split.validate(); });
  }
}

void read_environment(const Section& e, RunConfig& cfg) {
  e.allow({"gamma", "max_questions", "include_terminal_tuples"});
  e.read("gamma", cfg.environment.gamma);
  e.read("max_questions", cfg.environment.max_questions);
  if (e.has("include_terminal_tuples")) {
    bool flag = false;
    e.read("include_terminal_tuples", flag);
    cfg.terminal_tuples = flag;
  }
  check("$.environment", [&] { cfg.environment.validate(); });
}

void read_training(const Section& t, RunConfig& cfg) {
  t.allow({"scheme", "epochs", "burn_in_epochs", "replay_capacity", "minibatch", "epsilon",
           "epsilon_decay", "epsilon_floor", "learning_rate", "optimizer", "hidden", "seed",
           "repetitions"});
  if (t.has("scheme")) {
    std::string s;
    t.read("scheme", s);
    if (s == "mc") {
      cfg.scheme = Scheme::MonteCarlo;
    } else if (s == "q") {
      cfg.scheme = Scheme::QLearning;
    } else {
      throw ConfigError(t.at("scheme") + ": expected \"mc\" or \"q\"");
    }
  }
  t.read("epochs", cfg.training.epochs);
  t.read("burn_in_epochs", cfg.training.burn_in_epochs);
  t.read("replay_capacity", cfg.replay.capacity);
  t.read("minibatch", cfg.replay.minibatch);
  t.read("epsilon", cfg.policy.epsilon);
  t.read("epsilon_decay", cfg.policy.epsilon_decay);
  t.read("epsilon_floor", cfg.policy.epsilon_floor);
  t.read("learning_rate", cfg.training.optimizer.learning_rate);
  if (t.has("optimizer")) {
    const Section o = t.sub("optimizer");
    o.allow({"learning_rate", "beta1", "beta2", "epsilon"});
    o.read("learning_rate", cfg.training.optimizer.learning_rate);
    o.read("beta1", cfg.training.optimizer.beta1);
    o.read("beta2", cfg.training.optimizer.beta2);
    o.read("epsilon", cfg.training.optimizer.epsilon);
    const auto& a = cfg.training.optimizer;
    if (!(a.beta1 >= 0.0 && a.beta1 < 1.0 && a.beta2 >= 0.0 && a.beta2 < 1.0 && a.epsilon > 0.0)) {
      throw ConfigError(o.at("beta1") + ": Adam needs betas in [0, 1) and epsilon > 0");
    }
  }
  if (t.has("seed")) {
    std::uint64_t seed = 0;
    t.read("seed", seed);
    cfg.training_seed = seed;
  }
  t.read("hidden", cfg.training.shape.hidden);
  t.read("repetitions", cfg.repetitions);
  check("$.training", [&] {
    cfg.training.validate();
    cfg.policy.validate();
  });
  for (int h : cfg.training.shape.hidden) {
    if (h < 1) throw ConfigError(t.at("hidden") + ": layer sizes must be positive");
  }
  if (cfg.replay.capacity < 1) throw ConfigError(t.at("replay_capacity") + ": must be >= 1");
  if (cfg.replay.minibatch < 1) throw ConfigError(t.at("minibatch") + ": must be >= 1");
  if (cfg.repetitions < 1) throw ConfigError(t.at("repetitions") + ": must be >= 1");
}

void read_responders(const json& list, RunConfig& cfg) {
  if (!list.is_array()) throw ConfigError("$.responders: expected an array");
  cfg.responders.clear();
  for (std::size_t i = 0; i < list.size(); ++i) {
    const Section r(list[i], "$.responders[" + std::to_string(i) + "]");
    r.allow({"kind", "accuracy", "seed"});
    ResponderSpec spec;
    std::string kind;
    if (!r.has("kind")) r.fail("missing \"kind\"");
    r.read("kind", kind);
    const auto k = parse_responder_kind(kind);
    if (!k) throw ConfigError(r.at("kind") + ": unknown responder kind \"" + kind + "\"");
    spec.kind = *k;
    spec.accuracy = spec.kind == ResponderKind::Groundtruth ? 1.0 : 0.7;
    r.read("accuracy", spec.accuracy);
    if (!(spec.accuracy >= 0.0 && spec.accuracy <= 1.0)) {
      throw ConfigError(r.at("accuracy") + ": must lie in [0, 1]");
    }
    spec.seed = derive_seed(eval_seed(cfg), "responder/" + std::to_string(i));
    r.read("seed", spec.seed);
    cfg.responders.push_back(spec);
  }
}

const std::set<std::string> kKnownQs = {"random", "textbook", "dt-rb", "dt-tb", "rl"};

void read_evaluation(const Section& e, RunConfig& cfg) {
  e.allow({"qs", "grid_points", "rollouts"});
  e.read("qs", cfg.qs);
  for (std::size_t i = 0; i < cfg.qs.size(); ++i) {
    if (!kKnownQs.count(cfg.qs[i])) {
      throw ConfigError(e.at("qs") + "[" + std::to_string(i) + "]: unknown strategy \"" +
                        cfg.qs[i] + "\"");
    }
  }
  e.read("grid_points", cfg.grid_points);
  if (cfg.grid_points < 64) throw ConfigError(e.at("grid_points") + ": must be >= 64");
  e.read("rollouts", cfg.rollouts);
  if (cfg.rollouts < 1) throw ConfigError(e.at("rollouts") + ": must be >= 1");
}

void set_defaults(RunConfig& cfg) {
  cfg.responders = {{ResponderKind::Random, 0.7, 0},
                    {ResponderKind::Reasonable, 0.7, 0},
                    {ResponderKind::Unreasonable, 0.7, 0}};
  for (std::size_t i = 0; i < cfg.responders.size(); ++i) {
    cfg.responders[i].seed = derive_seed(eval_seed(cfg), "responder/" + std::to_string(i));
  }
  cfg.qs = {"random", "textbook", "dt-rb", "dt-tb", "rl"};
}

std::string sanitize(const std::string& s) {
  std::string out;
  for (char c : s) {
    const bool keep = std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '.';
    out += keep ? c : '_';
  }
  while (!out.empty() && out.back() == '_') out.pop_back();
  return out;
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

void write_file(const fs::path& path, const std::string& content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << content;
}

}  // namespace

Workspace load_workspace(const RunConfig& cfg) {
  Workspace w;
  if (cfg.annotations) {
    w.images = load_annotations(*cfg.annotations);
  } else {
    DatasetConfig d = cfg.data;
    d.seed = data_seed(cfg);
    w.images = generate_dataset(d);
  }
  w.split = split_dataset(w.images, cfg.split, derive_seed(data_seed(cfg), "split"));
  for (const auto& msg : w.split.warnings) std::cerr << "warning: " << msg << '\n';
  return w;
}

namespace {

// checkpoint.json holds the repetition with the best validation reward;
// every repetition is also kept as checkpoint_rep<k>.json.
fs::path checkpoint_path(const RunConfig& cfg, std::optional<int> rep = std::nullopt) {
  if (!rep) return cfg.output_dir / "checkpoint.json";
  return cfg.output_dir / ("checkpoint_rep" + std::to_string(*rep) + ".json");
}

std::unique_ptr<QuestioningStrategy> make_strategy(const std::string& name, const RunConfig& cfg,
                                                   const Workspace& w) {
  const AssumptionMode mode = cfg.environment.mode;
  if (name == "random") return std::make_unique<RandomStrategy>();
  if (name == "textbook") return std::make_unique<TextbookStrategy>(mode);
  if (name == "dt-rb" || name == "dt-tb") {
    std::unique_ptr<QuestioningStrategy> source;
    if (name == "dt-rb") {
      source = std::make_unique<RandomStrategy>();
    } else {
      source = std::make_unique<TextbookStrategy>(mode);
    }
    const auto budget =
        tree_budget(*source, w.split.train, cfg.environment, derive_seed(train_seed(cfg), name));
    if (budget.empty()) throw SchemaViolation("no terminal episodes to train " + name);
    return std::make_unique<TreeStrategy>(train_decision_tree(budget), mode, name);
  }
  if (name == "rl") {
    const fs::path p = checkpoint_path(cfg);
    if (!fs::exists(p)) throw SchemaViolation("missing checkpoint " + p.string() + "; run train first");
    return std::make_unique<RlStrategy>(load_checkpoint(p), 0.0, "rl");
  }
  throw ConfigError("unknown strategy " + name);
}

std::vector<std::unique_ptr<Responder>> make_responders(const RunConfig& cfg,
                                                        const Workspace& w) {
  std::vector<std::unique_ptr<Responder>> out;
  for (const auto& spec : cfg.responders) {
    out.push_back(std::make_unique<SyntheticResponder>(spec, cfg.environment.mode, w.images));
  }
  if (out.empty()) throw ConfigError("$.responders: at least one responder is required");
  return out;
}

int cmd_generate(const RunConfig& cfg, bool force) {
  const fs::path ann = cfg.output_dir / "annotations.csv";
  const fs::path splits = cfg.output_dir / "splits.csv";
  if (!force && (fs::exists(ann) || fs::exists(splits))) {
    std::cerr << "error: " << cfg.output_dir.string()
              << " already holds a dataset; pass --force to overwrite\n";
    return kDataError;
  }
  const Workspace w = load_workspace(cfg);
  std::ostringstream a;
  save_annotations(w.images, a);
  write_file(ann, a.str());
  std::ostringstream s;
  s << "image_id,split\n";
  for (const auto& img : w.split.train) s << img.id() << ",train\n";
  for (const auto& img : w.split.validation) s << img.id() << ",validation\n";
  for (const auto& img : w.split.test) s << img.id() << ",test\n";
  write_file(splits, s.str());
  const auto c = count_grades(w.images);
  std::cout << "generated " << w.images.size() << " images (grades " << c[0] << '/' << c[1]
            << '/' << c[2] << "); split " << w.split.train.size() << '/'
            << w.split.validation.size() << '/' << w.split.test.size() << '\n';
  return kOk;
}

int cmd_train(const RunConfig& cfg) {
  const Workspace w = load_workspace(cfg);
  const TrainingData data{w.split.train, w.split.validation};
  std::ostringstream log;
  log << "repetition,epoch,epsilon,validation_reward,mean_loss\n";
  int best_rep = -1;
  double best_reward = 0.0;
  std::optional<QNetwork> best;
  for (int rep = 0; rep < cfg.repetitions; ++rep) {
    TrainConfig tc = cfg.training;
    tc.seed = derive_seed(train_seed(cfg), static_cast<std::uint64_t>(rep));
    TrainResult r = cfg.scheme == Scheme::MonteCarlo
                        ? train_mc(data, tc, cfg.policy, cfg.environment)
                        : train_qlearning(data, tc, cfg.policy, cfg.replay, cfg.environment);
    for (const auto& msg : r.warnings) std::cerr << "warning: " << msg << '\n';
    for (const auto& e : r.log) {
      log << rep << ',' << e.epoch << ',' << fmt(e.epsilon) << ',' << fmt(e.validation_reward)
          << ',' << fmt(e.mean_loss) << '\n';
    }
    write_file(checkpoint_path(cfg, rep), checkpoint_to_json(r.network));
    std::cout << "repetition " << rep << ": best epoch " << r.best_epoch
              << ", validation reward " << fmt(r.best_validation_reward) << '\n';
    if (best_rep < 0 || r.best_validation_reward > best_reward) {
      best_rep = rep;
      best_reward = r.best_validation_reward;
      best = std::move(r.network);
    }
  }
  write_file(checkpoint_path(cfg), checkpoint_to_json(*best));
  std::cout << "selected repetition " << best_rep << '\n';
  write_file(cfg.output_dir / "training_log.csv", log.str());
  return kOk;
}

int cmd_evaluate(const RunConfig& cfg) {
  const Workspace w = load_workspace(cfg);
  const auto responders = make_responders(cfg, w);
  std::ostringstream table;
  write_reward_table_header(table);
  for (const auto& qs_name : cfg.qs) {
    const auto qs = make_strategy(qs_name, cfg, w);
    for (const auto& mue : responders) {
      std::vector<Episode> episodes;
      const RewardTable t =
          reward_table(*qs, *mue, w.split.test, cfg.environment,
                       derive_seed(eval_seed(cfg), "rewards/" + qs_name), episodes);
      write_reward_table_row(table, qs_name, mue->name(), t);
      std::ostringstream per;
      per << "image_id,grade,return,questions,diagnosis\n";
      for (std::size_t i = 0; i < episodes.size(); ++i) {
        const auto& ep = episodes[i];
        per << ep.image_id << ',' << static_cast<int>(grade(w.split.test[i])) << ','
            << fmt(ep.return_g) << ',' << ep.length() << ',';
        if (ep.diagnosis) {
          per << static_cast<int>(*ep.diagnosis);
        } else {
          per << "NA";
        }
        per << '\n';
      }
      write_file(cfg.output_dir / ("rewards_" + sanitize(qs_name) + "__" +
                                   sanitize(mue->name()) + ".csv"),
                 per.str());
    }
  }
  write_file(cfg.output_dir / "reward_table.csv", table.str());
  std::cout << table.str();
  return kOk;
}

int cmd_separate(const RunConfig& cfg) {
  const Workspace w = load_workspace(cfg);
  const auto responders = make_responders(cfg, w);
  std::vector<std::unique_ptr<QuestioningStrategy>> owned;
  std::vector<const QuestioningStrategy*> qs;
  for (const auto& name : cfg.qs) {
    owned.push_back(make_strategy(name, cfg, w));
    qs.push_back(owned.back().get());
  }
  std::vector<const Responder*> mues;
  for (const auto& m : responders) mues.push_back(m.get());
  const SeparationReport r =
      separation_experiment(qs, mues, w.split.test, cfg.environment,
                            derive_seed(eval_seed(cfg), "separation"), cfg.grid_points);
  write_file(cfg.output_dir / "separation.json", separation_report_json(r));
  std::ostringstream curves;
  write_beta_curves(curves, r);
  write_file(cfg.output_dir / "beta_curves.csv", curves.str());
  std::cout << "N_u = " << r.n_u << '\n';
  for (std::size_t s = 0; s < r.strategies.size(); ++s) {
    std::cout << r.strategies[s] << ": radius " << fmt(r.radius[s]) << '\n';
  }
  return kOk;
}

int cmd_export_tree(const RunConfig& cfg, const std::string& qs_name, int depth) {
  if (!kKnownQs.count(qs_name)) throw ConfigError("--qs: unknown strategy \"" + qs_name + "\"");
  if (depth < 1) throw ConfigError("--depth: must be >= 1");
  const Workspace w = load_workspace(cfg);
  const auto qs = make_strategy(qs_name, cfg, w);
  const UnrolledTree tree = unroll_qs_to_tree(*qs, cfg.environment.mode, depth, cfg.rollouts,
                                              derive_seed(eval_seed(cfg), "unroll"));
  const fs::path out = cfg.output_dir / ("tree_" + sanitize(qs_name) + ".dot");
  write_file(out, tree.to_dot(sanitize(qs_name)));
  std::cout << "wrote " << out.string() << " (" << tree.nodes.size() << " nodes)\n";
  return kOk;
}

}  // namespace

std::uint64_t data_seed(const RunConfig& cfg) { return derive_seed(cfg.seed, "data"); }
std::uint64_t train_seed(const RunConfig& cfg) {
  return cfg.training_seed.value_or(derive_seed(cfg.seed, "train"));
}
std::uint64_t eval_seed(const RunConfig& cfg) { return derive_seed(cfg.seed, "eval"); }

RunConfig parse_run_config(const std::string& json_text,
                           std::optional<std::uint64_t> seed_override) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("$: invalid JSON: ") + e.what());
  }
  const Section root(j, "$");
  root.allow({"seed", "output_dir", "mode", "data", "environment", "training", "responders",
              "evaluation"});
  RunConfig cfg;
  root.read("seed", cfg.seed);
  if (seed_override) cfg.seed = *seed_override;
  if (root.has("output_dir")) {
    std::string out;
    root.read("output_dir", out);
    cfg.output_dir = out;
  }
  if (root.has("mode")) {
    std::string m;
    root.read("mode", m);
    const auto mode = parse_mode(m);
    if (!mode) throw ConfigError("$.mode: expected \"simple-A\" or \"extra-U-A\"");
    cfg.environment.mode = *mode;
  }
  set_defaults(cfg);
  if (root.has("data")) read_data(root.sub("data"), cfg);
  if (root.has("environment")) read_environment(root.sub("environment"), cfg);
  if (root.has("training")) read_training(root.sub("training"), cfg);
  if (root.has("responders")) read_responders(root.raw("responders"), cfg);
  if (root.has("evaluation")) read_evaluation(root.sub("evaluation"), cfg);
  cfg.environment.include_terminal_tuples =
      cfg.terminal_tuples.value_or(cfg.scheme == Scheme::QLearning);
  return cfg;
}

RunConfig load_run_config(const fs::path& path, std::optional<std::uint64_t> seed_override) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_run_config(ss.str(), seed_override);
}

int run(int argc, char** argv) {
  CLI::App app{"Visual Turing test simulator for DME grading"};
  app.require_subcommand(1);
  std::string config_path;
  bool force = false;
  std::optional<std::uint64_t> seed_override;
  std::string qs_name = "textbook";
  int depth = 6;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "JSON run configuration")->required();
    sub->add_option("--seed-override", seed_override, "Replace the master seed");
  };
  auto* gen = app.add_subcommand("generate", "Write a synthetic annotation set and split");
  add_common(gen);
  gen->add_flag("--force", force, "Overwrite an existing dataset");
  auto* train = app.add_subcommand("train", "Train an RL questioning strategy");
  add_common(train);
  auto* evaluate = app.add_subcommand("evaluate", "Reward tables per (QS, MuE)");
  add_common(evaluate);
  auto* separate = app.add_subcommand("separate", "Beta perceptions and information radius");
  add_common(separate);
  auto* tree = app.add_subcommand("export-tree", "Unroll a strategy into a DOT tree");
  add_common(tree);
  tree->add_option("--qs", qs_name, "Strategy to unroll");
  tree->add_option("--depth", depth, "Number of question levels");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfigError;
  }

  try {
    const RunConfig cfg = load_run_config(config_path, seed_override);
    if (gen->parsed()) return cmd_generate(cfg, force);
    if (train->parsed()) return cmd_train(cfg);
    if (evaluate->parsed()) return cmd_evaluate(cfg);
    if (separate->parsed()) return cmd_separate(cfg);
    return cmd_export_tree(cfg, qs_name, depth);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const SchemaViolation& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kDataError;
  } catch (const NumericFailure& e) {
    std::cerr << "numeric failure: " << e.what() << '\n';
    return kNumericError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kFailure;
  }
}

}  // namespace vtt::cli

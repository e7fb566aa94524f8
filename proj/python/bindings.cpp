#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <memory>
#include <sstream>

#include "vtt/cli.hpp"
#include "vtt/errors.hpp"

namespace py = pybind11;
using namespace vtt;

namespace {

py::dict episode_dict(const Episode& ep) {
  py::list steps;
  for (const auto& t : ep.transitions) {
    steps.append(py::make_tuple(t.action.label(), t.answer == Response::Yes, t.reward));
  }
  py::dict d;
  d["image_id"] = ep.image_id;
  d["steps"] = steps;
  d["return"] = ep.return_g;
  d["length"] = ep.length();
  d["terminal"] = ep.reached_terminal();
  d["diagnosis"] = ep.diagnosis ? py::object(py::int_(static_cast<int>(*ep.diagnosis)))
                                : py::object(py::none());
  return d;
}

py::dict reward_table_dict(const RewardTable& t) {
  py::dict d;
  py::list reward;
  py::list questions;
  for (std::size_t g = 0; g < 3; ++g) {
    reward.append(t.grade_reward[g] ? py::object(py::float_(*t.grade_reward[g])) : py::none());
    questions.append(t.grade_questions[g] ? py::object(py::float_(*t.grade_questions[g]))
                                          : py::none());
  }
  d["grade_reward"] = reward;
  d["grade_questions"] = questions;
  d["grade_count"] = t.grade_count;
  d["total_reward"] = t.total_reward ? py::object(py::float_(*t.total_reward)) : py::none();
  d["total_questions"] =
      t.total_questions ? py::object(py::float_(*t.total_questions)) : py::none();
  d["total_count"] = t.total_count;
  return d;
}

py::dict train_dict(const TrainResult& r) {
  py::list log;
  for (const auto& e : r.log) {
    py::dict row;
    row["epoch"] = e.epoch;
    row["epsilon"] = e.epsilon;
    row["validation_reward"] = e.validation_reward;
    row["mean_loss"] = e.mean_loss;
    log.append(row);
  }
  py::dict d;
  d["checkpoint"] = checkpoint_to_json(r.network);
  d["best_epoch"] = r.best_epoch;
  d["best_validation_reward"] = r.best_validation_reward;
  d["log"] = log;
  d["warnings"] = r.warnings;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Visual Turing test simulator for DME grading";

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<SchemaViolation>(m, "SchemaViolation", PyExc_ValueError);
  py::register_exception<NumericFailure>(m, "NumericFailure", PyExc_ArithmeticError);
  py::register_exception<ContractViolation>(m, "ContractViolation", PyExc_RuntimeError);
  py::register_exception<InconsistentState>(m, "InconsistentState", PyExc_ValueError);
  py::register_exception<Exhausted>(m, "Exhausted", PyExc_RuntimeError);

  py::enum_<Concept>(m, "Concept")
      .value("EX", Concept::HardExudate)
      .value("OD", Concept::OpticDisc)
      .value("FOV", Concept::Fovea);
  py::enum_<Location>(m, "Location")
      .value("WHOLE", Location::WholeImage)
      .value("Q1", Location::Q1)
      .value("Q2", Location::Q2)
      .value("Q3", Location::Q3)
      .value("Q4", Location::Q4);
  py::enum_<Response>(m, "Response")
      .value("NOT_ASKED", Response::NotAsked)
      .value("NO", Response::No)
      .value("YES", Response::Yes);
  py::enum_<AssumptionMode>(m, "Mode")
      .value("SIMPLE_A", AssumptionMode::SimpleA)
      .value("EXTRA_UA", AssumptionMode::ExtraUA);
  py::enum_<ResponderKind>(m, "ResponderKind")
      .value("GROUNDTRUTH", ResponderKind::Groundtruth)
      .value("RANDOM", ResponderKind::Random)
      .value("REASONABLE", ResponderKind::Reasonable)
      .value("UNREASONABLE", ResponderKind::Unreasonable);

  py::class_<Question>(m, "Question")
      .def(py::init<Concept, Location>(), py::arg("concept"), py::arg("location"))
      .def_static("from_index", &Question::from_index)
      .def_property_readonly("index", &Question::index)
      .def_readonly("concept", &Question::kind)
      .def_readonly("location", &Question::location)
      .def_property_readonly("label", &Question::label)
      .def("__repr__", [](const Question& q) { return "Question(" + q.label() + ")"; });

  py::class_<StateMatrix>(m, "State")
      .def(py::init<>())
      .def_static("from_flat",
                  [](const std::vector<double>& v) { return StateMatrix::from_flat(v); })
      .def("at", py::overload_cast<Question>(&StateMatrix::at, py::const_))
      .def("with_answer", &StateMatrix::with)
      .def("flat", &StateMatrix::flat)
      .def_property_readonly("asked_count", &StateMatrix::asked_count);

  py::class_<GroundTruthImage>(m, "Image")
      .def_static("from_quadrants", &GroundTruthImage::from_quadrants, py::arg("id"),
                  py::arg("exudates"), py::arg("optic_disc"), py::arg("fovea"),
                  "Quadrant bitmasks: bit i stands for quadrant Q(i+1).")
      .def_property_readonly("id", &GroundTruthImage::id)
      .def_property_readonly("grade",
                             [](const GroundTruthImage& img) { return static_cast<int>(img.grade()); })
      .def_property_readonly("presence", &GroundTruthImage::presence)
      .def("truthful_answer", &GroundTruthImage::truthful_answer)
      .def("__repr__", [](const GroundTruthImage& img) {
        return "Image(" + img.id() + ", grade " + std::to_string(static_cast<int>(img.grade())) +
               ")";
      });

  m.def("grade", [](const GroundTruthImage& img) { return static_cast<int>(grade(img)); });
  m.def(
      "is_terminal",
      [](const StateMatrix& s, AssumptionMode mode) -> std::optional<int> {
        const auto g = is_terminal(s, mode);
        if (!g) return std::nullopt;
        return static_cast<int>(*g);
      },
      py::arg("state"), py::arg("mode"),
      "Determined grade, or None; raises InconsistentState when no valid image matches.");
  m.def(
      "brute_force_decidable",
      [](const StateMatrix& s, AssumptionMode mode) -> std::optional<int> {
        const auto g = brute_force_decidable(s, mode);
        if (!g) return std::nullopt;
        return static_cast<int>(*g);
      },
      py::arg("state"), py::arg("mode"));

  m.def(
      "generate_dataset",
      [](int n_images, std::array<double, 3> grade_mix, std::uint64_t seed,
         double ex_quadrant_rate, double od_two_quadrant_rate) {
        DatasetConfig cfg;
        cfg.n_images = n_images;
        cfg.grade_mix = grade_mix;
        cfg.seed = seed;
        cfg.ex_quadrant_rate = ex_quadrant_rate;
        cfg.od_two_quadrant_rate = od_two_quadrant_rate;
        return generate_dataset(cfg);
      },
      py::arg("n_images") = 200, py::arg("grade_mix") = std::array<double, 3>{0.44, 0.06, 0.50},
      py::arg("seed") = 0, py::arg("ex_quadrant_rate") = 0.4,
      py::arg("od_two_quadrant_rate") = 0.3);
  m.def(
      "split_dataset",
      [](const std::vector<GroundTruthImage>& images, double train, double validation,
         double test, std::uint64_t seed) {
        const DatasetSplit s = split_dataset(images, {train, validation, test}, seed);
        return py::make_tuple(s.train, s.validation, s.test);
      },
      py::arg("images"), py::arg("train") = 0.6, py::arg("validation") = 0.1,
      py::arg("test") = 0.3, py::arg("seed") = 0);
  m.def("load_annotations",
        py::overload_cast<const std::filesystem::path&>(&load_annotations));
  m.def("save_annotations", [](const std::vector<GroundTruthImage>& images,
                               const std::filesystem::path& path) { save_annotations(images, path); });

  py::class_<QuestioningStrategy, std::shared_ptr<QuestioningStrategy>>(m, "Strategy")
      .def_property_readonly("name", &QuestioningStrategy::name);
  py::class_<RandomStrategy, QuestioningStrategy, std::shared_ptr<RandomStrategy>>(
      m, "RandomStrategy")
      .def(py::init<>());
  py::class_<TextbookStrategy, QuestioningStrategy, std::shared_ptr<TextbookStrategy>>(
      m, "TextbookStrategy")
      .def(py::init<AssumptionMode>(), py::arg("mode"));
  py::class_<RlStrategy, QuestioningStrategy, std::shared_ptr<RlStrategy>>(m, "RlStrategy")
      .def(py::init([](const std::string& checkpoint_json, double epsilon) {
             return std::make_shared<RlStrategy>(checkpoint_from_json(checkpoint_json), epsilon);
           }),
           py::arg("checkpoint_json"), py::arg("epsilon") = 0.0)
      .def_static(
          "load",
          [](const std::filesystem::path& path) {
            return std::make_shared<RlStrategy>(load_checkpoint(path));
          },
          py::arg("path"));
  m.def(
      "tree_strategy",
      [](const std::string& budget_source, const std::vector<GroundTruthImage>& train,
         AssumptionMode mode, std::uint64_t seed) -> std::shared_ptr<QuestioningStrategy> {
        std::unique_ptr<QuestioningStrategy> source;
        if (budget_source == "random") {
          source = std::make_unique<RandomStrategy>();
        } else if (budget_source == "textbook") {
          source = std::make_unique<TextbookStrategy>(mode);
        } else {
          throw InvalidInput("budget_source must be \"random\" or \"textbook\"");
        }
        EpisodeConfig env;
        env.mode = mode;
        const auto budget = tree_budget(*source, train, env, seed);
        const std::string name = budget_source == "random" ? "dt-rb" : "dt-tb";
        return std::make_shared<TreeStrategy>(train_decision_tree(budget), mode, name);
      },
      py::arg("budget_source"), py::arg("train"), py::arg("mode"), py::arg("seed") = 0,
      "Decision-tree strategy trained on terminal states of the source strategy.");

  py::class_<Responder, std::shared_ptr<Responder>>(m, "Responder")
      .def_property_readonly("name", &Responder::name)
      .def("answer", &Responder::answer);
  py::class_<SyntheticResponder, Responder, std::shared_ptr<SyntheticResponder>>(
      m, "SyntheticResponder")
      .def(py::init([](ResponderKind kind, double accuracy, std::uint64_t seed,
                       AssumptionMode mode, std::optional<std::vector<GroundTruthImage>> cal) {
             const ResponderSpec spec{kind, accuracy, seed};
             if (cal) return std::make_shared<SyntheticResponder>(spec, mode, *cal);
             return std::make_shared<SyntheticResponder>(spec, mode);
           }),
           py::arg("kind"), py::arg("accuracy") = 1.0, py::arg("seed") = 0,
           py::arg("mode") = AssumptionMode::SimpleA, py::arg("calibration") = py::none())
      .def("correct_probability", &SyntheticResponder::correct_probability)
      .def_property_readonly("clamped", &SyntheticResponder::clamped);

  m.def(
      "run_episode",
      [](const QuestioningStrategy& qs, const Responder& mue, const GroundTruthImage& img,
         AssumptionMode mode, std::uint64_t seed, int max_questions) {
        EpisodeConfig cfg;
        cfg.mode = mode;
        cfg.max_questions = max_questions;
        return episode_dict(run_episode(qs, mue, img, cfg, seed));
      },
      py::arg("qs"), py::arg("mue"), py::arg("image"), py::arg("mode") = AssumptionMode::SimpleA,
      py::arg("seed") = 0, py::arg("max_questions") = kNumQuestions);
  m.def(
      "reward_table",
      [](const QuestioningStrategy& qs, const Responder& mue,
         const std::vector<GroundTruthImage>& images, AssumptionMode mode, std::uint64_t seed) {
        EpisodeConfig cfg;
        cfg.mode = mode;
        return reward_table_dict(reward_table(qs, mue, images, cfg, seed));
      },
      py::arg("qs"), py::arg("mue"), py::arg("images"), py::arg("mode") = AssumptionMode::SimpleA,
      py::arg("seed") = 0);

  m.def(
      "train",
      [](const std::vector<GroundTruthImage>& train, const std::vector<GroundTruthImage>& validation,
         const std::string& scheme, AssumptionMode mode, int epochs, std::uint64_t seed,
         std::optional<bool> terminal_tuples, std::vector<int> hidden) {
        TrainConfig tc;
        tc.epochs = epochs;
        tc.seed = seed;
        tc.shape.hidden = std::move(hidden);
        EpisodeConfig env;
        env.mode = mode;
        if (scheme != "mc" && scheme != "q") throw InvalidInput("scheme must be \"mc\" or \"q\"");
        const bool mc = scheme == "mc";
        env.include_terminal_tuples = terminal_tuples.value_or(!mc);
        const TrainingData data{train, validation};
        std::optional<TrainResult> r;
        {
          py::gil_scoped_release release;
          r = mc ? train_mc(data, tc, PolicyConfig{}, env)
                 : train_qlearning(data, tc, PolicyConfig{}, ReplayConfig{}, env);
        }
        return train_dict(*r);
      },
      py::arg("train"), py::arg("validation"), py::arg("scheme") = "q",
      py::arg("mode") = AssumptionMode::SimpleA, py::arg("epochs") = 50, py::arg("seed") = 0,
      py::arg("terminal_tuples") = py::none(), py::arg("hidden") = std::vector<int>{128, 64});

  m.def(
      "update_beta",
      [](std::pair<double, double> ab, bool correct) {
        const BetaPerception p = update_beta({ab.first, ab.second}, correct);
        return std::make_pair(p.alpha, p.beta);
      },
      py::arg("alpha_beta"), py::arg("correct"));
  m.def(
      "information_radius",
      [](const std::vector<std::pair<double, double>>& perceptions, int grid_points) {
        std::vector<BetaPerception> ps;
        for (const auto& [a, b] : perceptions) ps.push_back({a, b});
        return information_radius(ps, grid_points);
      },
      py::arg("perceptions"), py::arg("grid_points") = kDefaultGridPoints);
  m.def(
      "separation",
      [](const std::vector<std::shared_ptr<QuestioningStrategy>>& strategies,
         const std::vector<std::shared_ptr<Responder>>& responders,
         const std::vector<GroundTruthImage>& images, AssumptionMode mode, std::uint64_t seed,
         int grid_points) {
        std::vector<const QuestioningStrategy*> qs;
        for (const auto& s : strategies) qs.push_back(s.get());
        std::vector<const Responder*> mues;
        for (const auto& r : responders) mues.push_back(r.get());
        EpisodeConfig cfg;
        cfg.mode = mode;
        const SeparationReport r =
            separation_experiment(qs, mues, images, cfg, seed, grid_points);
        return py::module_::import("json").attr("loads")(separation_report_json(r));
      },
      py::arg("strategies"), py::arg("responders"), py::arg("images"),
      py::arg("mode") = AssumptionMode::SimpleA, py::arg("seed") = 0,
      py::arg("grid_points") = kDefaultGridPoints,
      "Beta perceptions, N_u and per-strategy information radius as a dict.");

  m.def(
      "cli",
      [](std::vector<std::string> args) {
        std::vector<char*> argv;
        static std::string prog = "vtt";
        argv.push_back(prog.data());
        for (auto& a : args) argv.push_back(a.data());
        return cli::run(static_cast<int>(argv.size()), argv.data());
      },
      py::arg("args"), "Runs the command-line tool in-process; returns the exit code.");
}

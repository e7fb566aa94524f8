#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "vtt/cli.hpp"
#include "vtt/errors.hpp"

using namespace vtt;
using namespace vtt::cli;
namespace fs = std::filesystem;

namespace {

std::string message_of(const std::string& json_text) {
  try {
    parse_run_config(json_text);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& tag) {
    path = fs::temp_directory_path() / ("vtt_cli_" + tag + "_" + std::to_string(::getpid()));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path write_config(const fs::path& dir, const std::string& name, const std::string& body) {
  const fs::path p = dir / name;
  std::ofstream(p, std::ios::binary) << body;
  return p;
}

// Runs the real binary; returns the exit status and keeps stderr.
int vtt_cli(const std::string& args, std::string* err = nullptr, const fs::path& scratch = {}) {
  const fs::path err_file = (scratch.empty() ? fs::temp_directory_path() : scratch) /
                            ("stderr_" + std::to_string(::getpid()) + ".txt");
  const std::string cmd =
      std::string(VTT_CLI_BINARY) + " " + args + " > /dev/null 2> " + err_file.string();
  const int status = std::system(cmd.c_str());
  if (err) *err = slurp(err_file);
  fs::remove(err_file);
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string tiny_config(const fs::path& out, const std::string& extra = "") {
  return R"({"seed": 7, "output_dir": ")" + out.string() + R"(",
    "training": {"scheme": "mc", "epochs": 1, "hidden": [8], "repetitions": 1}, )" +
         R"("evaluation": {"qs": ["random", "textbook", "dt-tb"], "grid_points": 256})" + extra +
         "}";
}

}  // namespace

TEST_CASE("config defaults") {
  const RunConfig cfg = parse_run_config("{}");
  CHECK(cfg.scheme == Scheme::QLearning);
  CHECK(cfg.environment.include_terminal_tuples);
  CHECK(cfg.environment.gamma == 0.8);
  CHECK(cfg.training.epochs == 50);
  CHECK(cfg.training.burn_in_epochs == 15);
  CHECK(cfg.replay.capacity == 500);
  CHECK(cfg.replay.minibatch == 8);
  CHECK(cfg.policy.epsilon_decay == 0.9);
  CHECK(cfg.responders.size() == 3);
  CHECK(cfg.qs.size() == 5);
  CHECK(cfg.grid_points == 4096);
  CHECK(cfg.data.n_images == 200);

  const RunConfig mc = parse_run_config(R"({"training": {"scheme": "mc"}})");
  CHECK_FALSE(mc.environment.include_terminal_tuples);
  const RunConfig forced = parse_run_config(
      R"({"training": {"scheme": "mc"}, "environment": {"include_terminal_tuples": true}})");
  CHECK(forced.environment.include_terminal_tuples);

  const RunConfig extra = parse_run_config(R"({"mode": "extra-U-A"})");
  CHECK(extra.environment.mode == AssumptionMode::ExtraUA);
}

TEST_CASE("seeds flow from the master seed") {
  const RunConfig a = parse_run_config(R"({"seed": 3})");
  const RunConfig b = parse_run_config(R"({"seed": 3})", 4);
  CHECK(b.seed == 4);
  CHECK(data_seed(a) != data_seed(b));
  CHECK(data_seed(a) != train_seed(a));
  CHECK(train_seed(a) != eval_seed(a));
  CHECK(a.responders[0].seed != b.responders[0].seed);
  const RunConfig pinned = parse_run_config(R"({"seed": 3, "training": {"seed": 11}})");
  CHECK(train_seed(pinned) == 11);
  CHECK(data_seed(pinned) == data_seed(a));
}

TEST_CASE("config errors name the offending path") {
  CHECK(message_of(R"({"trainng": {}})").rfind("$.trainng", 0) == 0);
  CHECK(message_of(R"({"training": {"epoch": 3}})").rfind("$.training.epoch: unknown key", 0) ==
        0);
  CHECK(message_of(R"({"training": {"epochs": "many"}})").rfind("$.training.epochs", 0) == 0);
  CHECK(message_of(R"({"training": {"scheme": "td"}})").rfind("$.training.scheme", 0) == 0);
  CHECK(message_of(R"({"training": {"optimizer": {"beta": 0.9}}})")
            .rfind("$.training.optimizer.beta", 0) == 0);
  CHECK(message_of(R"({"responders": [{"kind": "oracle"}]})").rfind("$.responders[0].kind", 0) ==
        0);
  CHECK(message_of(R"({"responders": [{"kind": "random", "accuracy": 1.5}]})")
            .rfind("$.responders[0].accuracy", 0) == 0);
  CHECK(message_of(R"({"evaluation": {"qs": ["random", "oracle"]}})")
            .rfind("$.evaluation.qs[1]", 0) == 0);
  CHECK(message_of(R"({"evaluation": {"grid_points": 10}})").rfind("$.evaluation.grid_points",
                                                                  0) == 0);
  CHECK(message_of(R"({"environment": {"max_questions": 20}})").rfind("$.environment", 0) == 0);
  CHECK(message_of(R"({"data": {"annotations": "/no/such/file.csv"}})")
            .rfind("$.data.annotations", 0) == 0);
  CHECK(message_of(R"({"mode": "simple"})").rfind("$.mode", 0) == 0);
  CHECK(message_of("{").rfind("$", 0) == 0);
  CHECK(message_of("[]").rfind("$", 0) == 0);
}

TEST_CASE("generate: exit codes, --force, directory creation, determinism") {
  TempDir tmp("generate");
  const fs::path out1 = tmp.path / "a" / "nested";
  const fs::path out2 = tmp.path / "b";
  const auto c1 = write_config(tmp.path, "c1.json", tiny_config(out1));
  const auto c2 = write_config(tmp.path, "c2.json", tiny_config(out2));

  CHECK(vtt_cli("generate --config " + c1.string()) == 0);
  CHECK(fs::exists(out1 / "annotations.csv"));
  CHECK(vtt_cli("generate --config " + c1.string()) == 3);
  CHECK(vtt_cli("generate --force --config " + c1.string()) == 0);
  CHECK(vtt_cli("generate --config " + c2.string()) == 0);
  CHECK(slurp(out1 / "annotations.csv") == slurp(out2 / "annotations.csv"));
  CHECK(slurp(out1 / "splits.csv") == slurp(out2 / "splits.csv"));

  const std::string splits = slurp(out1 / "splits.csv");
  CHECK(std::count(splits.begin(), splits.end(), '\n') == 201);
  CHECK(splits.rfind("image_id,split\n", 0) == 0);

  const fs::path out3 = tmp.path / "c";
  const auto c3 = write_config(tmp.path, "c3.json", tiny_config(out3));
  CHECK(vtt_cli("generate --seed-override 8 --config " + c3.string()) == 0);
  CHECK(slurp(out1 / "annotations.csv") != slurp(out3 / "annotations.csv"));
}

TEST_CASE("exit codes for configuration and data errors") {
  TempDir tmp("codes");
  const auto bad = write_config(tmp.path, "bad.json", R"({"training": {"epoch": 1}})");
  std::string err;
  CHECK(vtt_cli("train --config " + bad.string(), &err) == 2);
  CHECK(err.find("$.training.epoch") != std::string::npos);
  CHECK(vtt_cli("train --config " + (tmp.path / "missing.json").string()) == 2);
  CHECK(vtt_cli("frobnicate") == 2);
  CHECK(vtt_cli("") == 2);

  const fs::path out = tmp.path / "out";
  const auto needs_rl = write_config(
      tmp.path, "rl.json",
      R"({"output_dir": ")" + out.string() + R"(", "evaluation": {"qs": ["rl"]}})");
  CHECK(vtt_cli("evaluate --config " + needs_rl.string(), &err) == 3);
  CHECK(err.find("checkpoint") != std::string::npos);

  const fs::path ann = tmp.path / "broken.csv";
  std::ofstream(ann) << "not,a,valid,header\n";
  const auto broken = write_config(tmp.path, "ann.json",
                                   R"({"output_dir": ")" + out.string() +
                                       R"(", "data": {"annotations": ")" + ann.string() +
                                       R"("}, "evaluation": {"qs": ["random"]}})");
  CHECK(vtt_cli("evaluate --config " + broken.string()) == 3);

  CHECK(vtt_cli("export-tree --qs oracle --config " + needs_rl.string()) == 2);
  CHECK(vtt_cli("export-tree --depth 0 --config " + needs_rl.string()) == 2);
}

TEST_CASE("train, evaluate, separate and export-tree end to end") {
  TempDir tmp("pipeline");
  const fs::path out = tmp.path / "run";
  const auto cfg = write_config(tmp.path, "cfg.json",
                                tiny_config(out, R"(, "responders": [{"kind": "random"},
                                  {"kind": "reasonable"}, {"kind": "unreasonable"}])"));

  std::string err;
  REQUIRE(vtt_cli("train --config " + cfg.string(), &err) == 0);
  CHECK(err.find("warning") != std::string::npos);
  CHECK(err.find("burn-in") != std::string::npos);
  CHECK(fs::exists(out / "checkpoint.json"));
  CHECK(fs::exists(out / "checkpoint_rep0.json"));
  const std::string log = slurp(out / "training_log.csv");
  CHECK(log == slurp(out / "training_log.csv"));
  CHECK(log.rfind("repetition,epoch,epsilon,validation_reward,mean_loss\n0,1,1.000000,", 0) == 0);

  REQUIRE(vtt_cli("evaluate --config " + cfg.string()) == 0);
  const std::string table = slurp(out / "reward_table.csv");
  CHECK(std::count(table.begin(), table.end(), '\n') == 1 + 3 * 3);
  int per_pair = 0;
  for (const auto& e : fs::directory_iterator(out)) {
    if (e.path().filename().string().rfind("rewards_", 0) == 0) {
      ++per_pair;
      const std::string body = slurp(e.path());
      CHECK(body.rfind("image_id,grade,return,questions,diagnosis\n", 0) == 0);
      CHECK(std::count(body.begin(), body.end(), '\n') == 61);
    }
  }
  CHECK(per_pair == 9);

  REQUIRE(vtt_cli("separate --config " + cfg.string()) == 0);
  const std::string sep = slurp(out / "separation.json");
  CHECK(sep.find("\"n_u\"") != std::string::npos);
  CHECK(slurp(out / "beta_curves.csv").rfind("qs,mue,step,alpha,beta,mean\n", 0) == 0);

  REQUIRE(vtt_cli("export-tree --config " + cfg.string()) == 0);
  const std::string dot = slurp(out / "tree_textbook.dot");
  CHECK(dot.rfind("digraph \"textbook\" {", 0) == 0);
  CHECK(dot.find("n0 [shape=box, label=\"EX\\nwhole\"]") != std::string::npos);
  CHECK(dot.back() == '\n');

  REQUIRE(vtt_cli("export-tree --depth 1 --qs dt-tb --config " + cfg.string()) == 0);
  const std::string shallow = slurp(out / "tree_dt-tb.dot");
  CHECK(std::count(shallow.begin(), shallow.end(), '>') == 2);
}

TEST_CASE("single responder separation gives radius zero") {
  TempDir tmp("single");
  const fs::path out = tmp.path / "run";
  const auto cfg = write_config(
      tmp.path, "cfg.json",
      R"({"output_dir": ")" + out.string() +
          R"(", "responders": [{"kind": "reasonable"}], "evaluation": {"qs": ["random", "textbook"]}})");
  REQUIRE(vtt_cli("separate --config " + cfg.string()) == 0);
  const std::string sep = slurp(out / "separation.json");
  CHECK(sep.find("\"radius\": 0.0") != std::string::npos);
}

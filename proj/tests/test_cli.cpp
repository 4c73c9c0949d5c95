#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <fstream>
#include <random>
#include <sstream>
#include <sys/wait.h>

#include <json.hpp>

#include "fairkit/cli/commands.hpp"
#include "fairkit/data/synthetic.hpp"
#include "test_util.hpp"

using namespace fairkit;
using namespace fairkit::cli;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

ErrorKind kind_of(const std::function<void()>& f, std::string* message = nullptr) {
  try {
    f();
  } catch (const Error& e) {
    if (message) *message = e.what();
    return e.kind();
  }
  FAIL("expected an error");
  return ErrorKind::Io;
}

TrainConfig small_config(const fs::path& results) {
  TrainConfig c;
  c.hidden_dims = {16};
  c.epochs = 3;
  c.results_dir = results.string();
  return c;
}

nlohmann::json manifest_of(const fs::path& run_dir) { return nlohmann::json::parse(slurp(run_dir / "manifest.json")); }

int run_tool(const std::string& args) {
  const std::string cmd = std::string(FAIRKIT_TOOL) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST_CASE("parse_config: flags, YAML and precedence") {
  const auto c = parse_config({"--num_classes", "28", "--emb_size", "768"});
  CHECK(c.num_classes == 28);
  CHECK(c.emb_size == 768);
  TrainConfig expected;
  expected.num_classes = 28;
  expected.emb_size = 768;
  CHECK(c == expected);

  const auto dir = testing::scratch_dir("cli_yaml");
  std::ofstream(dir / "opt.yaml") << "epochs: 5\nhidden_dims: [32, 8]\nINLP: true\n";
  const std::string path = (dir / "opt.yaml").string();
  const auto from_yaml = parse_config({"--conf_file", path});
  CHECK(from_yaml.epochs == 5);
  CHECK(from_yaml.hidden_dims == std::vector<Index>{32, 8});
  CHECK(from_yaml.INLP);
  CHECK(from_yaml.conf_file == path);
  CHECK(parse_config({"--conf_file", path, "--epochs", "7"}).epochs == 7);
  CHECK(parse_config({"--epochs", "7", "--conf_file", path}).epochs == 7);

  const auto combined = parse_config({"--dataset", "synthetic", "--emb_size", "768", "--num_classes", "28",
                                   "--encoder_architecture", "vector", "--BT", "Resampling", "--BTObj", "EO",
                                   "--adv_debiasing", "--INLP"});
  CHECK(combined.adv_debiasing);
  CHECK(combined.resolved_method() == train::Method::Adv);
  CHECK(combined.stages() == std::vector<std::string>{"pre:EO-resampling", "at:Adv", "post:INLP"});
  CHECK(combined.method_label() == "BTEO-Resampling+Adv+INLP");
  CHECK_NOTHROW(combined.validate());
}

TEST_CASE("parse_config: errors name the key") {
  std::string msg;
  CHECK(kind_of([] { parse_config({"--bogus", "1"}); }, &msg) == ErrorKind::Config);
  CHECK(msg.find("--bogus") != std::string::npos);

  CHECK(kind_of([] { parse_config({"--epochs", "many"}); }, &msg) == ErrorKind::Config);
  CHECK(msg.find("epochs") != std::string::npos);
  CHECK(msg.find("integer") != std::string::npos);
  CHECK(kind_of([] { parse_config({"--lr", "fast"}); }, &msg) == ErrorKind::Config);
  CHECK(msg.find("number") != std::string::npos);

  CHECK(kind_of([] { from_yaml_text("epochs: 3\nlearning_rate: 0.1\n"); }, &msg) == ErrorKind::Config);
  CHECK(msg.find("learning_rate") != std::string::npos);
  CHECK(kind_of([] { from_yaml_text("hidden_dims: 300\n"); }, &msg) == ErrorKind::Config);
  CHECK(msg.find("hidden_dims") != std::string::npos);
  CHECK(kind_of([] { from_yaml_text("INLP: maybe\n"); }) == ErrorKind::Config);
  CHECK(kind_of([] { parse_config({"--conf_file", "/nonexistent/opt.yaml"}); }) == ErrorKind::Io);

  CHECK(kind_of([] { parse_config({"--BTObj", "EO"}).validate(); }, &msg) == ErrorKind::Config);
  CHECK(msg.find("BT") != std::string::npos);
  CHECK(kind_of([] { parse_config({"--BT", "Resampling"}).validate(); }) == ErrorKind::Config);
  CHECK(kind_of([] { parse_config({"--BT", "Sometimes", "--BTObj", "EO"}).validate(); }) == ErrorKind::Config);
  CHECK(kind_of([] { parse_config({"--BT", "Resampling", "--BTObj", "y"}).validate(); }) == ErrorKind::Config);
  CHECK(kind_of([] { parse_config({"--encoder_architecture", "BERT"}).validate(); }, &msg) == ErrorKind::Config);
  CHECK(msg.find("vector") != std::string::npos);
  CHECK(kind_of([] { parse_config({"--method", "FairBatch", "--adv_debiasing"}).validate(); }) ==
        ErrorKind::Config);
  CHECK(kind_of([] { parse_config({"--gate_soft"}).validate(); }) == ErrorKind::Config);
  CHECK(kind_of([] { parse_config({"--method", "Nope"}).validate(); }) == ErrorKind::Config);
  CHECK_NOTHROW(parse_config({"--method", "Gate", "--gate_soft"}).validate());
}

TEST_CASE("config round trip through YAML") {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> u(0.0, 3.0);
  const char* methods[] = {"Standard", "Adv", "DAdv", "FairBatch", "FairSCL", "EO_CLA", "Gate"};
  for (int trial = 0; trial < 50; ++trial) {
    TrainConfig c;
    c.method = methods[trial % 7];
    c.adv_lambda = u(rng);
    c.diff_lambda = u(rng) * 1e-7;
    c.fcl_lambda_y = 1.0 / 3.0 + u(rng);
    c.lr = std::pow(10.0, -u(rng) - 1);
    c.temperature = 0.1;
    c.seed = rng();
    c.hidden_dims.assign(static_cast<std::size_t>(trial % 3), 7 + trial);
    c.INLP = trial % 2 == 0;
    c.BT = trial % 4 == 0 ? "Reweighting" : "";
    c.BTObj = trial % 4 == 0 ? "joint" : "";
    c.dataset = trial % 5 == 0 ? "my data: with colon" : "synthetic";
    c.conf_file = trial % 3 == 0 ? "opt.yaml" : "";
    CHECK(from_yaml_text(to_yaml(c)) == c);
  }
  const auto keys = config_keys();
  const std::string text = to_yaml(TrainConfig{});
  for (const auto& k : keys) CHECK(text.find(k + ":") != std::string::npos);

  TrainConfig a, b;
  b.results_dir = "elsewhere";
  CHECK(config_hash(a) == config_hash(b));
  b.seed = 1;
  CHECK(config_hash(a) != config_hash(b));
  CHECK(config_hash(a).size() == 16);
}

TEST_CASE("hyperparameter index per method") {
  TrainConfig c;
  CHECK(c.hyper_index().empty());
  CHECK(c.method_label() == "Standard");
  c.method = "FairSCL";
  CHECK(c.hyper_index() == std::map<std::string, double>{{"fcl_lambda_g", 0.1}, {"fcl_lambda_y", 0.1}});
  c.method = "Standard";
  c.INLP = true;
  c.inlp_iterations = 4;
  CHECK(c.method_label() == "INLP");
  CHECK(c.hyper_index() == std::map<std::string, double>{{"inlp_iterations", 4}});
}

TEST_CASE("cmd_train writes a complete, reproducible run") {
  const auto root = testing::scratch_dir("cli_train");
  const auto cfg = small_config(root);
  const auto out = cmd_train(cfg);
  CHECK(out.run_dir == root / config_hash(cfg));
  CHECK(fs::exists(out.run_dir / "opt.yaml"));
  CHECK(fs::exists(out.run_dir / "checkpoints" / "epoch_0"));
  CHECK(fs::exists(out.run_dir / "checkpoints" / "epoch_3"));
  CHECK(apply_yaml(TrainConfig{}, out.run_dir / "opt.yaml") == cfg);

  const auto m = manifest_of(out.run_dir);
  CHECK(m["status"] == "finalized");
  CHECK(m["method"] == "Standard");
  CHECK(m["stages"] == nlohmann::json::array({"at:Standard"}));
  CHECK(m["selected_epoch"] == out.selected_epoch);

  std::istringstream lines(slurp(out.run_dir / "epochs.jsonl"));
  std::string line;
  int rows = 0;
  while (std::getline(lines, line)) {
    const auto j = nlohmann::json::parse(line);
    for (const char* key : {"epoch", "dev_performance", "dev_fairness", "test_performance", "test_fairness",
                            "checkpoint"})
      CHECK(j.contains(key));
    ++rows;
  }
  CHECK(rows == 4);

  const std::string first = slurp(out.run_dir / "epochs.jsonl");
  cmd_train(cfg);
  CHECK(slurp(out.run_dir / "epochs.jsonl") == first);
}

TEST_CASE("cmd_train composes pre, at and post stages") {
  const auto root = testing::scratch_dir("cli_stages");
  auto cfg = small_config(root);
  cfg.BT = "Resampling";
  cfg.BTObj = "EO";
  cfg.adv_debiasing = true;
  cfg.INLP = true;
  cfg.inlp_iterations = 2;
  const auto out = cmd_train(cfg);
  const auto m = manifest_of(out.run_dir);
  CHECK(m["stages"] == nlohmann::json::array({"pre:EO-resampling", "at:Adv", "post:INLP"}));
  CHECK(m["post"]["INLP"]["iterations"] == 2);
  CHECK(fs::exists(out.run_dir / "projection.bin"));
  const std::string text = slurp(out.run_dir / "epochs.jsonl");
  CHECK(text.find("\"stage\":\"post:INLP\"") != std::string::npos);
  CHECK(text.find("\"final\":true") != std::string::npos);

  auto gate = small_config(root);
  gate.method = "Gate";
  gate.gate_soft = true;
  gate.gate_soft_grid = 3;
  const auto gm = manifest_of(cmd_train(gate).run_dir);
  CHECK(gm["stages"] == nlohmann::json::array({"at:Gate", "post:Gate-soft"}));
  CHECK(gm["post"]["Gate-soft"]["prior"].size() == 2);
}

TEST_CASE("cmd_train errors carry the stage label") {
  const auto root = testing::scratch_dir("cli_errors");
  auto cfg = small_config(root / "results");
  cfg.dataset = "absent";
  cfg.data_dir = (root / "data").string();
  CHECK(kind_of([&] { cmd_train(cfg); }) == ErrorKind::Io);

  // A dataset with no (y=1, g=1) rows cannot be balanced for EO.
  fs::create_directories(root / "data" / "holes");
  for (const char* split : {"train", "dev", "test"}) {
    std::ofstream os(root / "data" / "holes" / (std::string(split) + ".jsonl"));
    for (int i = 0; i < 12; ++i) {
      const int y = i % 2, g = y == 1 ? 0 : (i / 2) % 2;
      os << nlohmann::json{{"X", std::vector<double>(8, 0.1 * i)}, {"y", y}, {"protected_label", g}}.dump() << "\n";
    }
  }
  cfg.dataset = "holes";
  cfg.BT = "Downsampling";
  cfg.BTObj = "EO";
  std::string msg;
  CHECK(kind_of([&] { cmd_train(cfg); }, &msg) == ErrorKind::EmptyCell);
  CHECK(msg.find("pre:EO-downsampling") != std::string::npos);

  cfg.BT = cfg.BTObj = "";
  cfg.emb_size = 5;
  CHECK(kind_of([&] { cmd_train(cfg); }, &msg) == ErrorKind::Config);
  CHECK(msg.find("emb_size") != std::string::npos);

  auto diverge = small_config(root / "results");
  diverge.lr = 1e300;
  diverge.optimizer = "SGD";
  CHECK(kind_of([&] { cmd_train(diverge); }, &msg) == ErrorKind::TrainingDiverged);
  CHECK(msg.find("at:Standard") != std::string::npos);
}

TEST_CASE("cmd_analyze") {
  const auto root = testing::scratch_dir("cli_analyze");
  CHECK(kind_of([&] { cmd_analyze({root}); }) == ErrorKind::EmptyInput);

  SUBCASE("one Standard run gives one row") {
    cmd_train(small_config(root));
    const auto res = cmd_analyze({root});
    REQUIRE(res.table.rows.size() == 1);
    CHECK(res.table.rows[0].method == "Standard");
    CHECK_FALSE(res.table.rows[0].aggregate.performance_std);
    for (const char* f : {"results_table.md", "results_table.tex", "results_table.csv", "tradeoff.json",
                          "selection.json"})
      CHECK(fs::exists(root / f));
  }

  SUBCASE("2 methods x 3 indices x 2 seeds") {
    for (double lambda : {0.1, 1.0, 3.0})
      for (std::uint64_t seed : {0u, 1u}) {
        auto adv = small_config(root);
        adv.method = "Adv";
        adv.adv_lambda = lambda;
        adv.seed = seed;
        cmd_train(adv);
        auto cla = small_config(root);
        cla.method = "EO_CLA";
        cla.eo_cla_lambda = lambda;
        cla.seed = seed;
        cmd_train(cla);
      }
    // An unfinished run is skipped.
    fs::create_directories(root / "partial");
    std::ofstream(root / "partial" / "manifest.json") << R"({"status":"started"})";

    const auto res = cmd_analyze({root});
    CHECK(res.skipped == 1);
    CHECK(res.table.rows.size() == 2);
    const auto sel = nlohmann::json::parse(slurp(root / "selection.json"));
    REQUIRE(sel["methods"].size() == 2);

    // Oracle: reread every run, pick each run's min-DTO epoch, average per
    // index and take the min-DTO index.
    for (const auto& m : sel["methods"]) {
      std::map<double, std::pair<double, double>> sums;
      for (const auto& entry : fs::directory_iterator(root)) {
        if (!fs::exists(entry.path() / "opt.yaml")) continue;
        const auto cfg = apply_yaml(TrainConfig{}, entry.path() / "opt.yaml");
        if (cfg.method_label() != m["method"]) continue;
        const double lambda = cfg.method == "Adv" ? cfg.adv_lambda : cfg.eo_cla_lambda;
        std::istringstream lines(slurp(entry.path() / "epochs.jsonl"));
        std::string line;
        double best = 1e9, bp = 0, bf = 0;
        while (std::getline(lines, line)) {
          const auto j = nlohmann::json::parse(line);
          const double p = j["dev_performance"], f = j["dev_fairness"];
          const double d = std::sqrt((1 - p) * (1 - p) + (1 - f) * (1 - f));
          if (d < best) best = d, bp = p, bf = f;
        }
        sums[lambda].first += bp / 2;
        sums[lambda].second += bf / 2;
      }
      REQUIRE(sums.size() == 3);
      double best = 1e9, want = 0;
      for (const auto& [lambda, pf] : sums) {
        const double d = std::sqrt((1 - pf.first) * (1 - pf.first) + (1 - pf.second) * (1 - pf.second));
        if (d < best) best = d, want = lambda;
      }
      const std::string key = m["method"] == "Adv" ? "adv_lambda" : "eo_cla_lambda";
      CHECK(m["index"].size() == 1);
      CHECK(m["index"][key].get<double>() == want);
      CHECK(m["seeds"].size() == 2);
    }

    AnalyzeOptions constrained{root};
    constrained.criterion = {analysis::CriterionKind::ConstrainedPerformance, 0.96};
    const auto cres = cmd_analyze(constrained);
    for (const auto& ms : cres.selections)
      for (const auto& s : ms.seeds) CHECK((s.dev_fairness >= 0.96 || s.fallback));
    const auto csel = nlohmann::json::parse(slurp(root / "selection.json"));
    CHECK(csel["criterion"] == "ConstrainedPerformance");
    CHECK(csel["threshold"] == 0.96);
  }
}

TEST_CASE("cmd_generate") {
  const auto root = testing::scratch_dir("cli_generate");
  cmd_generate({}, root / "a", 4, 2, 2, 3);
  cmd_generate({}, root / "b", 4, 2, 2, 3);
  const auto spec = data::default_synthetic_spec(4, 2, 2, 3);
  for (const char* split : {"train", "dev", "test"}) {
    const std::string name = std::string(split) + ".jsonl";
    CHECK(slurp(root / "a" / name) == slurp(root / "b" / name));
    const std::string text = slurp(root / "a" / name);
    const auto rows = std::count(text.begin(), text.end(), '\n');
    const auto& table = std::string(split) == "train" ? spec.n_per_cell : spec.dev_n_per_cell;
    CHECK(rows == table.sum());
  }
  CHECK(data::load_synthetic_spec(root / "a" / "spec.yaml") == spec);

  std::ofstream(root / "bad.yaml") << "d: 4\nn_per_cell: [[10, 10], [0, 0]]\n";
  CHECK(kind_of([&] { cmd_generate(root / "bad.yaml", root / "c"); }) == ErrorKind::Spec);
}

TEST_CASE("exit codes of the fairkit tool") {
  const auto root = testing::scratch_dir("cli_tool");
  const std::string results = " --results_dir " + (root / "r").string();
  CHECK(run_tool("--epochs 2 --hidden_dims 8" + results) == 0);
  CHECK(run_tool("train --epochs 2 --hidden_dims 8 --seed 4" + results) == 0);
  CHECK(run_tool("--no_such_flag 1") == 2);
  CHECK(run_tool("--BTObj EO" + results) == 2);
  CHECK(run_tool("--dataset missing --data_dir " + root.string() + results) == 3);
  CHECK(run_tool("--lr 1e300 --optimizer SGD --epochs 2" + results) == 4);
  fs::create_directories(root / "empty");
  CHECK(run_tool("analyze --results_dir " + (root / "empty").string()) == 5);
  CHECK(run_tool("analyze --results_dir " + (root / "r").string()) == 0);
  CHECK(run_tool("generate --out " + (root / "gen").string()) == 0);
  CHECK(fs::exists(root / "gen" / "train.jsonl"));
  CHECK(exit_code(ErrorKind::Parse) == 3);
  CHECK(exit_code(ErrorKind::Config) == 2);
}

#include "fairkit/cli/commands.hpp"

#include <chrono>
#include <ctime>
#include <fstream>
#include <iostream>

#include <json.hpp>
#include <yaml-cpp/yaml.h>

#include "fairkit/data/balance.hpp"
#include "fairkit/data/synthetic.hpp"
#include "fairkit/nn/checkpoint.hpp"
#include "fairkit/post/gate_soft.hpp"
#include "fairkit/post/inlp.hpp"
#include "fairkit/train/trainer.hpp"

namespace fairkit::cli {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error(ErrorKind::Io, "cannot write " + path.string());
  os << text;
  if (!os) throw Error(ErrorKind::Io, "failed writing " + path.string());
}

// Write-then-rename so a crashed run never leaves half a manifest.
void write_json(const fs::path& path, const ordered_json& j) {
  const fs::path tmp = path.string() + ".tmp";
  write_text(tmp, j.dump(2) + "\n");
  fs::rename(tmp, path);
}

std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

ordered_json config_json(const TrainConfig& cfg) {
  const YAML::Node root = YAML::Load(to_yaml(cfg));
  ordered_json j = ordered_json::object();
  for (const auto& key : config_keys()) {
    const YAML::Node v = root[key];
    if (v.IsSequence()) {
      j[key] = ordered_json::array();
      for (const auto& item : v) j[key].push_back(item.as<long long>());
    } else {
      j[key] = v.Scalar();
    }
  }
  return j;
}

ordered_json epoch_row(int epoch, const eval::FairnessReport& dev, const eval::FairnessReport& test) {
  ordered_json j;
  j["epoch"] = epoch;
  j["dev_performance"] = dev.performance;
  j["dev_fairness"] = dev.fairness;
  j["test_performance"] = test.performance;
  j["test_fairness"] = test.fairness;
  return j;
}

fs::path find_split(const fs::path& dir, const char* name) {
  for (const char* ext : {".jsonl", ".csv"}) {
    const fs::path p = dir / (std::string(name) + ext);
    if (fs::exists(p)) return p;
  }
  throw Error(ErrorKind::Io, "dataset split '" + std::string(name) + "' not found in " + dir.string());
}

template <typename F>
auto in_stage(const std::string& stage, F&& body) {
  try {
    return body();
  } catch (const Error& e) {
    throw Error(e.kind(), stage + ": " + e.detail());
  }
}

}  // namespace

int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Io:
    case ErrorKind::Parse:
    case ErrorKind::Schema:
      return 3;
    case ErrorKind::TrainingDiverged:
    case ErrorKind::FairBatchCollapse:
      return 4;
    case ErrorKind::EmptyInput:
      return 5;
    default:
      return 2;
  }
}

data::DatasetBundle resolve_dataset(const TrainConfig& cfg) {
  data::DatasetBundle bundle;
  if (cfg.dataset == "synthetic") {
    const data::SyntheticSpec spec =
        cfg.synthetic_spec.empty()
            ? data::default_synthetic_spec(cfg.emb_size, cfg.num_classes, cfg.num_groups, cfg.seed)
            : data::load_synthetic_spec(cfg.synthetic_spec);
    bundle = data::generate_synthetic(spec);
  } else {
    const fs::path dir = cfg.data_dir.empty() ? fs::path(cfg.dataset) : fs::path(cfg.data_dir) / cfg.dataset;
    if (!fs::is_directory(dir)) throw Error(ErrorKind::Io, "dataset directory " + dir.string() + " not found");
    data::Schema schema;
    schema.num_classes = cfg.num_classes;
    schema.num_groups = cfg.num_groups;
    auto load = [&](const char* name, data::Split split) {
      const fs::path p = find_split(dir, name);
      return data::load_dataset(p, data::format_from_extension(p), schema, split);
    };
    bundle = {load("train", data::Split::Train), load("dev", data::Split::Dev), load("test", data::Split::Test)};
  }
  for (const data::Dataset* ds : {&bundle.train, &bundle.dev, &bundle.test}) {
    if (ds->dim() != cfg.emb_size)
      throw Error(ErrorKind::Config, "emb_size is " + std::to_string(cfg.emb_size) + " but the " +
                                         data::to_string(ds->split) + " split has " + std::to_string(ds->dim()) +
                                         " features");
    if (ds->num_classes > cfg.num_classes || ds->num_groups > cfg.num_groups)
      throw Error(ErrorKind::Config, "the " + data::to_string(ds->split) + " split has more classes or groups "
                                     "than num_classes/num_groups");
  }
  for (data::Dataset* ds : {&bundle.train, &bundle.dev, &bundle.test}) {
    ds->num_classes = cfg.num_classes;
    ds->num_groups = cfg.num_groups;
  }
  return bundle;
}

TrainOutcome cmd_train(const TrainConfig& config) {
  config.validate();
  TrainOutcome out;
  out.stages = config.stages();
  out.run_dir = fs::path(config.results_dir) / config_hash(config);
  fs::remove_all(out.run_dir);
  fs::create_directories(out.run_dir);
  write_text(out.run_dir / "opt.yaml", to_yaml(config));

  ordered_json manifest;
  manifest["status"] = "started";
  manifest["version"] = kVersion;
  manifest["started"] = utc_timestamp();
  manifest["method"] = config.method_label();
  manifest["index"] = config.hyper_index();
  manifest["seed"] = config.seed;
  manifest["stages"] = out.stages;
  manifest["config"] = config_json(config);
  write_json(out.run_dir / "manifest.json", manifest);

  data::DatasetBundle bundle = in_stage("data", [&] { return resolve_dataset(config); });
  const std::size_t first_at = config.BT.empty() ? 0 : 1;
  if (const auto obj = config.balance_objective()) {
    bundle.train = in_stage(out.stages[0], [&] {
      return data::balance(bundle.train, *obj, mix_seed(config.seed, train::streams::kBalance));
    });
  }

  std::ofstream epochs(out.run_dir / "epochs.jsonl", std::ios::binary);
  if (!epochs) throw Error(ErrorKind::Io, "cannot write epochs.jsonl");
  train::TrainOptions options;
  options.checkpoint_dir = out.run_dir / "checkpoints";
  options.on_epoch = [&](const train::EpochRecord& r) {
    ordered_json j;
    j["epoch"] = r.epoch;
    j["dev_performance"] = r.dev_performance;
    j["dev_fairness"] = r.dev_fairness;
    j["test_performance"] = r.test_performance;
    j["test_fairness"] = r.test_fairness;
    j["train_loss"] = r.train_loss;
    j["checkpoint"] = r.checkpoint;
    epochs << j.dump() << "\n" << std::flush;
  };
  const train::RunRecord run =
      in_stage(out.stages[first_at], [&] { return train::train(bundle, config.method_config(), options); });

  std::vector<analysis::EpochPoint> points;
  for (const auto& e : run.epochs)
    points.push_back({e.epoch, e.dev_performance, e.dev_fairness, e.test_performance, e.test_fairness});
  const auto chosen = analysis::select_epoch(points, {});
  out.selected_epoch = chosen.epoch;
  const train::Model selected =
      train::model_from_checkpoint(nn::load_checkpoint(out.run_dir / run.epochs[chosen.position].checkpoint));

  ordered_json post_info = ordered_json::object();
  if (config.INLP) {
    const std::string stage = "post:INLP";
    in_stage(stage, [&] {
      const Matrix h_train = train::hidden(selected, bundle.train.X);
      const Matrix h_dev = train::hidden(selected, bundle.dev.X);
      post::InlpConfig ic;
      ic.max_iterations = config.inlp_iterations;
      const auto proj = post::inlp(h_train, bundle.train.g, ic, &h_dev, &bundle.dev.g);
      post::save_projection(proj.P, out.run_dir / "projection.bin");
      const auto clf = post::apply_inlp_and_refit(selected, proj.P, bundle.train);
      const auto& d = bundle.dev;
      const auto& t = bundle.test;
      const auto dev = eval::evaluate(clf.predict(d.X), d.y, d.g, d.num_classes, d.num_groups);
      const auto test = eval::evaluate(clf.predict(t.X), t.y, t.g, t.num_classes, t.num_groups);
      ordered_json row = epoch_row(out.selected_epoch, dev, test);
      row["stage"] = stage;
      row["final"] = true;
      epochs << row.dump() << "\n";
      post_info["INLP"] = {{"iterations", proj.iterations_applied},
                           {"removed_rank", proj.removed_rank},
                           {"probe_accuracies", proj.probe_accuracies},
                           {"dev_probe_accuracies", proj.eval_probe_accuracies},
                           {"projection", "projection.bin"}};
      return 0;
    });
  }
  if (config.gate_soft) {
    const std::string stage = "post:Gate-soft";
    in_stage(stage, [&] {
      const auto prior = post::gate_soft_search(selected, bundle.dev, config.gate_soft_grid);
      const auto& d = bundle.dev;
      const auto& t = bundle.test;
      const auto dev = eval::evaluate(post::predict_with_prior(selected, d.X, prior.prior), d.y, d.g,
                                      d.num_classes, d.num_groups);
      const auto test = eval::evaluate(post::predict_with_prior(selected, t.X, prior.prior), t.y, t.g,
                                       t.num_classes, t.num_groups);
      ordered_json row = epoch_row(out.selected_epoch, dev, test);
      row["stage"] = stage;
      row["final"] = true;
      epochs << row.dump() << "\n";
      post_info["Gate-soft"] = {{"prior", std::vector<double>(prior.prior.data(), prior.prior.data() + prior.prior.size())},
                                {"score", prior.score}};
      return 0;
    });
  }
  epochs.close();
  if (!epochs) throw Error(ErrorKind::Io, "failed writing epochs.jsonl");

  std::vector<std::string> files{"opt.yaml", "epochs.jsonl"};
  for (const auto& e : run.epochs) files.push_back(e.checkpoint);
  if (config.INLP) files.emplace_back("projection.bin");
  manifest["status"] = "finalized";
  manifest["finished"] = utc_timestamp();
  manifest["selected_epoch"] = out.selected_epoch;
  manifest["post"] = post_info;
  manifest["files"] = files;
  write_json(out.run_dir / "manifest.json", manifest);
  return out;
}

AnalyzeOutcome cmd_analyze(const AnalyzeOptions& options) {
  options.criterion.validate();
  const auto loaded = analysis::load_runs(options.results_dir);
  if (loaded.runs.empty())
    throw Error(ErrorKind::EmptyInput, "no finalized runs under " + options.results_dir.string());
  if (loaded.skipped > 0) std::cerr << "warning: skipped " << loaded.skipped << " unfinalized run(s)\n";

  std::map<std::string, std::vector<analysis::RunSummary>> by_method;
  for (const auto& r : loaded.runs) by_method[r.method].push_back(r);

  AnalyzeOutcome out;
  out.skipped = loaded.skipped;
  out.table.criterion = options.criterion;
  ordered_json sel = ordered_json::object();
  sel["criterion"] = analysis::to_string(options.criterion.kind);
  sel["threshold"] = options.criterion.threshold;
  sel["utopia"] = {options.criterion.utopia.first, options.criterion.utopia.second};
  sel["selection_split"] = "dev";
  sel["report_split"] = "test";
  sel["skipped_runs"] = loaded.skipped;
  sel["methods"] = ordered_json::array();
  for (const auto& [method, runs] : by_method) {
    const auto ms = analysis::select_across_hyperparameters(runs, options.criterion);
    std::vector<std::pair<double, double>> test;
    ordered_json seeds = ordered_json::array();
    for (const auto& s : ms.seeds) {
      test.emplace_back(s.test_performance, s.test_fairness);
      seeds.push_back({{"seed", s.seed},
                       {"run", s.run_id},
                       {"epoch", s.epoch},
                       {"fallback", s.fallback},
                       {"dev_performance", s.dev_performance},
                       {"dev_fairness", s.dev_fairness},
                       {"test_performance", s.test_performance},
                       {"test_fairness", s.test_fairness}});
    }
    out.table.rows.push_back({method, analysis::aggregate_runs(test)});
    ordered_json m;
    m["method"] = method;
    m["index"] = ms.index;
    m["fallback"] = ms.fallback;
    m["dev_performance"] = ms.dev_performance;
    m["dev_fairness"] = ms.dev_fairness;
    if (ms.seeds.size() == 1)
      m["note"] = "single run; std omitted. Selecting the index per seed would give spread but is not comparable";
    m["seeds"] = seeds;
    sel["methods"].push_back(m);
    out.selections.push_back(ms);
  }

  const fs::path dir = options.out_dir.value_or(options.results_dir);
  fs::create_directories(dir);
  write_text(dir / "results_table.md", analysis::emit_table(out.table, analysis::TableFormat::Markdown));
  write_text(dir / "results_table.tex", analysis::emit_table(out.table, analysis::TableFormat::Latex));
  write_text(dir / "results_table.csv", analysis::emit_table(out.table, analysis::TableFormat::Csv));
  write_text(dir / "tradeoff.json",
             analysis::emit_tradeoff_data(loaded.runs, {options.pareto_only, options.criterion}));
  write_text(dir / "selection.json", sel.dump(2) + "\n");
  return out;
}

void cmd_generate(const fs::path& spec_path, const fs::path& out_dir, Index d, int classes, int groups,
                  std::uint64_t seed) {
  const data::SyntheticSpec spec = spec_path.empty() ? data::default_synthetic_spec(d, classes, groups, seed)
                                                     : data::load_synthetic_spec(spec_path);
  data::validate(spec);
  const auto bundle = data::generate_synthetic(spec);
  fs::create_directories(out_dir);
  data::save_jsonl(bundle.train, out_dir / "train.jsonl");
  data::save_jsonl(bundle.dev, out_dir / "dev.jsonl");
  data::save_jsonl(bundle.test, out_dir / "test.jsonl");
  data::save_synthetic_spec(spec, out_dir / "spec.yaml");
}

}  // namespace fairkit::cli

#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "fairkit/analysis/selection.hpp"
#include "fairkit/cli/config.hpp"
#include "fairkit/data/dataset.hpp"
#include "fairkit/error.hpp"

namespace fairkit::cli {

/// 0 ok, 2 configuration, 3 IO/parse, 4 training diverged, 5 nothing to analyse.
int exit_code(ErrorKind kind);

/// "synthetic" generates from synthetic_spec (or the default spec sized by
/// emb_size/num_classes/num_groups/seed); anything else names a directory,
/// relative to data_dir when that is set, holding train/dev/test as .jsonl or
/// .csv. Throws Io when files are missing.
data::DatasetBundle resolve_dataset(const TrainConfig& config);

struct TrainOutcome {
  std::filesystem::path run_dir;
  int selected_epoch = 0;
  std::vector<std::string> stages;
};

/// Runs pre-processing, training and post-processing, writing opt.yaml,
/// manifest.json, epochs.jsonl and checkpoints/ under results_dir/<hash>.
/// Stage failures are rethrown with the stage label prepended.
TrainOutcome cmd_train(const TrainConfig& config);

struct AnalyzeOptions {
  std::filesystem::path results_dir = "results";
  std::optional<std::filesystem::path> out_dir;  // defaults to results_dir
  analysis::SelectionCriterion criterion;
  bool pareto_only = false;
};

struct AnalyzeOutcome {
  std::vector<analysis::MethodSelection> selections;
  analysis::ResultsTable table;
  std::size_t skipped = 0;
};

/// Writes results_table.{md,tex,csv}, tradeoff.json and selection.json.
/// Throws EmptyInput when no run is finalized.
AnalyzeOutcome cmd_analyze(const AnalyzeOptions& options);

/// Writes train/dev/test.jsonl and spec.yaml. An empty spec path uses the
/// default spec for `d`, `classes`, `groups` and `seed`.
void cmd_generate(const std::filesystem::path& spec_path, const std::filesystem::path& out_dir, Index d = 8,
                  int classes = 2, int groups = 2, std::uint64_t seed = 0);

}  // namespace fairkit::cli

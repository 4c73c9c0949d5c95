#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "fairkit/eval/metrics.hpp"

namespace fairkit::analysis {

enum class CriterionKind { DTO, ConstrainedFairness, ConstrainedPerformance };

/// ConstrainedFairness keeps candidates with performance >= threshold and
/// maximises fairness; ConstrainedPerformance is the mirror image.
struct SelectionCriterion {
  CriterionKind kind = CriterionKind::DTO;
  double threshold = 0.0;
  std::pair<double, double> utopia{1.0, 1.0};

  void validate() const;
};

std::string to_string(CriterionKind kind);
CriterionKind criterion_from_string(const std::string& name);

struct EpochPoint {
  int epoch = 0;
  double dev_performance = 0.0;
  double dev_fairness = 0.0;
  double test_performance = 0.0;
  double test_fairness = 0.0;
};

struct Choice {
  std::size_t position = 0;  // into the candidate list
  bool fallback = false;     // no candidate met the threshold
};

/// Generic selection over (performance, fairness) pairs; ties go to the
/// earliest candidate.
Choice choose(const std::vector<std::pair<double, double>>& points, const SelectionCriterion& criterion);

struct EpochSelection {
  std::size_t position = 0;
  int epoch = 0;
  bool fallback = false;
};

/// Selection on dev metrics. Throws EmptyInput for an empty run.
EpochSelection select_epoch(const std::vector<EpochPoint>& epochs, const SelectionCriterion& criterion);

using HyperIndex = std::map<std::string, double>;

struct RunSummary {
  std::string run_id;
  std::string method;
  HyperIndex index;
  std::uint64_t seed = 0;
  std::vector<EpochPoint> epochs;  // candidate checkpoints
};

struct SeedResult {
  std::uint64_t seed = 0;
  std::string run_id;
  int epoch = 0;
  bool fallback = false;
  double dev_performance = 0.0;
  double dev_fairness = 0.0;
  double test_performance = 0.0;
  double test_fairness = 0.0;
};

struct MethodSelection {
  std::string method;
  HyperIndex index;
  bool fallback = false;
  double dev_performance = 0.0;  // seed mean at the chosen index
  double dev_fairness = 0.0;
  std::vector<SeedResult> seeds;  // ordered by seed, then run id
};

/// Runs must share one method and one index schema (IndexSchema otherwise).
/// Each run contributes its selected epoch; dev points are averaged over seeds
/// per index and the index is chosen by the same criterion. Ties go to the
/// smallest index in lexicographic (name, value) order.
MethodSelection select_across_hyperparameters(const std::vector<RunSummary>& runs,
                                              const SelectionCriterion& criterion);

/// Points not strictly dominated by another point, one copy per distinct
/// (performance, fairness), sorted by performance ascending.
std::vector<eval::TradeoffPoint> pareto_frontier(const std::vector<eval::TradeoffPoint>& points);

struct Aggregate {
  std::size_t n = 0;
  double performance_mean = 0.0;
  double fairness_mean = 0.0;
  std::optional<double> performance_std;  // sample std, only for n >= 2
  std::optional<double> fairness_std;
  double dto = 0.0;                       // of the means
};

Aggregate aggregate_runs(const std::vector<std::pair<double, double>>& performance_fairness,
                         std::pair<double, double> utopia = {1.0, 1.0});

struct ResultRow {
  std::string method;
  Aggregate aggregate;
};

struct ResultsTable {
  std::vector<ResultRow> rows;
  SelectionCriterion criterion;
};

enum class TableFormat { Markdown, Latex, Csv };

/// Percent scale, two decimals.
std::string emit_table(const ResultsTable& table, TableFormat format);

struct TradeoffOptions {
  bool pareto_only = false;
  SelectionCriterion criterion;
};

/// JSON: {"criterion", "threshold", "pareto_only", "series": [{"method",
/// "points": [{"run", "seed", "epoch", "index", "dev_performance",
/// "dev_fairness", "test_performance", "test_fairness"}]}]}. One point per run
/// at its selected epoch; with pareto_only the series keeps the dev frontier.
/// Series are ordered by method name, points by dev performance then run id.
std::string emit_tradeoff_data(const std::vector<RunSummary>& runs, const TradeoffOptions& options);

struct LoadedRuns {
  std::vector<RunSummary> runs;  // sorted by run id
  std::size_t skipped = 0;       // directories without a finalized manifest
};

/// Reads <dir>/*/manifest.json and epochs.jsonl. A run whose epochs.jsonl
/// carries a row with "final": true contributes that row as its only
/// candidate; otherwise every epoch row is a candidate.
LoadedRuns load_runs(const std::filesystem::path& results_dir);

}  // namespace fairkit::analysis

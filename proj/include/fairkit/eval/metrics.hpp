#pragma once

#include <cmath>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <utility>

#include "fairkit/types.hpp"

namespace fairkit::eval {

struct Counts {
  long tp = 0;
  long fp = 0;
  long tn = 0;
  long fn = 0;

  long total() const { return tp + fp + tn + fn; }
  Counts& operator+=(const Counts& o) {
    tp += o.tp;
    fp += o.fp;
    tn += o.tn;
    fn += o.fn;
    return *this;
  }
  bool operator==(const Counts&) const = default;
};

/// One-vs-rest confusion counts per (class, group) and per class.
struct GroupedConfusion {
  int num_classes = 0;
  int num_groups = 0;
  std::vector<Counts> cells;    // index c * num_groups + g
  std::vector<Counts> overall;  // index c

  const Counts& at(int c, int g) const { return cells[static_cast<std::size_t>(c * num_groups + g)]; }
};

GroupedConfusion confusion_by_group(const Labels& predictions, const Labels& y, const Labels& g,
                                    int num_classes, int num_groups);

enum class MetricKind { PositiveRate, TPR, FPR, Precision, NPV, Custom };

/// A confusion-matrix metric; `nullopt` marks a 0/0 denominator.
struct CmMetric {
  MetricKind kind = MetricKind::TPR;
  std::string name = "TPR";
  std::function<std::optional<double>(const Counts&)> custom;

  static CmMetric of(MetricKind kind);
  static CmMetric from_name(const std::string& name);
};

template <typename Scalar = double>
std::optional<Scalar> ratio(long num, long den) {
  if (den == 0) return std::nullopt;
  return static_cast<Scalar>(num) / static_cast<Scalar>(den);
}

std::optional<double> cm_metric(const Counts& c, MetricKind kind);
std::optional<double> cm_metric(const Counts& c, const CmMetric& metric);

/// Per-(class, group) metric table; undefined cells hold nullopt.
struct MetricTable {
  int num_classes = 0;
  int num_groups = 0;
  std::vector<std::optional<double>> cells;    // c * num_groups + g
  std::vector<std::optional<double>> overall;  // per class

  const std::optional<double>& at(int c, int g) const {
    return cells[static_cast<std::size_t>(c * num_groups + g)];
  }
};

MetricTable metric_table(const GroupedConfusion& gc, const CmMetric& metric);

struct GapResult {
  double gap = 0.0;
  double fairness = 1.0;
  MetricTable per_group;
};

/// gap_c = sum_g |m(c, g) - m(c)| over defined cells; GAP is the RMS of gap_c
/// over classes with a defined cell; fairness = 1 - GAP.
GapResult gap_and_fairness(const GroupedConfusion& gc, const CmMetric& metric);

/// Worst-off group utility.
double rawlsian_min(const std::map<int, double>& per_group_performance);

/// max over defined (c, g) of |m(c, g) - m(c)|.
double max_violation(const MetricTable& table);

double accuracy(const Labels& predictions, const Labels& y);
double macro_f1(const GroupedConfusion& gc);

/// Euclidean distance to the utopia point.
template <typename Scalar>
Scalar dto(Scalar performance, Scalar fairness, Scalar utopia_performance = Scalar(1),
           Scalar utopia_fairness = Scalar(1)) {
  using std::sqrt;
  const Scalar dp = utopia_performance - performance;
  const Scalar df = utopia_fairness - fairness;
  return sqrt(dp * dp + df * df);
}

struct TradeoffPoint {
  double performance = 0.0;
  double fairness = 0.0;
  std::string origin;

  bool operator==(const TradeoffPoint&) const = default;
};

inline double dto(const TradeoffPoint& p, std::pair<double, double> utopia = {1.0, 1.0}) {
  return dto<double>(p.performance, p.fairness, utopia.first, utopia.second);
}

enum class PerformanceMetric { Accuracy, MacroF1 };

struct FairnessReport {
  double performance = 0.0;
  double gap = 0.0;
  double fairness = 1.0;
  double rawlsian_min = 0.0;
  double max_violation = 0.0;
  CmMetric metric;
  MetricTable per_group_metric;
  std::map<int, double> per_group_performance;
};

FairnessReport evaluate(const Labels& predictions, const Labels& y, const Labels& g, int num_classes,
                        int num_groups, const CmMetric& metric = CmMetric::of(MetricKind::TPR),
                        PerformanceMetric performance = PerformanceMetric::Accuracy);

/// Flat JSON object: accuracy (or macro_f1), <metric>_GAP, fairness,
/// rawlsian_min, max_violation, per_group table.
std::string to_json(const FairnessReport& report);

}  // namespace fairkit::eval

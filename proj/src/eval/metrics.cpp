#include "fairkit/eval/metrics.hpp"

#include <algorithm>

#include <json.hpp>

#include "fairkit/error.hpp"

namespace fairkit::eval {

GroupedConfusion confusion_by_group(const Labels& predictions, const Labels& y, const Labels& g,
                                    int num_classes, int num_groups) {
  if (predictions.size() != y.size() || g.size() != y.size())
    throw Error(ErrorKind::Shape, "predictions, labels and groups must have equal length");
  if (num_classes < 1 || num_groups < 1) throw Error(ErrorKind::LabelDomain, "need >= 1 class and group");
  GroupedConfusion gc;
  gc.num_classes = num_classes;
  gc.num_groups = num_groups;
  gc.cells.assign(static_cast<std::size_t>(num_classes * num_groups), {});
  gc.overall.assign(static_cast<std::size_t>(num_classes), {});
  for (Index i = 0; i < y.size(); ++i) {
    const int truth = y[i], pred = predictions[i], grp = g[i];
    if (truth < 0 || truth >= num_classes || pred < 0 || pred >= num_classes)
      throw Error(ErrorKind::LabelDomain, "class label out of range at row " + std::to_string(i));
    if (grp < 0 || grp >= num_groups)
      throw Error(ErrorKind::LabelDomain, "group label out of range at row " + std::to_string(i));
    for (int c = 0; c < num_classes; ++c) {
      Counts& cell = gc.cells[static_cast<std::size_t>(c * num_groups + grp)];
      const bool actual = truth == c;
      const bool predicted = pred == c;
      if (actual && predicted) ++cell.tp;
      else if (!actual && predicted) ++cell.fp;
      else if (!actual) ++cell.tn;
      else ++cell.fn;
    }
  }
  for (int c = 0; c < num_classes; ++c)
    for (int grp = 0; grp < num_groups; ++grp) gc.overall[c] += gc.at(c, grp);
  return gc;
}

CmMetric CmMetric::of(MetricKind kind) {
  switch (kind) {
    case MetricKind::PositiveRate: return {kind, "PositiveRate", {}};
    case MetricKind::TPR: return {kind, "TPR", {}};
    case MetricKind::FPR: return {kind, "FPR", {}};
    case MetricKind::Precision: return {kind, "Precision", {}};
    case MetricKind::NPV: return {kind, "NPV", {}};
    case MetricKind::Custom: break;
  }
  throw Error(ErrorKind::Config, "custom metrics need a function");
}

CmMetric CmMetric::from_name(const std::string& name) {
  for (auto kind : {MetricKind::PositiveRate, MetricKind::TPR, MetricKind::FPR, MetricKind::Precision,
                    MetricKind::NPV})
    if (of(kind).name == name) return of(kind);
  throw Error(ErrorKind::Config, "unknown fairness metric '" + name + "'");
}

std::optional<double> cm_metric(const Counts& c, MetricKind kind) {
  switch (kind) {
    case MetricKind::PositiveRate: return ratio(c.tp + c.fp, c.total());
    case MetricKind::TPR: return ratio(c.tp, c.tp + c.fn);
    case MetricKind::FPR: return ratio(c.fp, c.fp + c.tn);
    case MetricKind::Precision: return ratio(c.tp, c.tp + c.fp);
    case MetricKind::NPV: return ratio(c.tn, c.tn + c.fn);
    case MetricKind::Custom: break;
  }
  throw Error(ErrorKind::Config, "custom metrics need a function");
}

std::optional<double> cm_metric(const Counts& c, const CmMetric& metric) {
  if (metric.kind == MetricKind::Custom) {
    if (!metric.custom) throw Error(ErrorKind::Config, "custom metric '" + metric.name + "' has no function");
    return metric.custom(c);
  }
  return cm_metric(c, metric.kind);
}

MetricTable metric_table(const GroupedConfusion& gc, const CmMetric& metric) {
  MetricTable t;
  t.num_classes = gc.num_classes;
  t.num_groups = gc.num_groups;
  for (const auto& cell : gc.cells) t.cells.push_back(cm_metric(cell, metric));
  for (const auto& cell : gc.overall) t.overall.push_back(cm_metric(cell, metric));
  return t;
}

GapResult gap_and_fairness(const GroupedConfusion& gc, const CmMetric& metric) {
  GapResult r;
  r.per_group = metric_table(gc, metric);
  double sum_sq = 0.0;
  int classes = 0;
  for (int c = 0; c < gc.num_classes; ++c) {
    const auto& overall = r.per_group.overall[c];
    if (!overall) continue;
    double gap_c = 0.0;
    bool defined = false;
    for (int g = 0; g < gc.num_groups; ++g) {
      const auto& m = r.per_group.at(c, g);
      if (!m) continue;
      gap_c += std::abs(*m - *overall);
      defined = true;
    }
    if (!defined) continue;
    sum_sq += gap_c * gap_c;
    ++classes;
  }
  if (classes == 0) throw Error(ErrorKind::EvaluationDegenerate, "every " + metric.name + " cell is undefined");
  r.gap = std::sqrt(sum_sq / classes);
  r.fairness = 1.0 - r.gap;
  return r;
}

double rawlsian_min(const std::map<int, double>& per_group_performance) {
  if (per_group_performance.empty()) throw Error(ErrorKind::EvaluationDegenerate, "no groups to compare");
  double lo = per_group_performance.begin()->second;
  for (const auto& [group, value] : per_group_performance) lo = std::min(lo, value);
  return lo;
}

double max_violation(const MetricTable& table) {
  double worst = 0.0;
  bool any = false;
  for (int c = 0; c < table.num_classes; ++c) {
    if (!table.overall[c]) continue;
    for (int g = 0; g < table.num_groups; ++g) {
      const auto& m = table.at(c, g);
      if (!m) continue;
      worst = std::max(worst, std::abs(*m - *table.overall[c]));
      any = true;
    }
  }
  if (!any) throw Error(ErrorKind::EvaluationDegenerate, "no defined metric cell");
  return worst;
}

double accuracy(const Labels& predictions, const Labels& y) {
  if (predictions.size() != y.size()) throw Error(ErrorKind::Shape, "prediction/label length mismatch");
  if (y.size() == 0) throw Error(ErrorKind::EvaluationDegenerate, "accuracy of an empty set");
  return static_cast<double>((predictions.array() == y.array()).count()) / static_cast<double>(y.size());
}

double macro_f1(const GroupedConfusion& gc) {
  double total = 0.0;
  for (const auto& c : gc.overall) {
    const long den = 2 * c.tp + c.fp + c.fn;
    total += den == 0 ? 0.0 : 2.0 * static_cast<double>(c.tp) / static_cast<double>(den);
  }
  return total / static_cast<double>(gc.overall.size());
}

FairnessReport evaluate(const Labels& predictions, const Labels& y, const Labels& g, int num_classes,
                        int num_groups, const CmMetric& metric, PerformanceMetric performance) {
  const auto gc = confusion_by_group(predictions, y, g, num_classes, num_groups);
  FairnessReport report;
  report.metric = metric;
  report.performance = performance == PerformanceMetric::Accuracy ? accuracy(predictions, y) : macro_f1(gc);
  auto gap = gap_and_fairness(gc, metric);
  report.gap = gap.gap;
  report.fairness = gap.fairness;
  report.per_group_metric = std::move(gap.per_group);
  report.max_violation = max_violation(report.per_group_metric);

  std::vector<long> hits(static_cast<std::size_t>(num_groups), 0), sizes(static_cast<std::size_t>(num_groups), 0);
  for (Index i = 0; i < y.size(); ++i) {
    ++sizes[g[i]];
    if (predictions[i] == y[i]) ++hits[g[i]];
  }
  for (int grp = 0; grp < num_groups; ++grp)
    if (sizes[grp] > 0)
      report.per_group_performance[grp] = static_cast<double>(hits[grp]) / static_cast<double>(sizes[grp]);
  report.rawlsian_min = rawlsian_min(report.per_group_performance);
  return report;
}

std::string to_json(const FairnessReport& report) {
  nlohmann::ordered_json j;
  j["accuracy"] = report.performance;
  j[report.metric.name + "_GAP"] = report.gap;
  j["fairness"] = report.fairness;
  j["rawlsian_min"] = report.rawlsian_min;
  j["max_violation"] = report.max_violation;
  auto table = nlohmann::ordered_json::array();
  const auto& t = report.per_group_metric;
  for (int c = 0; c < t.num_classes; ++c)
    for (int g = 0; g < t.num_groups; ++g) {
      nlohmann::ordered_json cell{{"class", c}, {"group", g}};
      cell["value"] = t.at(c, g) ? nlohmann::ordered_json(*t.at(c, g)) : nlohmann::ordered_json(nullptr);
      table.push_back(cell);
    }
  j["per_group"] = table;
  return j.dump();
}

}  // namespace fairkit::eval

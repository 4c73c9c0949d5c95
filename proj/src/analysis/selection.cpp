#include "fairkit/analysis/selection.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>
#include <tuple>

#include <json.hpp>

#include "fairkit/error.hpp"

namespace fairkit::analysis {

namespace {

using ordered_json = nlohmann::ordered_json;

std::string fixed2(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string latex_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '_' || c == '&' || c == '%' || c == '#') out += '\\';
    out += c;
  }
  return out;
}

std::string cell(double mean, const std::optional<double>& sd, const std::string& pm) {
  std::string s = fixed2(100.0 * mean);
  if (sd) s += " " + pm + " " + fixed2(100.0 * *sd);
  return s;
}

ordered_json index_json(const HyperIndex& index) {
  ordered_json j = ordered_json::object();
  for (const auto& [k, v] : index) j[k] = v;
  return j;
}

std::set<std::string> schema_of(const HyperIndex& index) {
  std::set<std::string> keys;
  for (const auto& kv : index) keys.insert(kv.first);
  return keys;
}

}  // namespace

void SelectionCriterion::validate() const {
  if (kind != CriterionKind::DTO && (threshold < 0.0 || threshold > 1.0 || !std::isfinite(threshold)))
    throw Error(ErrorKind::Config, "selection threshold must lie in [0, 1]");
}

std::string to_string(CriterionKind kind) {
  switch (kind) {
    case CriterionKind::DTO: return "DTO";
    case CriterionKind::ConstrainedFairness: return "ConstrainedFairness";
    case CriterionKind::ConstrainedPerformance: return "ConstrainedPerformance";
  }
  return "?";
}

CriterionKind criterion_from_string(const std::string& name) {
  for (auto k : {CriterionKind::DTO, CriterionKind::ConstrainedFairness, CriterionKind::ConstrainedPerformance})
    if (to_string(k) == name) return k;
  throw Error(ErrorKind::Config, "unknown selection criterion '" + name + "'");
}

Choice choose(const std::vector<std::pair<double, double>>& points, const SelectionCriterion& criterion) {
  if (points.empty()) throw Error(ErrorKind::EmptyInput, "no candidates to select from");
  criterion.validate();
  Choice best;
  if (criterion.kind == CriterionKind::DTO) {
    double best_d = 0.0;
    for (std::size_t i = 0; i < points.size(); ++i) {
      const double d = eval::dto<double>(points[i].first, points[i].second, criterion.utopia.first,
                                         criterion.utopia.second);
      if (i == 0 || d < best_d) {
        best_d = d;
        best.position = i;
      }
    }
    return best;
  }
  // constrained is the metric with the threshold, free the one maximised.
  const bool on_performance = criterion.kind == CriterionKind::ConstrainedFairness;
  auto constrained = [&](std::size_t i) { return on_performance ? points[i].first : points[i].second; };
  auto free_metric = [&](std::size_t i) { return on_performance ? points[i].second : points[i].first; };
  std::optional<std::size_t> pick;
  for (std::size_t i = 0; i < points.size(); ++i)
    if (constrained(i) >= criterion.threshold && (!pick || free_metric(i) > free_metric(*pick))) pick = i;
  if (pick) {
    best.position = *pick;
    return best;
  }
  best.fallback = true;
  for (std::size_t i = 1; i < points.size(); ++i)
    if (constrained(i) > constrained(best.position)) best.position = i;
  return best;
}

EpochSelection select_epoch(const std::vector<EpochPoint>& epochs, const SelectionCriterion& criterion) {
  if (epochs.empty()) throw Error(ErrorKind::EmptyInput, "run has no epochs");
  std::vector<std::pair<double, double>> pts;
  for (const auto& e : epochs) pts.emplace_back(e.dev_performance, e.dev_fairness);
  const Choice c = choose(pts, criterion);
  return {c.position, epochs[c.position].epoch, c.fallback};
}

MethodSelection select_across_hyperparameters(const std::vector<RunSummary>& runs,
                                              const SelectionCriterion& criterion) {
  if (runs.empty()) throw Error(ErrorKind::EmptyInput, "no runs to select from");
  const auto schema = schema_of(runs.front().index);
  for (const auto& r : runs) {
    if (r.method != runs.front().method)
      throw Error(ErrorKind::IndexSchema, "runs mix methods '" + runs.front().method + "' and '" + r.method + "'");
    if (schema_of(r.index) != schema)
      throw Error(ErrorKind::IndexSchema, "run " + r.run_id + " of " + r.method + " has a different index schema");
  }

  std::map<HyperIndex, std::vector<SeedResult>> by_index;
  for (const auto& r : runs) {
    const auto sel = select_epoch(r.epochs, criterion);
    const auto& e = r.epochs[sel.position];
    by_index[r.index].push_back({r.seed, r.run_id, e.epoch, sel.fallback, e.dev_performance, e.dev_fairness,
                                 e.test_performance, e.test_fairness});
  }
  std::vector<std::pair<double, double>> means;
  std::vector<const HyperIndex*> order;
  for (const auto& [index, seeds] : by_index) {
    double p = 0.0, f = 0.0;
    for (const auto& s : seeds) {
      p += s.dev_performance;
      f += s.dev_fairness;
    }
    means.emplace_back(p / static_cast<double>(seeds.size()), f / static_cast<double>(seeds.size()));
    order.push_back(&index);
  }
  const Choice c = choose(means, criterion);
  MethodSelection out;
  out.method = runs.front().method;
  out.index = *order[c.position];
  out.dev_performance = means[c.position].first;
  out.dev_fairness = means[c.position].second;
  out.seeds = by_index.at(out.index);
  std::sort(out.seeds.begin(), out.seeds.end(), [](const SeedResult& a, const SeedResult& b) {
    return std::tie(a.seed, a.run_id) < std::tie(b.seed, b.run_id);
  });
  out.fallback = c.fallback;
  for (const auto& s : out.seeds) out.fallback = out.fallback || s.fallback;
  return out;
}

std::vector<eval::TradeoffPoint> pareto_frontier(const std::vector<eval::TradeoffPoint>& points) {
  std::vector<eval::TradeoffPoint> out;
  for (std::size_t i = 0; i < points.size(); ++i) {
    const auto& p = points[i];
    bool dominated = false;
    for (const auto& q : points)
      if (q.performance >= p.performance && q.fairness >= p.fairness &&
          (q.performance > p.performance || q.fairness > p.fairness)) {
        dominated = true;
        break;
      }
    if (dominated) continue;
    const bool duplicate = std::any_of(out.begin(), out.end(), [&](const eval::TradeoffPoint& o) {
      return o.performance == p.performance && o.fairness == p.fairness;
    });
    if (!duplicate) out.push_back(p);
  }
  std::stable_sort(out.begin(), out.end(), [](const eval::TradeoffPoint& a, const eval::TradeoffPoint& b) {
    return a.performance < b.performance;
  });
  return out;
}

Aggregate aggregate_runs(const std::vector<std::pair<double, double>>& performance_fairness,
                         std::pair<double, double> utopia) {
  if (performance_fairness.empty()) throw Error(ErrorKind::EmptyInput, "nothing to aggregate");
  Aggregate a;
  a.n = performance_fairness.size();
  const double n = static_cast<double>(a.n);
  for (const auto& [p, f] : performance_fairness) {
    a.performance_mean += p;
    a.fairness_mean += f;
  }
  a.performance_mean /= n;
  a.fairness_mean /= n;
  if (a.n >= 2) {
    double sp = 0.0, sf = 0.0;
    for (const auto& [p, f] : performance_fairness) {
      sp += (p - a.performance_mean) * (p - a.performance_mean);
      sf += (f - a.fairness_mean) * (f - a.fairness_mean);
    }
    a.performance_std = std::sqrt(sp / (n - 1.0));
    a.fairness_std = std::sqrt(sf / (n - 1.0));
  }
  a.dto = eval::dto<double>(a.performance_mean, a.fairness_mean, utopia.first, utopia.second);
  return a;
}

std::string emit_table(const ResultsTable& table, TableFormat format) {
  std::ostringstream os;
  switch (format) {
    case TableFormat::Markdown:
      os << "| Method | Performance | Fairness | DTO |\n|---|---|---|---|\n";
      for (const auto& r : table.rows) {
        const auto& a = r.aggregate;
        os << "| " << r.method << " | " << cell(a.performance_mean, a.performance_std, "±") << " | "
           << cell(a.fairness_mean, a.fairness_std, "±") << " | " << fixed2(100.0 * a.dto) << " |\n";
      }
      break;
    case TableFormat::Latex:
      os << "\\begin{tabular}{lccc}\n\\toprule\nMethod & Performance & Fairness & DTO \\\\\n\\midrule\n";
      for (const auto& r : table.rows) {
        const auto& a = r.aggregate;
        os << latex_escape(r.method) << " & " << cell(a.performance_mean, a.performance_std, "$\\pm$") << " & "
           << cell(a.fairness_mean, a.fairness_std, "$\\pm$") << " & " << fixed2(100.0 * a.dto) << " \\\\\n";
      }
      os << "\\bottomrule\n\\end{tabular}\n";
      break;
    case TableFormat::Csv:
      os << "method,performance_mean,performance_std,fairness_mean,fairness_std,dto,n\n";
      for (const auto& r : table.rows) {
        const auto& a = r.aggregate;
        os << r.method << ',' << fixed2(100.0 * a.performance_mean) << ','
           << (a.performance_std ? fixed2(100.0 * *a.performance_std) : "") << ','
           << fixed2(100.0 * a.fairness_mean) << ',' << (a.fairness_std ? fixed2(100.0 * *a.fairness_std) : "")
           << ',' << fixed2(100.0 * a.dto) << ',' << a.n << '\n';
      }
      break;
  }
  return os.str();
}

std::string emit_tradeoff_data(const std::vector<RunSummary>& runs, const TradeoffOptions& options) {
  struct Point {
    const RunSummary* run;
    EpochPoint epoch;
  };
  std::map<std::string, std::vector<Point>> by_method;
  for (const auto& r : runs) {
    const auto sel = select_epoch(r.epochs, options.criterion);
    by_method[r.method].push_back({&r, r.epochs[sel.position]});
  }
  ordered_json root;
  root["criterion"] = to_string(options.criterion.kind);
  root["threshold"] = options.criterion.threshold;
  root["pareto_only"] = options.pareto_only;
  root["series"] = ordered_json::array();
  for (auto& [method, points] : by_method) {
    if (options.pareto_only) {
      std::vector<eval::TradeoffPoint> tp;
      for (const auto& p : points) tp.push_back({p.epoch.dev_performance, p.epoch.dev_fairness, p.run->run_id});
      const auto frontier = pareto_frontier(tp);
      std::vector<Point> kept;
      for (const auto& p : points)
        if (std::any_of(frontier.begin(), frontier.end(), [&](const eval::TradeoffPoint& f) {
              return f.performance == p.epoch.dev_performance && f.fairness == p.epoch.dev_fairness;
            }))
          kept.push_back(p);
      points = std::move(kept);
    }
    std::sort(points.begin(), points.end(), [](const Point& a, const Point& b) {
      return std::tie(a.epoch.dev_performance, a.run->run_id) < std::tie(b.epoch.dev_performance, b.run->run_id);
    });
    ordered_json series;
    series["method"] = method;
    series["points"] = ordered_json::array();
    for (const auto& p : points) {
      ordered_json j;
      j["run"] = p.run->run_id;
      j["seed"] = p.run->seed;
      j["epoch"] = p.epoch.epoch;
      j["index"] = index_json(p.run->index);
      j["dev_performance"] = p.epoch.dev_performance;
      j["dev_fairness"] = p.epoch.dev_fairness;
      j["test_performance"] = p.epoch.test_performance;
      j["test_fairness"] = p.epoch.test_fairness;
      series["points"].push_back(j);
    }
    root["series"].push_back(series);
  }
  return root.dump(2) + "\n";
}

LoadedRuns load_runs(const std::filesystem::path& results_dir) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(results_dir)) throw Error(ErrorKind::Io, results_dir.string() + " is not a directory");
  std::vector<fs::path> dirs;
  for (const auto& entry : fs::directory_iterator(results_dir))
    if (entry.is_directory()) dirs.push_back(entry.path());
  std::sort(dirs.begin(), dirs.end());

  LoadedRuns out;
  for (const auto& dir : dirs) {
    const fs::path manifest_path = dir / "manifest.json";
    std::ifstream ms(manifest_path);
    if (!ms) {
      ++out.skipped;
      continue;
    }
    nlohmann::json manifest;
    try {
      manifest = nlohmann::json::parse(ms);
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorKind::Parse, manifest_path.string() + ": " + e.what());
    }
    if (manifest.value("status", "") != "finalized") {
      ++out.skipped;
      continue;
    }
    RunSummary run;
    run.run_id = dir.filename().string();
    try {
      run.method = manifest.at("method").get<std::string>();
      run.seed = manifest.at("seed").get<std::uint64_t>();
      for (const auto& [k, v] : manifest.at("index").items()) run.index[k] = v.get<double>();
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorKind::Schema, manifest_path.string() + ": " + e.what());
    }

    std::ifstream es(dir / "epochs.jsonl");
    if (!es) throw Error(ErrorKind::Io, "finalized run " + run.run_id + " has no epochs.jsonl");
    std::vector<EpochPoint> epochs;
    std::optional<EpochPoint> final_row;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(es, line)) {
      ++line_no;
      if (line.empty()) continue;
      try {
        const auto j = nlohmann::json::parse(line);
        const bool is_final = j.value("final", false);
        if (j.contains("stage") && !is_final) continue;
        EpochPoint p{j.at("epoch").get<int>(), j.at("dev_performance").get<double>(),
                     j.at("dev_fairness").get<double>(), j.at("test_performance").get<double>(),
                     j.at("test_fairness").get<double>()};
        if (is_final) final_row = p;
        else epochs.push_back(p);
      } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::Parse, (dir / "epochs.jsonl").string() + " line " + std::to_string(line_no) + ": " +
                                          e.what());
      }
    }
    run.epochs = final_row ? std::vector<EpochPoint>{*final_row} : std::move(epochs);
    if (run.epochs.empty()) {
      ++out.skipped;
      continue;
    }
    out.runs.push_back(std::move(run));
  }
  return out;
}

}  // namespace fairkit::analysis

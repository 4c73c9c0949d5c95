#include "fairkit/data/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include <json.hpp>

#include "fairkit/error.hpp"

namespace fairkit::data {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string_view rest(line);
  while (true) {
    const auto comma = rest.find(',');
    out.push_back(trim(rest.substr(0, comma)));
    if (comma == std::string_view::npos) break;
    rest.remove_prefix(comma + 1);
  }
  return out;
}

std::optional<double> parse_real(const std::string& s) {
  double v = 0.0;
  const auto* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc() || ptr != end) return std::nullopt;
  return v;
}

int to_label(double v, const std::string& what, std::size_t line) {
  if (!std::isfinite(v) || v < 0.0 || v != std::floor(v) || v > 1e9)
    throw Error(ErrorKind::LabelDomain, "line " + std::to_string(line) + ": " + what + " value " +
                                            std::to_string(v) + " is not a nonnegative integer");
  return static_cast<int>(v);
}

Dataset finish(std::vector<std::vector<double>> rows, std::vector<int> y, std::vector<int> g,
               const Schema& schema, Split split, const std::string& source) {
  if (rows.empty()) throw Error(ErrorKind::Parse, source + ": no data rows");
  const Index n = static_cast<Index>(rows.size());
  const Index d = static_cast<Index>(rows.front().size());
  Matrix X(n, d);
  Labels yl(n), gl(n);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < d; ++j) X(i, j) = rows[i][j];
    yl[i] = y[i];
    gl[i] = g[i];
  }
  const int inferred_c = yl.maxCoeff() + 1;
  const int inferred_g = gl.maxCoeff() + 1;
  if (schema.num_classes > 0 && inferred_c > schema.num_classes)
    throw Error(ErrorKind::LabelDomain, source + ": label " + std::to_string(inferred_c - 1) +
                                            " outside declared " + std::to_string(schema.num_classes) + " classes");
  if (schema.num_groups > 0 && inferred_g > schema.num_groups)
    throw Error(ErrorKind::LabelDomain, source + ": protected label " + std::to_string(inferred_g - 1) +
                                            " outside declared " + std::to_string(schema.num_groups) + " groups");
  return make_dataset(std::move(X), std::move(yl), std::move(gl), split,
                      schema.num_classes > 0 ? schema.num_classes : inferred_c,
                      schema.num_groups > 0 ? schema.num_groups : inferred_g);
}

Dataset load_csv(const std::filesystem::path& path, const Schema& schema, Split split) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot open " + path.string());
  const std::string source = path.string();
  std::string line;
  if (!std::getline(in, line) || trim(line).empty())
    throw Error(ErrorKind::Parse, source + ": empty file (header row required)");
  const auto header = split_csv(line);
  auto find = [&](const std::string& name) -> std::size_t {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw Error(ErrorKind::Schema, source + ": missing column '" + name + "'");
    return static_cast<std::size_t>(it - header.begin());
  };
  const std::size_t y_col = find(schema.y_column);
  const std::size_t g_col = find(schema.g_column);
  std::vector<std::size_t> x_cols;
  if (schema.x_columns.empty()) {
    for (std::size_t c = 0; c < header.size(); ++c)
      if (c != y_col && c != g_col) x_cols.push_back(c);
  } else {
    for (const auto& name : schema.x_columns) x_cols.push_back(find(name));
  }
  if (x_cols.empty()) throw Error(ErrorKind::Schema, source + ": no feature columns");

  std::vector<std::vector<double>> rows;
  std::vector<int> y, g;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto cells = split_csv(line);
    if (cells.size() != header.size())
      throw Error(ErrorKind::Parse, source + ": line " + std::to_string(line_no) + " has " +
                                        std::to_string(cells.size()) + " fields, header has " +
                                        std::to_string(header.size()));
    auto value = [&](std::size_t c) {
      auto v = parse_real(cells[c]);
      if (!v)
        throw Error(ErrorKind::Parse, source + ": line " + std::to_string(line_no) + ": '" + cells[c] +
                                          "' is not numeric");
      return *v;
    };
    std::vector<double> row;
    row.reserve(x_cols.size());
    for (auto c : x_cols) row.push_back(value(c));
    rows.push_back(std::move(row));
    y.push_back(to_label(value(y_col), schema.y_column, line_no));
    g.push_back(to_label(value(g_col), schema.g_column, line_no));
  }
  return finish(std::move(rows), std::move(y), std::move(g), schema, split, source);
}

Dataset load_jsonl(const std::filesystem::path& path, const Schema& schema, Split split) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot open " + path.string());
  const std::string source = path.string();
  std::vector<std::vector<double>> rows;
  std::vector<int> y, g;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    nlohmann::json obj;
    try {
      obj = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw Error(ErrorKind::Parse, source + ": line " + std::to_string(line_no) + ": " + e.what());
    }
    for (const auto* key : {&schema.x_key, &schema.y_column, &schema.g_column})
      if (!obj.is_object() || !obj.contains(*key))
        throw Error(ErrorKind::Schema, source + ": line " + std::to_string(line_no) + " lacks key '" + *key + "'");
    const auto& x = obj[schema.x_key];
    if (!x.is_array()) throw Error(ErrorKind::Parse, source + ": line " + std::to_string(line_no) + ": X is not an array");
    std::vector<double> row;
    for (const auto& v : x) {
      if (!v.is_number()) throw Error(ErrorKind::Parse, source + ": line " + std::to_string(line_no) + ": non-numeric feature");
      row.push_back(v.get<double>());
    }
    if (!rows.empty() && row.size() != rows.front().size())
      throw Error(ErrorKind::Parse, source + ": line " + std::to_string(line_no) + " has " +
                                        std::to_string(row.size()) + " features, expected " +
                                        std::to_string(rows.front().size()));
    if (row.empty()) throw Error(ErrorKind::Parse, source + ": line " + std::to_string(line_no) + ": empty X");
    auto label = [&](const std::string& key) {
      const auto& v = obj[key];
      if (!v.is_number()) throw Error(ErrorKind::LabelDomain, source + ": line " + std::to_string(line_no) + ": " + key + " is not numeric");
      return to_label(v.get<double>(), key, line_no);
    };
    y.push_back(label(schema.y_column));
    g.push_back(label(schema.g_column));
    rows.push_back(std::move(row));
  }
  return finish(std::move(rows), std::move(y), std::move(g), schema, split, source);
}

}  // namespace

std::string to_string(Split split) {
  switch (split) {
    case Split::Train: return "train";
    case Split::Dev: return "dev";
    case Split::Test: return "test";
  }
  return "train";
}

void Dataset::validate() const {
  const Index n = X.rows();
  if (n < 1) throw Error(ErrorKind::Shape, "dataset is empty");
  if (y.size() != n || g.size() != n || weights.size() != n)
    throw Error(ErrorKind::Shape, "dataset columns have inconsistent lengths");
  if (num_classes < 1 || num_groups < 1) throw Error(ErrorKind::LabelDomain, "class/group counts must be >= 1");
  for (Index i = 0; i < n; ++i) {
    if (y[i] < 0 || y[i] >= num_classes)
      throw Error(ErrorKind::LabelDomain, "row " + std::to_string(i) + ": class " + std::to_string(y[i]) +
                                              " outside [0, " + std::to_string(num_classes) + ")");
    if (g[i] < 0 || g[i] >= num_groups)
      throw Error(ErrorKind::LabelDomain, "row " + std::to_string(i) + ": group " + std::to_string(g[i]) +
                                              " outside [0, " + std::to_string(num_groups) + ")");
  }
  if (!weights.allFinite() || (weights.array() < 0.0).any())
    throw Error(ErrorKind::DegenerateWeights, "weights must be finite and nonnegative");
}

CellCounts Dataset::cell_counts() const {
  CellCounts counts = CellCounts::Zero(num_classes, num_groups);
  for (Index i = 0; i < size(); ++i) ++counts(y[i], g[i]);
  return counts;
}

Dataset Dataset::subset(const std::vector<Index>& indices) const {
  Dataset out;
  const Index n = static_cast<Index>(indices.size());
  out.X.resize(n, X.cols());
  out.y.resize(n);
  out.g.resize(n);
  for (Index i = 0; i < n; ++i) {
    out.X.row(i) = X.row(indices[i]);
    out.y[i] = y[indices[i]];
    out.g[i] = g[indices[i]];
  }
  out.weights = Vector::Ones(n);
  out.split = split;
  out.num_classes = num_classes;
  out.num_groups = num_groups;
  return out;
}

bool Dataset::operator==(const Dataset& o) const {
  return split == o.split && num_classes == o.num_classes && num_groups == o.num_groups &&
         X.rows() == o.X.rows() && X.cols() == o.X.cols() && X == o.X && y == o.y && g == o.g &&
         weights == o.weights;
}

Dataset make_dataset(Matrix X, Labels y, Labels g, Split split, int num_classes, int num_groups) {
  Dataset ds;
  ds.weights = Vector::Ones(X.rows());
  ds.X = std::move(X);
  ds.y = std::move(y);
  ds.g = std::move(g);
  ds.split = split;
  ds.num_classes = num_classes > 0 ? num_classes : (ds.y.size() ? ds.y.maxCoeff() + 1 : 0);
  ds.num_groups = num_groups > 0 ? num_groups : (ds.g.size() ? ds.g.maxCoeff() + 1 : 0);
  ds.validate();
  return ds;
}

FileFormat format_from_extension(const std::filesystem::path& path) {
  const auto ext = path.extension().string();
  if (ext == ".csv") return FileFormat::Csv;
  if (ext == ".jsonl" || ext == ".json") return FileFormat::Jsonl;
  throw Error(ErrorKind::Config, "cannot infer data format from '" + path.string() + "'");
}

Dataset load_dataset(const std::filesystem::path& path, FileFormat format, const Schema& schema, Split split) {
  return format == FileFormat::Csv ? load_csv(path, schema, split) : load_jsonl(path, schema, split);
}

void save_jsonl(const Dataset& ds, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorKind::Io, "cannot write " + path.string());
  for (Index i = 0; i < ds.size(); ++i) {
    nlohmann::ordered_json row;
    std::vector<double> x(ds.X.cols());
    for (Index j = 0; j < ds.X.cols(); ++j) x[j] = ds.X(i, j);
    row["X"] = x;
    row["y"] = ds.y[i];
    row["protected_label"] = ds.g[i];
    out << row.dump() << '\n';
  }
  if (!out) throw Error(ErrorKind::Io, "failed writing " + path.string());
}

Batch gather(const Dataset& ds, const std::vector<Index>& indices) {
  Batch b;
  const Index n = static_cast<Index>(indices.size());
  b.X.resize(n, ds.X.cols());
  b.y.resize(n);
  b.g.resize(n);
  b.weights.resize(n);
  for (Index i = 0; i < n; ++i) {
    b.X.row(i) = ds.X.row(indices[i]);
    b.y[i] = ds.y[indices[i]];
    b.g[i] = ds.g[indices[i]];
    b.weights[i] = ds.weights[indices[i]];
  }
  b.indices = indices;
  return b;
}

std::vector<Batch> make_batches(const Dataset& ds, const BatchPlan& plan) {
  const Index n = ds.size();
  if (plan.batch_size < 1) throw Error(ErrorKind::Config, "batch_size must be positive");
  std::mt19937_64 rng(plan.shuffle_seed);
  std::vector<Batch> batches;

  if (!plan.group_sampling_probs) {
    if (plan.batch_size > n)
      throw Error(ErrorKind::Config, "batch_size " + std::to_string(plan.batch_size) +
                                         " exceeds dataset size " + std::to_string(n));
    std::vector<Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), Index{0});
    std::shuffle(order.begin(), order.end(), rng);
    for (Index start = 0; start < n; start += plan.batch_size) {
      const Index end = std::min(n, start + plan.batch_size);
      batches.push_back(gather(ds, std::vector<Index>(order.begin() + start, order.begin() + end)));
    }
    return batches;
  }

  const CellProbs& probs = *plan.group_sampling_probs;
  if (probs.rows() != ds.num_classes || probs.cols() != ds.num_groups)
    throw Error(ErrorKind::Shape, "sampling distribution must be num_classes x num_groups");
  if ((probs.array() < 0.0).any() || std::abs(probs.sum() - 1.0) > 1e-9)
    throw Error(ErrorKind::Config, "sampling distribution must be nonnegative and sum to 1");

  std::vector<std::vector<Index>> members(static_cast<std::size_t>(probs.size()));
  for (Index i = 0; i < n; ++i) members[ds.y[i] + ds.g[i] * probs.rows()].push_back(i);
  std::vector<double> mass(probs.data(), probs.data() + probs.size());
  for (std::size_t cell = 0; cell < mass.size(); ++cell)
    if (mass[cell] > 0.0 && members[cell].empty())
      throw Error(ErrorKind::EmptyCell, "cell (y=" + std::to_string(cell % probs.rows()) + ", g=" +
                                            std::to_string(cell / probs.rows()) + ") has probability mass but no instances");

  std::discrete_distribution<std::size_t> pick_cell(mass.begin(), mass.end());
  const Index num_batches = (n + plan.batch_size - 1) / plan.batch_size;
  for (Index b = 0; b < num_batches; ++b) {
    std::vector<Index> indices(static_cast<std::size_t>(plan.batch_size));
    for (auto& idx : indices) {
      const auto& cell = members[pick_cell(rng)];
      std::uniform_int_distribution<std::size_t> pick(0, cell.size() - 1);
      idx = cell[pick(rng)];
    }
    batches.push_back(gather(ds, indices));
  }
  return batches;
}

}  // namespace fairkit::data

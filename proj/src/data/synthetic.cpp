#include "fairkit/data/synthetic.hpp"

#include <algorithm>
#include <fstream>
#include <random>

#include <yaml-cpp/yaml.h>

#include "fairkit/error.hpp"

namespace fairkit::data {

namespace {

double spread(int index, int count, double half_width) {
  if (count < 2) return 0.0;
  return half_width * (2.0 * index / (count - 1) - 1.0);
}

void validate_table(const CellCounts& table, const char* name, const SyntheticSpec& spec) {
  if (table.rows() != spec.num_classes() || table.cols() != spec.num_groups())
    throw Error(ErrorKind::Spec, std::string(name) + " must be " + std::to_string(spec.num_classes()) + " x " +
                                     std::to_string(spec.num_groups()));
  if ((table.array() < 0).any()) throw Error(ErrorKind::Spec, std::string(name) + " has negative counts");
  for (int c = 0; c < table.rows(); ++c)
    for (int g = 0; g < table.cols(); ++g)
      if (table(c, g) == 0)
        throw Error(ErrorKind::Spec, std::string(name) + ": cell (y=" + std::to_string(c) + ", g=" +
                                         std::to_string(g) + ") is empty");
}

Dataset draw(const SyntheticSpec& spec, const CellCounts& table, Split split, std::uint64_t seed) {
  const int C = spec.num_classes();
  const int G = spec.num_groups();
  const Index n = table.sum();
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, spec.noise_sigma);
  Matrix X(n, spec.d);
  Labels y(n), g(n);
  Index row = 0;
  for (int c = 0; c < C; ++c)
    for (int grp = 0; grp < G; ++grp)
      for (int k = 0; k < table(c, grp); ++k, ++row) {
        for (Index j = 0; j < spec.d; ++j) X(row, j) = noise(rng);
        X(row, 0) += spread(c, C, spec.class_separation);
        X(row, 1) += spread(grp, G, spec.group_shift);
        y[row] = c;
        g[row] = grp;
      }
  // Interleave rows so files are not sorted by cell.
  std::vector<Index> order(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) order[i] = i;
  std::shuffle(order.begin(), order.end(), rng);
  Dataset ds = make_dataset(std::move(X), std::move(y), std::move(g), split, C, G);
  return ds.subset(order);
}

CellCounts read_table(const YAML::Node& node, const char* key) {
  const YAML::Node rows = node[key];
  if (!rows) return {};
  if (!rows.IsSequence() || rows.size() == 0)
    throw Error(ErrorKind::Spec, std::string(key) + " must be a list of per-class count lists");
  const auto C = static_cast<Index>(rows.size());
  const auto G = static_cast<Index>(rows[0].size());
  CellCounts table(C, G);
  for (Index c = 0; c < C; ++c) {
    if (!rows[c].IsSequence() || static_cast<Index>(rows[c].size()) != G)
      throw Error(ErrorKind::Spec, std::string(key) + ": ragged count table");
    for (Index g = 0; g < G; ++g) {
      try {
        table(c, g) = rows[c][g].as<int>();
      } catch (const YAML::Exception&) {
        throw Error(ErrorKind::Spec, std::string(key) + ": counts must be integers");
      }
    }
  }
  return table;
}

void write_table(YAML::Emitter& out, const char* key, const CellCounts& table) {
  out << YAML::Key << key << YAML::Value << YAML::BeginSeq;
  for (Index c = 0; c < table.rows(); ++c) {
    out << YAML::Flow << YAML::BeginSeq;
    for (Index g = 0; g < table.cols(); ++g) out << table(c, g);
    out << YAML::EndSeq;
  }
  out << YAML::EndSeq;
}

bool same_table(const CellCounts& a, const CellCounts& b) {
  return a.rows() == b.rows() && a.cols() == b.cols() && a == b;
}

}  // namespace

bool SyntheticSpec::operator==(const SyntheticSpec& o) const {
  return d == o.d && class_separation == o.class_separation && group_shift == o.group_shift &&
         noise_sigma == o.noise_sigma && seed == o.seed && same_table(n_per_cell, o.n_per_cell) &&
         same_table(dev_n_per_cell, o.dev_n_per_cell) && same_table(test_n_per_cell, o.test_n_per_cell);
}

void validate(const SyntheticSpec& spec) {
  if (spec.d < 2) throw Error(ErrorKind::Spec, "d must be >= 2");
  if (spec.num_classes() < 2 || spec.num_groups() < 2)
    throw Error(ErrorKind::Spec, "need at least 2 classes and 2 groups");
  if (!(spec.noise_sigma > 0.0)) throw Error(ErrorKind::Spec, "noise_sigma must be positive");
  validate_table(spec.n_per_cell, "n_per_cell", spec);
  if (spec.dev_n_per_cell.size()) validate_table(spec.dev_n_per_cell, "dev_n_per_cell", spec);
  if (spec.test_n_per_cell.size()) validate_table(spec.test_n_per_cell, "test_n_per_cell", spec);
}

DatasetBundle generate_synthetic(const SyntheticSpec& spec) {
  validate(spec);
  const auto& dev = spec.dev_n_per_cell.size() ? spec.dev_n_per_cell : spec.n_per_cell;
  const auto& test = spec.test_n_per_cell.size() ? spec.test_n_per_cell : spec.n_per_cell;
  return {draw(spec, spec.n_per_cell, Split::Train, mix_seed(spec.seed, 0)),
          draw(spec, dev, Split::Dev, mix_seed(spec.seed, 1)),
          draw(spec, test, Split::Test, mix_seed(spec.seed, 2))};
}

SyntheticSpec load_synthetic_spec(const std::filesystem::path& path) {
  YAML::Node root;
  try {
    root = YAML::LoadFile(path.string());
  } catch (const YAML::BadFile&) {
    throw Error(ErrorKind::Io, "cannot open synthetic spec " + path.string());
  } catch (const YAML::Exception& e) {
    throw Error(ErrorKind::Spec, path.string() + ": " + e.what());
  }
  if (!root.IsMap()) throw Error(ErrorKind::Spec, path.string() + ": expected a mapping");
  static const std::vector<std::string> known{"d", "class_separation", "group_shift", "noise_sigma", "seed",
                                              "n_per_cell", "dev_n_per_cell", "test_n_per_cell"};
  for (const auto& kv : root) {
    const auto key = kv.first.as<std::string>();
    if (std::find(known.begin(), known.end(), key) == known.end())
      throw Error(ErrorKind::Spec, path.string() + ": unknown key '" + key + "'");
  }
  SyntheticSpec spec;
  try {
    if (root["d"]) spec.d = root["d"].as<Index>();
    if (root["class_separation"]) spec.class_separation = root["class_separation"].as<double>();
    if (root["group_shift"]) spec.group_shift = root["group_shift"].as<double>();
    if (root["noise_sigma"]) spec.noise_sigma = root["noise_sigma"].as<double>();
    if (root["seed"]) spec.seed = root["seed"].as<std::uint64_t>();
  } catch (const YAML::Exception& e) {
    throw Error(ErrorKind::Spec, path.string() + ": " + e.what());
  }
  spec.n_per_cell = read_table(root, "n_per_cell");
  if (spec.n_per_cell.size() == 0) throw Error(ErrorKind::Spec, path.string() + ": n_per_cell is required");
  spec.dev_n_per_cell = read_table(root, "dev_n_per_cell");
  spec.test_n_per_cell = read_table(root, "test_n_per_cell");
  validate(spec);
  return spec;
}

void save_synthetic_spec(const SyntheticSpec& spec, const std::filesystem::path& path) {
  YAML::Emitter out;
  out.SetDoublePrecision(17);
  out << YAML::BeginMap;
  out << YAML::Key << "d" << YAML::Value << spec.d;
  out << YAML::Key << "class_separation" << YAML::Value << spec.class_separation;
  out << YAML::Key << "group_shift" << YAML::Value << spec.group_shift;
  out << YAML::Key << "noise_sigma" << YAML::Value << spec.noise_sigma;
  out << YAML::Key << "seed" << YAML::Value << spec.seed;
  write_table(out, "n_per_cell", spec.n_per_cell);
  if (spec.dev_n_per_cell.size()) write_table(out, "dev_n_per_cell", spec.dev_n_per_cell);
  if (spec.test_n_per_cell.size()) write_table(out, "test_n_per_cell", spec.test_n_per_cell);
  out << YAML::EndMap;
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw Error(ErrorKind::Io, "cannot write " + path.string());
  os << out.c_str() << '\n';
}

SyntheticSpec default_synthetic_spec(Index d, int num_classes, int num_groups, std::uint64_t seed) {
  SyntheticSpec spec;
  spec.d = std::max<Index>(d, 2);
  spec.seed = seed;
  spec.n_per_cell = CellCounts::Constant(num_classes, num_groups, 40);
  for (int c = 0; c < num_classes; ++c) spec.n_per_cell(c, c % num_groups) = 160;
  spec.dev_n_per_cell = CellCounts::Constant(num_classes, num_groups, 50);
  spec.test_n_per_cell = spec.dev_n_per_cell;
  return spec;
}

}  // namespace fairkit::data

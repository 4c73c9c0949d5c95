#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "fairkit/types.hpp"

namespace fairkit::data {

enum class Split { Train, Dev, Test };

std::string to_string(Split split);

/// Count table indexed (class, group).
using CellCounts = Eigen::MatrixXi;
/// Probability table indexed (class, group).
using CellProbs = Eigen::MatrixXd;

struct Dataset {
  Matrix X;        // n x d
  Labels y;        // n, in [0, num_classes)
  Labels g;        // n, in [0, num_groups)
  Vector weights;  // n, nonnegative
  Split split = Split::Train;
  int num_classes = 0;
  int num_groups = 0;

  Index size() const { return X.rows(); }
  Index dim() const { return X.cols(); }

  /// Throws LabelDomain/Shape/DegenerateWeights if any invariant fails.
  void validate() const;
  CellCounts cell_counts() const;
  /// Rows `indices` in the given order, weights reset to one.
  Dataset subset(const std::vector<Index>& indices) const;

  bool operator==(const Dataset&) const;
};

/// Unit weights; num_classes/num_groups inferred as max label + 1 when zero.
Dataset make_dataset(Matrix X, Labels y, Labels g, Split split = Split::Train, int num_classes = 0,
                     int num_groups = 0);

struct DatasetBundle {
  Dataset train;
  Dataset dev;
  Dataset test;
};

enum class FileFormat { Csv, Jsonl };

/// Column mapping for tabular input. Empty `x_columns` means every column
/// other than the label columns, in file order. JSONL rows always carry the
/// features as an array under `x_key`.
struct Schema {
  std::string y_column = "y";
  std::string g_column = "protected_label";
  std::vector<std::string> x_columns;
  std::string x_key = "X";
  int num_classes = 0;  // 0: infer
  int num_groups = 0;   // 0: infer
};

Dataset load_dataset(const std::filesystem::path& path, FileFormat format, const Schema& schema = {},
                     Split split = Split::Train);
FileFormat format_from_extension(const std::filesystem::path& path);

/// One JSON object per line: {"X": [...], "y": int, "protected_label": int}.
void save_jsonl(const Dataset& ds, const std::filesystem::path& path);

struct Batch {
  Matrix X;
  Labels y;
  Labels g;
  Vector weights;
  std::vector<Index> indices;  // rows of the source dataset

  Index size() const { return X.rows(); }
};

struct BatchPlan {
  Index batch_size = 64;
  std::uint64_t shuffle_seed = 0;
  /// FairBatch sampling distribution over (class, group) cells.
  std::optional<CellProbs> group_sampling_probs;
};

/// Without probabilities: a seeded permutation cut into batches. With
/// probabilities: ceil(n / batch_size) batches of batch_size draws, each draw
/// picking a cell from the distribution, then an instance of that cell
/// uniformly, with replacement.
std::vector<Batch> make_batches(const Dataset& ds, const BatchPlan& plan);

Batch gather(const Dataset& ds, const std::vector<Index>& indices);

}  // namespace fairkit::data

#pragma once

#include <cstdint>
#include <filesystem>

#include "fairkit/data/dataset.hpp"

namespace fairkit::data {

/// Gaussian classes with a group-dependent offset. Class means are spread
/// evenly over [-class_separation, class_separation] on axis 0, group means
/// over [-group_shift, group_shift] on axis 1; remaining axes are noise.
/// Cell counts are given per split as (class, group) tables; dev/test default
/// to the training table when left empty.
struct SyntheticSpec {
  Index d = 8;
  CellCounts n_per_cell;
  CellCounts dev_n_per_cell;
  CellCounts test_n_per_cell;
  double class_separation = 1.0;
  double group_shift = 2.0;
  double noise_sigma = 1.0;
  std::uint64_t seed = 0;

  int num_classes() const { return static_cast<int>(n_per_cell.rows()); }
  int num_groups() const { return static_cast<int>(n_per_cell.cols()); }

  bool operator==(const SyntheticSpec& other) const;
};

/// Throws Spec on any violated invariant.
void validate(const SyntheticSpec& spec);

/// Splits are drawn independently from seeds derived from `spec.seed`.
DatasetBundle generate_synthetic(const SyntheticSpec& spec);

/// YAML keys: d, class_separation, group_shift, noise_sigma, seed,
/// n_per_cell / dev_n_per_cell / test_n_per_cell (lists of per-class rows).
SyntheticSpec load_synthetic_spec(const std::filesystem::path& path);
void save_synthetic_spec(const SyntheticSpec& spec, const std::filesystem::path& path);

/// A biased binary-group default: group (c mod G) holds 80% of class c.
SyntheticSpec default_synthetic_spec(Index d, int num_classes, int num_groups, std::uint64_t seed);

}  // namespace fairkit::data

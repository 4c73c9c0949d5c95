#pragma once

#include <functional>
#include <vector>

#include "fairkit/data/dataset.hpp"
#include "fairkit/eval/metrics.hpp"
#include "fairkit/train/model.hpp"

namespace fairkit::post {

struct GatePrior {
  Vector prior;
  double score = 0.0;
};

/// Higher is better. The default is -DTO to the utopia (1, 1).
using PriorScore = std::function<double(const eval::FairnessReport&)>;
double negative_dto(const eval::FairnessReport& report);

/// All points of the simplex over `groups` with coordinates in multiples of
/// 1 / (resolution - 1), in lexicographic order of the integer compositions.
std::vector<Vector> simplex_grid(int groups, int resolution);

Labels predict_with_prior(const train::Model& model, const Eigen::Ref<const Matrix>& x,
                          const Eigen::Ref<const Vector>& prior);

/// Exhaustive search over simplex_grid; ties go to the prior closest to
/// uniform, then to the earliest grid point.
GatePrior gate_soft_search(const train::Model& model, const data::Dataset& dev, int resolution,
                           const PriorScore& score = negative_dto);

}  // namespace fairkit::post

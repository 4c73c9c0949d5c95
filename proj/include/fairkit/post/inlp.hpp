#pragma once

#include <filesystem>
#include <vector>

#include "fairkit/data/dataset.hpp"
#include "fairkit/nn/mlp.hpp"
#include "fairkit/train/model.hpp"
#include "fairkit/types.hpp"

namespace fairkit::post {

struct ProbeConfig {
  int steps = 500;
  double lr = 0.1;
};

/// Linear protected-attribute probe in the coordinates of its input.
/// Binary problems use one logistic row, otherwise one softmax row per group.
struct LinearProbe {
  Matrix weight;  // 1 x h or num_groups x h
  Vector bias;
  double accuracy = 0.0;

  Labels predict(const Eigen::Ref<const Matrix>& h) const;
};

/// Full-batch gradient descent from zero on centred features scaled so the
/// leading principal direction has unit variance. The learned rows therefore
/// stay in the span of the centred data.
LinearProbe fit_linear_probe(const Eigen::Ref<const Matrix>& h, const Labels& g, int num_groups = 0,
                             const ProbeConfig& config = {});

struct NullspaceResult {
  Matrix P;
  Index rank = 0;        // dimension of the removed row space
  bool warning = false;  // W was numerically zero; P is the identity
};

/// Projection onto the orthogonal complement of rowspace(W).
NullspaceResult nullspace_projection(const Eigen::Ref<const Matrix>& w);

struct Projection {
  Matrix P;
  int iterations_applied = 0;
  std::vector<double> probe_accuracies;       // on the training representations
  std::vector<double> eval_probe_accuracies;  // on the evaluation representations, if given
  Index removed_rank = 0;
};

struct InlpConfig {
  int max_iterations = 10;
  ProbeConfig probe;
};

/// Iteratively fits a probe on the projected representations and removes its
/// row space. Probe accuracies are those of the probe trained at each step.
Projection inlp(const Eigen::Ref<const Matrix>& h_train, const Labels& g_train, const InlpConfig& config,
                const Matrix* h_eval = nullptr, const Labels* g_eval = nullptr);

/// Binary file: magic "FAIRKPRJ", u64 rows, u64 cols, column-major binary64.
void save_projection(const Matrix& P, const std::filesystem::path& path);
Matrix load_projection(const std::filesystem::path& path);

struct RefitConfig {
  int steps = 500;
  double lr = 0.01;
};

/// Frozen encoder, projection on its representation and a retrained linear head.
struct ProjectedClassifier {
  nn::Network encoder;
  Matrix P;
  nn::Network head;

  Matrix project(const Eigen::Ref<const Matrix>& x) const;
  Labels predict(const Eigen::Ref<const Matrix>& x) const;
};

/// Trains a zero-initialised linear head with full-batch Adam on P * hidden(x)
/// of the training split, using its instance weights.
ProjectedClassifier apply_inlp_and_refit(const train::Model& model, const Matrix& P, const data::Dataset& train,
                                         const RefitConfig& config = {});

}  // namespace fairkit::post

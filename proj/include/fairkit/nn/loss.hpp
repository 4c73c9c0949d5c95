#pragma once

#include <optional>

#include "fairkit/types.hpp"

namespace fairkit::nn {

/// Row-wise softmax with max-subtraction.
Matrix softmax(const Eigen::Ref<const Matrix>& logits);

struct CrossEntropy {
  double loss = 0.0;    // sum_i w_i CE_i / sum_i w_i
  Matrix d_logits;      // gradient of `loss`
  Vector per_example;   // unweighted CE_i
};

CrossEntropy cross_entropy(const Eigen::Ref<const Matrix>& logits, const Labels& y,
                           const Eigen::Ref<const Vector>& weights);
/// Unit weights.
CrossEntropy cross_entropy(const Eigen::Ref<const Matrix>& logits, const Labels& y);

/// Identity forward, `-lambda * upstream` backward.
struct GradReverseGate {
  double lambda = 1.0;

  explicit GradReverseGate(double lambda_);

  template <typename Derived>
  const Derived& forward(const Eigen::MatrixBase<Derived>& x) const {
    return x.derived();
  }
  template <typename Derived>
  auto backward(const Eigen::MatrixBase<Derived>& upstream) const {
    return (-lambda) * upstream;
  }
  double forward(double x) const { return x; }
  double backward(double upstream) const { return -lambda * upstream; }
};

struct ContrastiveLoss {
  double loss = 0.0;
  Matrix d_reprs;
  Index anchors = 0;  // anchors that had at least one positive
};

using PositiveMask = Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic>;

/// Contrastive loss over L2-normalised rows of `reprs`. Anchor i averages
/// -log softmax_{a != i}(z_i.z_a / t) over its positives `mask(i, p)`; the loss
/// is the mean over anchors with at least one positive. Returns nullopt when
/// no anchor has a positive. The diagonal of `mask` is ignored.
std::optional<ContrastiveLoss> masked_contrastive_loss(const Eigen::Ref<const Matrix>& reprs,
                                                       const PositiveMask& mask, double temperature);

/// Supervised contrastive loss: positives share a label. Throws
/// ContrastiveDegenerate for n < 2 or when no anchor has a positive.
ContrastiveLoss supervised_contrastive_loss(const Eigen::Ref<const Matrix>& reprs, const Labels& labels,
                                            double temperature);

}  // namespace fairkit::nn

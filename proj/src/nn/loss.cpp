#include "fairkit/nn/loss.hpp"

#include <cmath>
#include <string>

#include "fairkit/error.hpp"

namespace fairkit::nn {

Matrix softmax(const Eigen::Ref<const Matrix>& logits) {
  Matrix p = logits.colwise() - logits.rowwise().maxCoeff();
  p = p.array().exp().matrix();
  p.array().colwise() /= p.rowwise().sum().array();
  return p;
}

CrossEntropy cross_entropy(const Eigen::Ref<const Matrix>& logits, const Labels& y,
                           const Eigen::Ref<const Vector>& weights) {
  const Index n = logits.rows();
  if (y.size() != n || weights.size() != n)
    throw Error(ErrorKind::Shape, "cross_entropy: logits have " + std::to_string(n) +
                                      " rows but labels/weights have " + std::to_string(y.size()) +
                                      "/" + std::to_string(weights.size()));
  if ((weights.array() < 0.0).any() || !weights.allFinite())
    throw Error(ErrorKind::DegenerateWeights, "weights must be finite and nonnegative");
  const double total = weights.sum();
  if (!(total > 0.0)) throw Error(ErrorKind::DegenerateWeights, "all instance weights are zero");

  CrossEntropy out;
  const Vector row_max = logits.rowwise().maxCoeff();
  const Matrix shifted = logits.colwise() - row_max;
  const Vector log_norm = shifted.array().exp().rowwise().sum().log().matrix();
  out.per_example.resize(n);
  out.d_logits = shifted.array().exp().matrix();
  for (Index i = 0; i < n; ++i) {
    const int c = y[i];
    if (c < 0 || c >= logits.cols())
      throw Error(ErrorKind::LabelDomain, "label " + std::to_string(c) + " outside [0, " +
                                              std::to_string(logits.cols()) + ")");
    out.per_example[i] = log_norm[i] - shifted(i, c);
    out.d_logits.row(i) /= std::exp(log_norm[i]);
    out.d_logits(i, c) -= 1.0;
    out.d_logits.row(i) *= weights[i] / total;
  }
  out.loss = weights.dot(out.per_example) / total;
  return out;
}

CrossEntropy cross_entropy(const Eigen::Ref<const Matrix>& logits, const Labels& y) {
  return cross_entropy(logits, y, Vector::Ones(logits.rows()));
}

GradReverseGate::GradReverseGate(double lambda_) : lambda(lambda_) {
  if (!(lambda_ >= 0.0)) throw Error(ErrorKind::Config, "gradient reversal strength must be >= 0");
}

std::optional<ContrastiveLoss> masked_contrastive_loss(const Eigen::Ref<const Matrix>& reprs,
                                                       const PositiveMask& mask, double temperature) {
  const Index n = reprs.rows();
  if (mask.rows() != n || mask.cols() != n)
    throw Error(ErrorKind::Shape, "contrastive mask must be n x n");
  if (!(temperature > 0.0)) throw Error(ErrorKind::Config, "temperature must be positive");
  if (n < 2) return std::nullopt;

  const Vector norms = reprs.rowwise().norm().cwiseMax(1e-12);
  const Matrix z = norms.cwiseInverse().asDiagonal() * reprs;
  const Matrix sim = (z * z.transpose()) / temperature;

  Vector positives = Vector::Zero(n);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < n; ++j)
      if (i != j && mask(i, j)) positives[i] += 1.0;
  const Index anchors = (positives.array() > 0.0).count();
  if (anchors == 0) return std::nullopt;

  // coef(i, j) = dLoss / dsim(i, j)
  Matrix coef = Matrix::Zero(n, n);
  double loss = 0.0;
  for (Index i = 0; i < n; ++i) {
    if (positives[i] == 0.0) continue;
    double row_max = -std::numeric_limits<double>::infinity();
    for (Index a = 0; a < n; ++a)
      if (a != i) row_max = std::max(row_max, sim(i, a));
    double denom = 0.0;
    for (Index a = 0; a < n; ++a)
      if (a != i) denom += std::exp(sim(i, a) - row_max);
    const double log_denom = row_max + std::log(denom);
    double anchor_loss = 0.0;
    for (Index j = 0; j < n; ++j) {
      if (j == i) continue;
      coef(i, j) = std::exp(sim(i, j) - log_denom);
      if (mask(i, j)) {
        anchor_loss += log_denom - sim(i, j);
        coef(i, j) -= 1.0 / positives[i];
      }
    }
    loss += anchor_loss / positives[i];
  }
  const double scale = 1.0 / static_cast<double>(anchors);
  coef *= scale;

  const Matrix dz = (coef * z + coef.transpose() * z) / temperature;
  ContrastiveLoss out;
  out.loss = loss * scale;
  out.anchors = anchors;
  out.d_reprs.resize(n, reprs.cols());
  for (Index i = 0; i < n; ++i) {
    const double along = z.row(i).dot(dz.row(i));
    out.d_reprs.row(i) = (dz.row(i) - along * z.row(i)) / norms[i];
  }
  return out;
}

ContrastiveLoss supervised_contrastive_loss(const Eigen::Ref<const Matrix>& reprs, const Labels& labels,
                                            double temperature) {
  const Index n = reprs.rows();
  if (labels.size() != n) throw Error(ErrorKind::Shape, "labels length must equal representation rows");
  if (n < 2) throw Error(ErrorKind::ContrastiveDegenerate, "need at least two instances");
  PositiveMask mask(n, n);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < n; ++j) mask(i, j) = labels[i] == labels[j];
  auto result = masked_contrastive_loss(reprs, mask, temperature);
  if (!result) throw Error(ErrorKind::ContrastiveDegenerate, "no anchor has a same-label positive");
  return *std::move(result);
}

}  // namespace fairkit::nn

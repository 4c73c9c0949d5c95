#include "fairkit/train/methods.hpp"

#include <array>
#include <cmath>
#include <utility>

#include "fairkit/error.hpp"

namespace fairkit::train {

namespace {

constexpr std::array<std::pair<Method, const char*>, 10> kMethodNames{{
    {Method::Standard, "Standard"},
    {Method::Adv, "Adv"},
    {Method::EAdv, "EAdv"},
    {Method::DAdv, "DAdv"},
    {Method::AAdv, "AAdv"},
    {Method::ADAdv, "ADAdv"},
    {Method::Gate, "Gate"},
    {Method::FairBatch, "FairBatch"},
    {Method::FairSCL, "FairSCL"},
    {Method::EO_CLA, "EO_CLA"},
}};

int sign(double v) { return (v > 0.0) - (v < 0.0); }

void require(bool ok, const std::string& field, const std::string& what) {
  if (!ok) throw Error(ErrorKind::Config, field + " " + what);
}

nn::PositiveMask same_label(const Labels& y) {
  const Index n = y.size();
  nn::PositiveMask m(n, n);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < n; ++j) m(i, j) = i != j && y[i] == y[j];
  return m;
}

}  // namespace

std::string to_string(Method m) {
  for (const auto& [method, name] : kMethodNames)
    if (method == m) return name;
  return "?";
}

Method method_from_string(const std::string& name) {
  for (const auto& [method, label] : kMethodNames)
    if (name == label) return method;
  throw Error(ErrorKind::Config, "unknown method '" + name + "'");
}

bool is_adversarial(Method m) {
  return m == Method::Adv || m == Method::EAdv || m == Method::DAdv || m == Method::AAdv || m == Method::ADAdv;
}

int MethodConfig::discriminator_count() const {
  switch (method) {
    case Method::Adv:
    case Method::AAdv: return 1;
    case Method::EAdv:
    case Method::DAdv:
    case Method::ADAdv: return n_discriminators;
    default: return 0;
  }
}

double MethodConfig::effective_diff_lambda() const {
  return method == Method::DAdv || method == Method::ADAdv ? diff_lambda : 0.0;
}

void MethodConfig::validate() const {
  require(adv_lambda >= 0.0, "adv_lambda", "must be >= 0");
  require(diff_lambda >= 0.0, "diff_lambda", "must be >= 0");
  require(adv_hidden >= 0, "adv_hidden", "must be >= 0");
  require(fairbatch_alpha >= 0.0, "fairbatch_alpha", "must be >= 0");
  require(fcl_lambda_y >= 0.0 && fcl_lambda_g >= 0.0, "fcl_lambda_y/fcl_lambda_g", "must be >= 0");
  require(temperature > 0.0, "temperature", "must be > 0");
  require(eo_cla_lambda >= 0.0, "eo_cla_lambda", "must be >= 0");
  require(batch_size >= 1, "batch_size", "must be >= 1");
  require(epochs >= 0, "epochs", "must be >= 0");
  require(optimizer.lr > 0.0, "lr", "must be > 0");
  for (Index w : hidden_dims) require(w >= 1, "hidden_dims", "entries must be >= 1");
  if (method == Method::EAdv || method == Method::DAdv || method == Method::ADAdv)
    require(n_discriminators >= 2, "n_discriminators", "must be >= 2 for " + to_string(method));
  if (effective_diff_lambda() > 0.0)
    require(adv_hidden >= 1, "adv_hidden", "must be >= 1 when diff_lambda > 0");
  if (is_adversarial(method) || method == Method::FairSCL)
    require(!hidden_dims.empty(), "hidden_dims", "must be nonempty for " + to_string(method));
}

FairBatchState FairBatchState::initial(const data::Dataset& train, double alpha) {
  if (alpha < 0.0) throw Error(ErrorKind::Config, "fairbatch_alpha must be >= 0");
  const data::CellCounts counts = train.cell_counts();
  if (counts.sum() == 0) throw Error(ErrorKind::EmptyCell, "FairBatch needs a nonempty training set");
  FairBatchState s;
  s.alpha = alpha;
  s.probs = counts.cast<double>() / static_cast<double>(counts.sum());
  s.class_mass = s.probs.rowwise().sum();
  s.cell_losses = data::CellProbs::Zero(counts.rows(), counts.cols());
  s.support = counts.array() > 0;
  return s;
}

FairBatchState fairbatch_epoch_update(const FairBatchState& state, const data::CellProbs& epoch_losses,
                                      const data::CellCounts& observed) {
  if (epoch_losses.rows() != state.probs.rows() || epoch_losses.cols() != state.probs.cols() ||
      observed.rows() != state.probs.rows() || observed.cols() != state.probs.cols())
    throw Error(ErrorKind::Shape, "FairBatch loss table does not match the cell grid");
  FairBatchState next = state;
  for (Index c = 0; c < next.probs.rows(); ++c) {
    double mean = 0.0;
    int cells = 0;
    for (Index g = 0; g < next.probs.cols(); ++g) {
      if (!next.support(c, g)) continue;
      if (observed(c, g) > 0) next.cell_losses(c, g) = epoch_losses(c, g);
      mean += next.cell_losses(c, g);
      ++cells;
    }
    if (cells == 0) continue;
    mean /= cells;
    double total = 0.0;
    for (Index g = 0; g < next.probs.cols(); ++g) {
      if (!next.support(c, g)) continue;
      double& p = next.probs(c, g);
      p = std::max(0.0, p + state.alpha * sign(next.cell_losses(c, g) - mean));
      total += p;
    }
    if (total <= 0.0)
      throw Error(ErrorKind::FairBatchCollapse, "every cell of class " + std::to_string(c) + " clipped to zero");
    next.probs.row(c) *= state.class_mass[c] / total;
  }
  return next;
}

nn::PositiveMask cross_group_positives(const Labels& y, const Labels& g) {
  const Index n = y.size();
  nn::PositiveMask m(n, n);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < n; ++j) m(i, j) = y[i] == y[j] && g[i] != g[j];
  return m;
}

ReprLoss fairscl_loss(const Eigen::Ref<const Matrix>& reprs, const Labels& y, const Labels& g, double lambda_y,
                      double lambda_g, double temperature) {
  if (y.size() != reprs.rows() || g.size() != reprs.rows())
    throw Error(ErrorKind::Shape, "contrastive labels do not match representations");
  ReprLoss out;
  out.d_reprs = Matrix::Zero(reprs.rows(), reprs.cols());
  auto add = [&](double lambda, const nn::PositiveMask& mask) {
    if (lambda == 0.0) return;
    if (auto term = nn::masked_contrastive_loss(reprs, mask, temperature)) {
      out.loss += lambda * term->loss;
      out.d_reprs += lambda * term->d_reprs;
    }
  };
  add(lambda_y, same_label(y));
  add(lambda_g, cross_group_positives(y, g));
  return out;
}

LossAdjustment eo_cla_adjusted_loss(const Eigen::Ref<const Vector>& per_example_losses, const Labels& y,
                                    const Labels& g, double lambda) {
  const Index n = per_example_losses.size();
  if (y.size() != n || g.size() != n) throw Error(ErrorKind::Shape, "loss/label length mismatch");
  LossAdjustment out;
  out.d_per_example = Vector::Zero(n);
  if (n == 0 || lambda == 0.0) return out;
  const int C = y.maxCoeff() + 1, G = g.maxCoeff() + 1;
  Matrix cell_sum = Matrix::Zero(C, G), cell_n = Matrix::Zero(C, G);
  Vector class_sum = Vector::Zero(C), class_n = Vector::Zero(C);
  for (Index i = 0; i < n; ++i) {
    cell_sum(y[i], g[i]) += per_example_losses[i];
    cell_n(y[i], g[i]) += 1.0;
    class_sum[y[i]] += per_example_losses[i];
    class_n[y[i]] += 1.0;
  }
  Matrix s = Matrix::Zero(C, G);
  Vector s_class = Vector::Zero(C);
  for (int c = 0; c < C; ++c) {
    if (class_n[c] == 0.0) continue;
    const double m_c = class_sum[c] / class_n[c];
    for (int k = 0; k < G; ++k) {
      if (cell_n(c, k) == 0.0) continue;
      const double diff = cell_sum(c, k) / cell_n(c, k) - m_c;
      out.addition += std::abs(diff);
      s(c, k) = sign(diff);
      s_class[c] += s(c, k);
    }
  }
  out.addition *= lambda;
  for (Index i = 0; i < n; ++i)
    out.d_per_example[i] = lambda * (s(y[i], g[i]) / cell_n(y[i], g[i]) - s_class[y[i]] / class_n[y[i]]);
  return out;
}

double orthogonality_penalty(const std::vector<Matrix>& hidden, std::vector<Matrix>* grads) {
  if (grads) {
    grads->clear();
    for (const auto& h : hidden) grads->push_back(Matrix::Zero(h.rows(), h.cols()));
  }
  double penalty = 0.0;
  for (std::size_t i = 0; i < hidden.size(); ++i)
    for (std::size_t j = i + 1; j < hidden.size(); ++j) {
      if (hidden[i].rows() != hidden[j].rows())
        throw Error(ErrorKind::Shape, "discriminator representations differ in batch size");
      const Matrix m = hidden[i].transpose() * hidden[j];
      penalty += m.squaredNorm();
      if (grads) {
        (*grads)[i].noalias() += 2.0 * hidden[j] * m.transpose();
        (*grads)[j].noalias() += 2.0 * hidden[i] * m;
      }
    }
  return penalty;
}

}  // namespace fairkit::train

#include "fairkit/post/inlp.hpp"

#include <cstring>
#include <fstream>

#include <Eigen/Eigenvalues>

#include "fairkit/error.hpp"
#include "fairkit/nn/loss.hpp"
#include "fairkit/nn/optimizer.hpp"

namespace fairkit::post {

namespace {

constexpr char kProjectionMagic[8] = {'F', 'A', 'I', 'R', 'K', 'P', 'R', 'J'};

Vector sigmoid(const Vector& z) { return (1.0 + (-z.array()).exp()).inverse().matrix(); }

}  // namespace

Labels LinearProbe::predict(const Eigen::Ref<const Matrix>& h) const {
  const Matrix scores = (h * weight.transpose()).rowwise() + bias.transpose();
  if (weight.rows() == 1) return (scores.col(0).array() > 0.0).cast<int>().matrix();
  return train::argmax_rows(scores);
}

LinearProbe fit_linear_probe(const Eigen::Ref<const Matrix>& h, const Labels& g, int num_groups,
                             const ProbeConfig& config) {
  const Index n = h.rows(), d = h.cols();
  if (g.size() != n) throw Error(ErrorKind::Shape, "probe labels do not match representations");
  if (n == 0) throw Error(ErrorKind::DegenerateProbe, "no rows to probe");
  if (g.minCoeff() < 0) throw Error(ErrorKind::LabelDomain, "negative group label");
  const int G = num_groups > 0 ? num_groups : g.maxCoeff() + 1;
  if (g.maxCoeff() >= G) throw Error(ErrorKind::LabelDomain, "group label out of range");
  std::vector<Index> sizes(static_cast<std::size_t>(G), 0);
  for (Index i = 0; i < n; ++i) ++sizes[static_cast<std::size_t>(g[i])];
  if (std::count_if(sizes.begin(), sizes.end(), [](Index s) { return s > 0; }) < 2)
    throw Error(ErrorKind::DegenerateProbe, "probe needs at least two groups present");
  if (n < G) throw Error(ErrorKind::DegenerateProbe, "fewer rows than groups");

  const RowVector mean = h.colwise().mean();
  Matrix z = h.rowwise() - mean;
  double scale = 1.0;
  if (d > 0) {
    const Matrix cov = z.transpose() * z / static_cast<double>(n);
    const double top = Eigen::SelfAdjointEigenSolver<Matrix>(cov, Eigen::EigenvaluesOnly).eigenvalues().maxCoeff();
    if (top > 1e-24) scale = std::sqrt(top);
  }
  z /= scale;

  LinearProbe probe;
  const double inv_n = 1.0 / static_cast<double>(n);
  if (G == 2) {
    const Vector target = g.cast<double>();
    Vector w = Vector::Zero(d);
    double b = 0.0;
    for (int step = 0; step < config.steps; ++step) {
      const Vector r = sigmoid((z * w).array() + b) - target;
      w.noalias() -= config.lr * inv_n * (z.transpose() * r);
      b -= config.lr * r.mean();
    }
    probe.weight = w.transpose() / scale;
    probe.bias = Vector::Constant(1, b - (probe.weight * mean.transpose())(0, 0));
  } else {
    Matrix w = Matrix::Zero(G, d);
    Vector b = Vector::Zero(G);
    Matrix onehot = Matrix::Zero(n, G);
    for (Index i = 0; i < n; ++i) onehot(i, g[i]) = 1.0;
    for (int step = 0; step < config.steps; ++step) {
      const Matrix r = nn::softmax((z * w.transpose()).rowwise() + b.transpose()) - onehot;
      w.noalias() -= config.lr * inv_n * (r.transpose() * z);
      b -= config.lr * r.colwise().mean().transpose();
    }
    probe.weight = w / scale;
    probe.bias = b - probe.weight * mean.transpose();
  }
  probe.accuracy = static_cast<double>((probe.predict(h).array() == g.array()).count()) * inv_n;
  return probe;
}

NullspaceResult nullspace_projection(const Eigen::Ref<const Matrix>& w) {
  const Index h = w.cols();
  NullspaceResult out;
  if (w.norm() < 1e-12) {
    out.P = Matrix::Identity(h, h);
    out.warning = true;
    return out;
  }
  // Modified Gram-Schmidt with one re-orthogonalisation pass.
  std::vector<Vector> basis;
  for (Index r = 0; r < w.rows(); ++r) {
    const double norm = w.row(r).norm();
    if (norm == 0.0) continue;
    Vector v = w.row(r).transpose();
    for (int pass = 0; pass < 2; ++pass)
      for (const auto& b : basis) v -= b.dot(v) * b;
    const double residual = v.norm();
    if (residual <= 1e-10 * norm) continue;
    basis.push_back(v / residual);
    if (static_cast<Index>(basis.size()) == h) break;
  }
  out.rank = static_cast<Index>(basis.size());
  if (out.rank == h) {
    out.P = Matrix::Zero(h, h);
    return out;
  }
  Matrix B(out.rank, h);
  for (Index r = 0; r < out.rank; ++r) B.row(r) = basis[static_cast<std::size_t>(r)].transpose();
  out.P = Matrix::Identity(h, h) - B.transpose() * B;
  out.P = 0.5 * (out.P + out.P.transpose()).eval();
  return out;
}

Projection inlp(const Eigen::Ref<const Matrix>& h_train, const Labels& g_train, const InlpConfig& config,
                const Matrix* h_eval, const Labels* g_eval) {
  if (config.max_iterations < 0) throw Error(ErrorKind::Config, "inlp_iterations must be >= 0");
  if ((h_eval == nullptr) != (g_eval == nullptr))
    throw Error(ErrorKind::Config, "evaluation representations and labels must be given together");
  if (h_eval && h_eval->cols() != h_train.cols())
    throw Error(ErrorKind::Shape, "evaluation representations have a different width");
  const Index h = h_train.cols();
  const int G = std::max(g_train.size() ? g_train.maxCoeff() + 1 : 0,
                         g_eval && g_eval->size() ? g_eval->maxCoeff() + 1 : 0);
  Projection out;
  out.P = Matrix::Identity(h, h);
  Matrix removed(0, h);
  for (int it = 0; it < config.max_iterations; ++it) {
    const LinearProbe probe = fit_linear_probe(h_train * out.P, g_train, G, config.probe);
    out.probe_accuracies.push_back(probe.accuracy);
    if (h_eval) {
      const Labels pred = probe.predict(*h_eval * out.P);
      out.eval_probe_accuracies.push_back(static_cast<double>((pred.array() == g_eval->array()).count()) /
                                          static_cast<double>(g_eval->size()));
    }
    Matrix stacked(removed.rows() + probe.weight.rows(), h);
    stacked << removed, probe.weight;
    removed = std::move(stacked);
    const auto ns = nullspace_projection(removed);
    out.P = ns.P;
    out.removed_rank = ns.rank;
    ++out.iterations_applied;
  }
  return out;
}

void save_projection(const Matrix& P, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error(ErrorKind::Io, "cannot write " + path.string());
  const std::uint64_t rows = static_cast<std::uint64_t>(P.rows()), cols = static_cast<std::uint64_t>(P.cols());
  os.write(kProjectionMagic, sizeof kProjectionMagic);
  os.write(reinterpret_cast<const char*>(&rows), sizeof rows);
  os.write(reinterpret_cast<const char*>(&cols), sizeof cols);
  os.write(reinterpret_cast<const char*>(P.data()), static_cast<std::streamsize>(P.size() * sizeof(double)));
  if (!os) throw Error(ErrorKind::Io, "failed writing " + path.string());
}

Matrix load_projection(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error(ErrorKind::Io, "cannot read " + path.string());
  char magic[8];
  std::uint64_t rows = 0, cols = 0;
  is.read(magic, sizeof magic);
  is.read(reinterpret_cast<char*>(&rows), sizeof rows);
  is.read(reinterpret_cast<char*>(&cols), sizeof cols);
  if (!is || std::memcmp(magic, kProjectionMagic, sizeof magic) != 0)
    throw Error(ErrorKind::Parse, path.string() + " is not a projection file");
  if (rows > (1u << 20) || cols > (1u << 20)) throw Error(ErrorKind::Parse, "implausible projection shape");
  Matrix P(static_cast<Index>(rows), static_cast<Index>(cols));
  is.read(reinterpret_cast<char*>(P.data()), static_cast<std::streamsize>(P.size() * sizeof(double)));
  if (!is) throw Error(ErrorKind::Parse, path.string() + " is truncated");
  return P;
}

Matrix ProjectedClassifier::project(const Eigen::Ref<const Matrix>& x) const {
  return nn::forward(encoder, x).hidden() * P;
}

Labels ProjectedClassifier::predict(const Eigen::Ref<const Matrix>& x) const {
  return train::argmax_rows(nn::apply(head.layers().front(), project(x)));
}

ProjectedClassifier apply_inlp_and_refit(const train::Model& model, const Matrix& P, const data::Dataset& train,
                                         const RefitConfig& config) {
  const Index h = model.net.hidden_dim();
  if (P.rows() != h || P.cols() != h)
    throw Error(ErrorKind::Shape, "projection is " + std::to_string(P.rows()) + "x" + std::to_string(P.cols()) +
                                      " but the representation has width " + std::to_string(h));
  const int C = static_cast<int>(model.net.spec().output_dim);
  ProjectedClassifier out{model.net, P, nn::Network::zeros({h, {}, C, model.net.spec().activation, 0})};
  const Matrix z = out.project(train.X);
  nn::OptimizerConfig adam;
  adam.lr = config.lr;
  auto state = nn::OptimizerState::for_network(out.head, adam);
  for (int step = 0; step < config.steps; ++step) {
    const auto trace = nn::forward(out.head, z);
    const auto ce = nn::cross_entropy(trace.logits(), train.y, train.weights);
    nn::optimizer_step(out.head, nn::backward(out.head, trace, ce.d_logits), state);
  }
  return out;
}

}  // namespace fairkit::post

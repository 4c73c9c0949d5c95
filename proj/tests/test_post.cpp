#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include <Eigen/SVD>

#include "fairkit/data/synthetic.hpp"
#include "fairkit/error.hpp"
#include "fairkit/post/gate_soft.hpp"
#include "fairkit/post/inlp.hpp"
#include "fairkit/train/trainer.hpp"
#include "test_util.hpp"

using namespace fairkit;
using namespace fairkit::post;

namespace {

double majority(const Labels& g) {
  const Index ones = (g.array() == 1).count();
  return static_cast<double>(std::max(ones, g.size() - ones)) / static_cast<double>(g.size());
}

double probe_acc(const LinearProbe& p, const Matrix& h, const Labels& g) {
  return static_cast<double>((p.predict(h).array() == g.array()).count()) / static_cast<double>(g.size());
}

// Group is encoded by the sign of coordinate `leak`; the remaining coordinates
// come in mirrored pairs within each group, so they carry no group signal.
std::pair<Matrix, Labels> single_leak(Index pairs, Index h, Index leak, std::mt19937_64& rng) {
  Matrix x(2 * pairs, h);
  Labels g(2 * pairs);
  std::normal_distribution<double> noise(0.0, 1.0);
  for (Index p = 0; p < pairs; ++p) {
    const int grp = p < (pairs * 3) / 5 ? 1 : 0;
    for (Index j = 0; j < h; ++j) {
      const double v = noise(rng);
      x(2 * p, j) = v;
      x(2 * p + 1, j) = -v;
    }
    x(2 * p, leak) = x(2 * p + 1, leak) = grp ? 1.0 : -1.0;
    g[2 * p] = g[2 * p + 1] = grp;
  }
  return {x, g};
}

// Independent nullspace oracle from the SVD.
Matrix svd_nullspace(const Matrix& w) {
  Eigen::JacobiSVD<Matrix> svd(w, Eigen::ComputeFullV);
  Index rank = 0;
  for (Index i = 0; i < svd.singularValues().size(); ++i)
    if (svd.singularValues()[i] > 1e-10 * svd.singularValues()[0]) ++rank;
  const Matrix v = svd.matrixV().leftCols(rank);
  return Matrix::Identity(w.cols(), w.cols()) - v * v.transpose();
}

void check_projection(const Matrix& P) {
  CHECK((P * P - P).cwiseAbs().maxCoeff() <= 1e-6);
  CHECK((P - P.transpose()).cwiseAbs().maxCoeff() <= 1e-6);
}

data::DatasetBundle biased(std::uint64_t seed) {
  data::SyntheticSpec spec;
  spec.d = 6;
  spec.n_per_cell.resize(2, 2);
  spec.n_per_cell << 200, 50, 50, 200;
  spec.dev_n_per_cell = data::CellCounts::Constant(2, 2, 100);
  spec.test_n_per_cell = data::CellCounts::Constant(2, 2, 100);
  spec.group_shift = 3.0;
  spec.seed = seed;
  return data::generate_synthetic(spec);
}

train::MethodConfig small(train::Method m) {
  train::MethodConfig cfg;
  cfg.method = m;
  cfg.hidden_dims = {16};
  cfg.epochs = 10;
  cfg.batch_size = 32;
  cfg.optimizer.lr = 0.01;
  return cfg;
}

}  // namespace

TEST_CASE("fit_linear_probe") {
  std::mt19937_64 rng(1);
  Matrix h = testing::random_matrix(200, 3, rng);
  Labels g(200);
  for (Index i = 0; i < 200; ++i) {
    g[i] = i % 3 == 0 ? 1 : 0;
    h(i, 0) = g[i] ? 2.0 + std::abs(h(i, 0)) : -2.0 - std::abs(h(i, 0));
  }
  CHECK(fit_linear_probe(h, g).accuracy == 1.0);

  // Three groups separable along axis 0 as well.
  Labels g3(200);
  for (Index i = 0; i < 200; ++i) {
    g3[i] = static_cast<int>(i % 3);
    h(i, 0) = 4.0 * g3[i] + 0.1 * h(i, 1);
  }
  const auto multi = fit_linear_probe(h, g3);
  CHECK(multi.weight.rows() == 3);
  CHECK(multi.accuracy >= 0.99);

  CHECK(fit_linear_probe(Matrix::Zero(50, 4), g.head(50)).accuracy == majority(g.head(50)));

  const Matrix noise = testing::random_matrix(4000, 5, rng);
  Labels shuffled(4000);
  for (Index i = 0; i < 4000; ++i) shuffled[i] = i % 5 < 3 ? 1 : 0;
  std::shuffle(shuffled.data(), shuffled.data() + shuffled.size(), rng);
  CHECK(std::abs(fit_linear_probe(noise, shuffled).accuracy - majority(shuffled)) <= 0.03);

  try {
    fit_linear_probe(h, Labels::Zero(200));
    FAIL("expected degenerate probe");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::DegenerateProbe);
  }
}

TEST_CASE("nullspace_projection") {
  Matrix w(1, 2);
  w << 1, 0;
  Matrix expected(2, 2);
  expected << 0, 0, 0, 1;
  CHECK((nullspace_projection(w).P - expected).norm() < 1e-15);
  CHECK(nullspace_projection(Matrix::Identity(2, 2)).P == Matrix::Zero(2, 2));

  const auto zero = nullspace_projection(Matrix::Zero(2, 3));
  CHECK(zero.warning);
  CHECK(zero.P == Matrix::Identity(3, 3));

  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 20; ++trial) {
    const Matrix wr = testing::random_matrix(2, 6, rng);
    const auto r = nullspace_projection(wr);
    CHECK(r.rank == 2);
    CHECK((r.P * wr.transpose()).cwiseAbs().maxCoeff() <= 1e-8);
    CHECK((r.P * r.P - r.P).cwiseAbs().maxCoeff() <= 1e-8);
    CHECK((r.P - svd_nullspace(wr)).cwiseAbs().maxCoeff() <= 1e-8);
  }
  // Dependent rows are dropped.
  Matrix dep(3, 4);
  dep << 1, 2, 0, 0, 2, 4, 0, 0, 0, 0, 1, 0;
  CHECK(nullspace_projection(dep).rank == 2);
}

TEST_CASE("inlp: no-op and single-direction leak") {
  std::mt19937_64 rng(3);
  auto [h, g] = single_leak(1000, 5, 1, rng);
  const auto none = inlp(h, g, {0, {}});
  CHECK(none.P == Matrix::Identity(5, 5));
  CHECK(none.probe_accuracies.empty());

  const auto one = inlp(h, g, {1, {}});
  check_projection(one.P);
  CHECK(one.probe_accuracies[0] == 1.0);
  const auto after = fit_linear_probe(h * one.P, g);
  CHECK(after.accuracy <= majority(g) + 0.02);
}

TEST_CASE("inlp: rank exhaustion and per-iteration properties") {
  std::mt19937_64 rng(4);
  const Index dim = 4, n = 1000;
  Matrix h = testing::random_matrix(n, dim, rng, 0.5);
  Labels g(n);
  const RowVector shift = (RowVector(dim) << 1.0, -0.7, 0.5, 0.9).finished();
  for (Index i = 0; i < n; ++i) {
    g[i] = i % 5 < 3 ? 1 : 0;
    h.row(i) += (g[i] ? 1.0 : -1.0) * shift;
  }
  Matrix held_h = h;
  Labels held_g = g;
  Index prev_rank = 0;
  double prev_acc = 1.0;
  for (int iters = 1; iters <= dim; ++iters) {
    const auto proj = inlp(h, g, {iters, {}}, &held_h, &held_g);
    check_projection(proj.P);
    CHECK(proj.removed_rank <= prev_rank + 1);
    CHECK(proj.removed_rank >= prev_rank + 1);  // the probe still beats the baseline at every step here
    prev_rank = proj.removed_rank;
    CHECK(proj.probe_accuracies.back() <= prev_acc + 0.02);
    prev_acc = proj.probe_accuracies.back();
    CHECK(proj.eval_probe_accuracies.size() == static_cast<std::size_t>(iters));
  }
  const auto full = inlp(h, g, {static_cast<int>(dim), {}});
  CHECK(full.P.cwiseAbs().maxCoeff() <= 1e-8);
  CHECK(std::abs(fit_linear_probe(h * full.P, g).accuracy - majority(g)) <= 0.01);
}

TEST_CASE("projection file round trip") {
  const auto dir = testing::scratch_dir("proj");
  std::mt19937_64 rng(5);
  const Matrix P = svd_nullspace(testing::random_matrix(2, 5, rng));
  save_projection(P, dir / "p.bin");
  CHECK(load_projection(dir / "p.bin") == P);
  std::ofstream(dir / "bad.bin") << "nope";
  CHECK_THROWS_AS(load_projection(dir / "bad.bin"), Error);
}

TEST_CASE("apply_inlp_and_refit") {
  const auto bundle = biased(6);
  const auto run = train::train(bundle, small(train::Method::Standard));
  const Index h = run.model.net.hidden_dim();
  const double original = train::evaluate_model(run.model, bundle.test).performance;

  const auto identity = apply_inlp_and_refit(run.model, Matrix::Identity(h, h), bundle.train);
  const double refit = eval::accuracy(identity.predict(bundle.test.X), bundle.test.y);
  CHECK(std::abs(refit - original) <= 0.02);

  const auto blind = apply_inlp_and_refit(run.model, Matrix::Zero(h, h), bundle.train);
  const Labels pred = blind.predict(bundle.test.X);
  CHECK((pred.array() == pred[0]).all());
  const double prior0 = static_cast<double>((bundle.test.y.array() == 0).count()) / bundle.test.size();
  CHECK(eval::accuracy(pred, bundle.test.y) == doctest::Approx(pred[0] == 0 ? prior0 : 1.0 - prior0));

  const Matrix h_train = train::hidden(run.model, bundle.train.X);
  const Matrix h_test = train::hidden(run.model, bundle.test.X);
  const auto proj = inlp(h_train, bundle.train.g, {5, {}});
  check_projection(proj.P);
  const double before = probe_acc(fit_linear_probe(h_train, bundle.train.g), h_test, bundle.test.g);
  const double after = probe_acc(fit_linear_probe(h_train * proj.P, bundle.train.g), h_test * proj.P, bundle.test.g);
  CHECK(after < before);

  CHECK_THROWS_AS(apply_inlp_and_refit(run.model, Matrix::Identity(h + 1, h + 1), bundle.train), Error);
  CHECK(run.model == train::train(bundle, small(train::Method::Standard)).model);
}

TEST_CASE("gate soft prior") {
  const auto bundle = biased(7);
  auto cfg = small(train::Method::Gate);
  cfg.epochs = 3;
  const auto run = train::train(bundle, cfg);
  const auto& model = run.model;
  const Matrix& x = bundle.dev.X;

  const Labels vertex = predict_with_prior(model, x, (Vector(2) << 1.0, 0.0).finished());
  CHECK(vertex == train::predict(model, x, Labels::Zero(x.rows())));

  const auto trace = nn::forward(model.net, x);
  const Matrix mixed = train::gate_mix_forward(trace.logits(), trace.hidden(), Vector::Constant(2, 0.5),
                                               model.group_heads);
  const Matrix avg = 0.5 * (train::gate_forward(trace.logits(), trace.hidden(), Labels::Zero(x.rows()),
                                                model.group_heads) +
                            train::gate_forward(trace.logits(), trace.hidden(), Labels::Ones(x.rows()),
                                                model.group_heads));
  CHECK((mixed - avg).cwiseAbs().maxCoeff() < 1e-12);

  const auto grid = simplex_grid(2, 11);
  REQUIRE(grid.size() == 11);
  const auto best = gate_soft_search(model, bundle.dev, 11);
  double oracle = -1e300;
  for (const auto& prior : grid) {
    const auto rep = eval::evaluate(predict_with_prior(model, x, prior), bundle.dev.y, bundle.dev.g, 2, 2);
    oracle = std::max(oracle, -eval::dto(rep.performance, rep.fairness));
    CHECK(std::abs(prior.sum() - 1.0) <= 1e-9);
  }
  CHECK(best.score == oracle);
  CHECK(best.prior.minCoeff() >= 0.0);
  CHECK(std::abs(best.prior.sum() - 1.0) <= 1e-9);
  CHECK(gate_soft_search(model, bundle.dev, 11).prior == best.prior);

  // Flat criterion: the tie rule returns the uniform prior.
  const auto flat = gate_soft_search(model, bundle.dev, 11, [](const eval::FairnessReport&) { return 0.0; });
  CHECK(flat.prior == Vector::Constant(2, 0.5));
  CHECK(simplex_grid(3, 3).size() == 6);

  CHECK_THROWS_AS(gate_soft_search(train::train(bundle, small(train::Method::Standard)).model, bundle.dev, 11),
                  Error);
}

#include "fairkit/post/gate_soft.hpp"

#include <optional>

#include "fairkit/error.hpp"

namespace fairkit::post {

namespace {

void compositions(int groups, int remaining, std::vector<int>& current, std::vector<std::vector<int>>& out) {
  if (static_cast<int>(current.size()) == groups - 1) {
    current.push_back(remaining);
    out.push_back(current);
    current.pop_back();
    return;
  }
  for (int k = remaining; k >= 0; --k) {
    current.push_back(k);
    compositions(groups, remaining - k, current, out);
    current.pop_back();
  }
}

}  // namespace

double negative_dto(const eval::FairnessReport& report) { return -eval::dto(report.performance, report.fairness); }

std::vector<Vector> simplex_grid(int groups, int resolution) {
  if (groups < 1) throw Error(ErrorKind::Config, "simplex needs at least one group");
  if (resolution < 2) throw Error(ErrorKind::Config, "gate_soft_grid must be >= 2");
  std::vector<std::vector<int>> parts;
  std::vector<int> current;
  compositions(groups, resolution - 1, current, parts);
  std::vector<Vector> grid;
  for (const auto& p : parts) {
    Vector v(groups);
    for (int k = 0; k < groups; ++k) v[k] = static_cast<double>(p[static_cast<std::size_t>(k)]) / (resolution - 1);
    grid.push_back(v);
  }
  return grid;
}

Labels predict_with_prior(const train::Model& model, const Eigen::Ref<const Matrix>& x,
                          const Eigen::Ref<const Vector>& prior) {
  const auto trace = nn::forward(model.net, x);
  return train::argmax_rows(train::gate_mix_forward(trace.logits(), trace.hidden(), prior, model.group_heads));
}

GatePrior gate_soft_search(const train::Model& model, const data::Dataset& dev, int resolution,
                           const PriorScore& score) {
  if (!model.has_gate()) throw Error(ErrorKind::MethodInapplicable, "Gate-soft needs a model trained with Gate");
  const int G = static_cast<int>(model.group_heads.size());
  const Vector uniform = Vector::Constant(G, 1.0 / G);
  const int C = std::max(dev.num_classes, static_cast<int>(model.net.spec().output_dim));
  const auto trace = nn::forward(model.net, dev.X);
  std::optional<GatePrior> best;
  double best_spread = 0.0;
  for (const Vector& prior : simplex_grid(G, resolution)) {
    const Labels pred =
        train::argmax_rows(train::gate_mix_forward(trace.logits(), trace.hidden(), prior, model.group_heads));
    const double s = score(eval::evaluate(pred, dev.y, dev.g, C, std::max(dev.num_groups, G)));
    const double spread = (prior - uniform).norm();
    if (!best || s > best->score || (s == best->score && spread < best_spread)) {
      best = GatePrior{prior, s};
      best_spread = spread;
    }
  }
  return *best;
}

}  // namespace fairkit::post

#include "fairkit/train/model.hpp"

#include "fairkit/error.hpp"

namespace fairkit::train {

namespace {

void check_groups(const Labels& g, std::size_t heads, Index rows) {
  if (g.size() != rows) throw Error(ErrorKind::Shape, "group vector does not match batch size");
  for (Index i = 0; i < g.size(); ++i)
    if (g[i] < 0 || static_cast<std::size_t>(g[i]) >= heads)
      throw Error(ErrorKind::LabelDomain, "group " + std::to_string(g[i]) + " has no gate head");
}

}  // namespace

Model make_model(const MethodConfig& cfg, Index input_dim, int num_classes, int num_groups) {
  nn::MlpSpec spec{input_dim, cfg.hidden_dims, num_classes, cfg.activation, mix_seed(cfg.seed, streams::kInit)};
  Model model{nn::Network(spec), {}};
  if (cfg.method == Method::Gate) {
    const nn::MlpSpec head{model.net.hidden_dim(), {}, num_classes, cfg.activation, 0};
    model.group_heads.assign(static_cast<std::size_t>(num_groups), nn::Network::zeros(head));
  }
  return model;
}

Matrix hidden(const Model& model, const Eigen::Ref<const Matrix>& x) {
  return nn::forward(model.net, x).hidden();
}

Matrix gate_forward(const Eigen::Ref<const Matrix>& shared_logits, const Eigen::Ref<const Matrix>& hidden,
                    const Labels& g, const std::vector<nn::Network>& heads) {
  check_groups(g, heads.size(), hidden.rows());
  Matrix out = shared_logits;
  for (Index i = 0; i < hidden.rows(); ++i) {
    const nn::Layer& head = heads[static_cast<std::size_t>(g[i])].layers().front();
    out.row(i) += (head.weight * hidden.row(i).transpose() + head.bias).transpose();
  }
  return out;
}

Matrix gate_mix_forward(const Eigen::Ref<const Matrix>& shared_logits, const Eigen::Ref<const Matrix>& hidden,
                        const Eigen::Ref<const Vector>& prior, const std::vector<nn::Network>& heads) {
  if (heads.empty()) throw Error(ErrorKind::MethodInapplicable, "model has no group heads");
  if (prior.size() != static_cast<Index>(heads.size()))
    throw Error(ErrorKind::Shape, "prior length does not match the number of group heads");
  Matrix out = shared_logits;
  for (std::size_t k = 0; k < heads.size(); ++k)
    if (prior[static_cast<Index>(k)] != 0.0)
      out += prior[static_cast<Index>(k)] * nn::apply(heads[k].layers().front(), hidden);
  return out;
}

Matrix logits(const Model& model, const Eigen::Ref<const Matrix>& x, const Labels& g) {
  const auto trace = nn::forward(model.net, x);
  if (!model.has_gate()) return trace.logits();
  return gate_forward(trace.logits(), trace.hidden(), g, model.group_heads);
}

Labels argmax_rows(const Eigen::Ref<const Matrix>& scores) {
  Labels out(scores.rows());
  for (Index i = 0; i < scores.rows(); ++i) {
    Index best = 0;
    scores.row(i).maxCoeff(&best);
    out[i] = static_cast<int>(best);
  }
  return out;
}

Labels predict(const Model& model, const Eigen::Ref<const Matrix>& x, const Labels& g) {
  return argmax_rows(logits(model, x, g));
}

std::vector<Discriminator> make_discriminators(const MethodConfig& cfg, Index hidden_dim, int num_classes,
                                               int num_groups) {
  std::vector<Discriminator> discs;
  const bool labels = cfg.discriminators_use_labels();
  const Index in = hidden_dim + (labels ? num_classes : 0);
  std::vector<Index> hidden;
  if (cfg.adv_hidden > 0) hidden.push_back(cfg.adv_hidden);
  const std::uint64_t base = mix_seed(cfg.seed, streams::kDiscriminator);
  for (int k = 0; k < cfg.discriminator_count(); ++k) {
    nn::MlpSpec spec{in, hidden, num_groups, cfg.activation, mix_seed(base, static_cast<std::uint64_t>(k))};
    discs.push_back({nn::Network(spec), labels});
  }
  return discs;
}

Matrix discriminator_input(const Discriminator& disc, const Eigen::Ref<const Matrix>& hidden, const Labels& y,
                           int num_classes) {
  const Index expected = hidden.cols() + (disc.uses_labels ? num_classes : 0);
  if (disc.net.spec().input_dim != expected)
    throw Error(ErrorKind::Shape, "discriminator expects input width " + std::to_string(disc.net.spec().input_dim) +
                                      ", got " + std::to_string(expected));
  if (!disc.uses_labels) return hidden;
  Matrix in = Matrix::Zero(hidden.rows(), expected);
  in.leftCols(hidden.cols()) = hidden;
  for (Index i = 0; i < hidden.rows(); ++i) {
    if (y[i] < 0 || y[i] >= num_classes) throw Error(ErrorKind::LabelDomain, "class label out of range");
    in(i, hidden.cols() + y[i]) = 1.0;
  }
  return in;
}

Model model_from_checkpoint(const nn::Checkpoint& ckpt) {
  Model model{ckpt.at("main").network, {}};
  for (std::size_t k = 0;; ++k) {
    const std::string name = "head_" + std::to_string(k);
    bool found = false;
    for (const auto& e : ckpt.entries)
      if (e.name == name) {
        model.group_heads.push_back(e.network);
        found = true;
      }
    if (!found) break;
  }
  return model;
}

}  // namespace fairkit::train

#pragma once

#include <vector>

#include "fairkit/nn/checkpoint.hpp"
#include "fairkit/nn/mlp.hpp"
#include "fairkit/train/methods.hpp"

namespace fairkit::train {

/// Main classifier. The network's output layer is the shared head; Gate adds
/// one linear head per group on the penultimate representation.
struct Model {
  nn::Network net;
  std::vector<nn::Network> group_heads;

  bool has_gate() const { return !group_heads.empty(); }
  bool operator==(const Model&) const = default;
};

Model make_model(const MethodConfig& cfg, Index input_dim, int num_classes, int num_groups);

/// Penultimate representation.
Matrix hidden(const Model& model, const Eigen::Ref<const Matrix>& x);

/// shared_logits + head_{g_i}(hidden_i) row by row.
Matrix gate_forward(const Eigen::Ref<const Matrix>& shared_logits, const Eigen::Ref<const Matrix>& hidden,
                    const Labels& g, const std::vector<nn::Network>& heads);

/// shared_logits + sum_k prior_k head_k(hidden).
Matrix gate_mix_forward(const Eigen::Ref<const Matrix>& shared_logits, const Eigen::Ref<const Matrix>& hidden,
                        const Eigen::Ref<const Vector>& prior, const std::vector<nn::Network>& heads);

/// Logits with Gate heads hard-gated by `g` (ignored without heads).
Matrix logits(const Model& model, const Eigen::Ref<const Matrix>& x, const Labels& g);
Labels predict(const Model& model, const Eigen::Ref<const Matrix>& x, const Labels& g);
Labels argmax_rows(const Eigen::Ref<const Matrix>& scores);

struct Discriminator {
  nn::Network net;
  bool uses_labels = false;
};

std::vector<Discriminator> make_discriminators(const MethodConfig& cfg, Index hidden_dim, int num_classes,
                                               int num_groups);

/// hidden, optionally followed by onehot(y).
Matrix discriminator_input(const Discriminator& disc, const Eigen::Ref<const Matrix>& hidden, const Labels& y,
                           int num_classes);

/// Checkpoint entry names: "main", "head_<k>", "disc_<k>".
Model model_from_checkpoint(const nn::Checkpoint& ckpt);

}  // namespace fairkit::train

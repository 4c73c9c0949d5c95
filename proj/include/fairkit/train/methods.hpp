#pragma once

#include <string>
#include <vector>

#include "fairkit/data/dataset.hpp"
#include "fairkit/nn/loss.hpp"
#include "fairkit/nn/mlp.hpp"
#include "fairkit/nn/optimizer.hpp"
#include "fairkit/types.hpp"

namespace fairkit::train {

/// Seed sub-streams used by the trainer.
namespace streams {
inline constexpr std::uint64_t kInit = 0;
inline constexpr std::uint64_t kShuffle = 1;
inline constexpr std::uint64_t kDiscriminator = 2;
inline constexpr std::uint64_t kBalance = 3;
inline constexpr std::uint64_t kPost = 4;
}  // namespace streams

enum class Method { Standard, Adv, EAdv, DAdv, AAdv, ADAdv, Gate, FairBatch, FairSCL, EO_CLA };

std::string to_string(Method m);
Method method_from_string(const std::string& name);
bool is_adversarial(Method m);

/// At-training method plus the optimisation knobs shared by every method.
struct MethodConfig {
  Method method = Method::Standard;

  double adv_lambda = 1.0;
  int n_discriminators = 3;   // EAdv, DAdv, ADAdv; Adv and AAdv always use one
  double diff_lambda = 0.0;   // DAdv, ADAdv
  Index adv_hidden = 64;      // discriminator hidden width

  double fairbatch_alpha = 0.01;

  double fcl_lambda_y = 0.1;
  double fcl_lambda_g = 0.1;
  double temperature = 0.07;

  double eo_cla_lambda = 1.0;

  std::vector<Index> hidden_dims{300, 300};
  nn::Activation activation = nn::Activation::ReLU;
  nn::OptimizerConfig optimizer;
  Index batch_size = 64;
  int epochs = 20;
  std::uint64_t seed = 0;

  /// Throws Config naming the offending field.
  void validate() const;

  int discriminator_count() const;
  bool discriminators_use_labels() const { return method == Method::AAdv || method == Method::ADAdv; }
  double effective_diff_lambda() const;

  bool operator==(const MethodConfig&) const = default;
};

/// Per-(class, group) FairBatch sampling state.
struct FairBatchState {
  data::CellProbs probs;        // sums to 1
  Vector class_mass;            // per-class marginal, fixed at initialisation
  data::CellProbs cell_losses;  // last observed mean CE per cell
  Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic> support;
  double alpha = 0.0;

  /// Empirical (y, g) frequencies of the training set.
  static FairBatchState initial(const data::Dataset& train, double alpha);
};

/// One sign step per cell towards the higher-loss group, clipped at 0 and
/// renormalised within each class so class marginals are unchanged. Cells with
/// `observed == 0` keep their previous loss. sign(0) = 0.
FairBatchState fairbatch_epoch_update(const FairBatchState& state, const data::CellProbs& epoch_losses,
                                      const data::CellCounts& observed);

struct ReprLoss {
  double loss = 0.0;
  Matrix d_reprs;
};

/// lambda_y * SCL(reprs, y) + lambda_g * SCL over positives that share y but
/// not g. Degenerate terms contribute zero.
ReprLoss fairscl_loss(const Eigen::Ref<const Matrix>& reprs, const Labels& y, const Labels& g, double lambda_y,
                      double lambda_g, double temperature);

/// Positives for the fairness term: same class, different group.
nn::PositiveMask cross_group_positives(const Labels& y, const Labels& g);

struct LossAdjustment {
  double addition = 0.0;
  Vector d_per_example;  // d addition / d loss_i
};

/// lambda * sum_y sum_g |mean loss in (y, g) - mean loss in y| over cells
/// present in the batch.
LossAdjustment eo_cla_adjusted_loss(const Eigen::Ref<const Vector>& per_example_losses, const Labels& y,
                                    const Labels& g, double lambda);

/// sum_{i<j} ||H_i^T H_j||_F^2; fills `grads` (same shapes as `hidden`) when given.
double orthogonality_penalty(const std::vector<Matrix>& hidden, std::vector<Matrix>* grads = nullptr);

}  // namespace fairkit::train

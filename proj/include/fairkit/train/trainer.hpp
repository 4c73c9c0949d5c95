#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <vector>

#include "fairkit/data/dataset.hpp"
#include "fairkit/eval/metrics.hpp"
#include "fairkit/nn/mlp.hpp"
#include "fairkit/train/methods.hpp"
#include "fairkit/train/model.hpp"

namespace fairkit::train {

struct StepLosses {
  double objective = 0.0;        // what the main-model gradient descends
  double ce = 0.0;
  double adversary_ce = 0.0;     // mean discriminator CE
  double disc_objective = 0.0;   // sum of discriminator CE + diff_lambda * penalty
  double penalty = 0.0;
  double fairscl = 0.0;
  double eo_cla = 0.0;
};

struct StepResult {
  StepLosses losses;
  nn::Gradients main;
  std::vector<nn::Gradients> heads;
  std::vector<nn::Gradients> discs;
  Vector per_example_ce;
};

/// Losses and gradients for one batch at the current parameters. The main
/// gradient is d(objective)/d(main, heads) with the adversary entering through
/// gradient reversal; discriminator gradients are d(disc_objective)/d(disc).
StepResult compute_step(const Model& model, const std::vector<Discriminator>& discs, const data::Batch& batch,
                        const MethodConfig& cfg, int num_classes, int num_groups);

struct Optimizers {
  nn::OptimizerState main;
  std::vector<nn::OptimizerState> heads;
  std::vector<nn::OptimizerState> discs;

  static Optimizers for_model(const Model& model, const std::vector<Discriminator>& discs,
                              const nn::OptimizerConfig& config);
};

/// compute_step followed by one optimiser update of every network.
StepResult adv_joint_step(Model& model, std::vector<Discriminator>& discs, Optimizers& opt, const data::Batch& batch,
                          const MethodConfig& cfg, int num_classes, int num_groups);

struct EpochRecord {
  int epoch = 0;
  double dev_performance = 0.0;
  double dev_fairness = 0.0;
  double test_performance = 0.0;
  double test_fairness = 0.0;
  double train_loss = 0.0;       // mean objective over the epoch's batches; 0 at epoch 0
  std::string checkpoint;        // relative path when checkpoints are written
  double seconds = 0.0;
};

struct RunRecord {
  MethodConfig config;
  std::vector<EpochRecord> epochs;  // epoch 0 is the initialisation
  Model model;                      // parameters after the last epoch
  std::vector<Vector> trajectory;   // flattened main network per epoch, if requested
};

struct TrainOptions {
  std::optional<std::filesystem::path> checkpoint_dir;  // epoch_<k> files written here
  bool keep_trajectory = false;
  std::function<void(const EpochRecord&)> on_epoch;
};

/// Dev and test are evaluated every epoch on accuracy and 1 - TPR GAP.
RunRecord train(const data::DatasetBundle& bundle, const MethodConfig& cfg, const TrainOptions& options = {});

/// TPR GAP / accuracy report for a model on one split.
eval::FairnessReport evaluate_model(const Model& model, const data::Dataset& ds);

}  // namespace fairkit::train

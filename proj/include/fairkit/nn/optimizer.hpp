#pragma once

#include <cstdint>
#include <vector>

#include "fairkit/nn/mlp.hpp"

namespace fairkit::nn {

enum class OptimizerKind { SGD, Adam };

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::Adam;
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  bool operator==(const OptimizerConfig&) const = default;
};

struct OptimizerState {
  OptimizerConfig config;
  std::uint64_t step = 0;
  std::vector<Layer> first_moment;   // Adam only
  std::vector<Layer> second_moment;  // Adam only

  static OptimizerState for_network(const Network& net, OptimizerConfig config);

  bool operator==(const OptimizerState& other) const;
};

/// One in-place update. Throws TrainingDiverged if any gradient entry is not
/// finite, naming the offending parameter.
void optimizer_step(Network& net, const Gradients& grads, OptimizerState& state);

}  // namespace fairkit::nn

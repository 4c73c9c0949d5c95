#include "fairkit/nn/optimizer.hpp"

#include <cmath>
#include <string>

#include "fairkit/error.hpp"

namespace fairkit::nn {

OptimizerState OptimizerState::for_network(const Network& net, OptimizerConfig config) {
  OptimizerState state;
  state.config = config;
  if (config.kind == OptimizerKind::Adam) {
    state.first_moment = Gradients::zeros_like(net).layers;
    state.second_moment = state.first_moment;
  }
  return state;
}

bool OptimizerState::operator==(const OptimizerState& other) const {
  if (!(config == other.config) || step != other.step ||
      first_moment.size() != other.first_moment.size() ||
      second_moment.size() != other.second_moment.size())
    return false;
  for (std::size_t k = 0; k < first_moment.size(); ++k)
    if (first_moment[k].weight != other.first_moment[k].weight ||
        first_moment[k].bias != other.first_moment[k].bias ||
        second_moment[k].weight != other.second_moment[k].weight ||
        second_moment[k].bias != other.second_moment[k].bias)
      return false;
  return true;
}

void optimizer_step(Network& net, const Gradients& grads, OptimizerState& state) {
  auto& layers = net.layers();
  if (grads.layers.size() != layers.size())
    throw Error(ErrorKind::Shape, "gradient layer count does not match network");
  for (std::size_t k = 0; k < layers.size(); ++k) {
    const auto& g = grads.layers[k];
    if (g.weight.rows() != layers[k].weight.rows() || g.weight.cols() != layers[k].weight.cols() ||
        g.bias.size() != layers[k].bias.size())
      throw Error(ErrorKind::Shape, "gradient shape mismatch at layer " + std::to_string(k));
    if (!g.weight.allFinite())
      throw Error(ErrorKind::TrainingDiverged, "non-finite gradient in layer " + std::to_string(k) + " weight");
    if (!g.bias.allFinite())
      throw Error(ErrorKind::TrainingDiverged, "non-finite gradient in layer " + std::to_string(k) + " bias");
  }

  const auto& cfg = state.config;
  ++state.step;
  if (cfg.kind == OptimizerKind::SGD) {
    for (std::size_t k = 0; k < layers.size(); ++k) {
      layers[k].weight -= cfg.lr * grads.layers[k].weight;
      layers[k].bias -= cfg.lr * grads.layers[k].bias;
    }
    return;
  }

  if (state.first_moment.size() != layers.size())
    throw Error(ErrorKind::Shape, "optimizer state does not match network");
  const double t = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(cfg.beta1, t);
  const double correction2 = 1.0 - std::pow(cfg.beta2, t);
  auto update = [&](auto& param, auto& m, auto& v, const auto& g) {
    m = cfg.beta1 * m + (1.0 - cfg.beta1) * g;
    v = cfg.beta2 * v + (1.0 - cfg.beta2) * g.cwiseProduct(g);
    param.array() -= cfg.lr * (m.array() / correction1) /
                     ((v.array() / correction2).sqrt() + cfg.eps);
  };
  for (std::size_t k = 0; k < layers.size(); ++k) {
    update(layers[k].weight, state.first_moment[k].weight, state.second_moment[k].weight,
           grads.layers[k].weight);
    update(layers[k].bias, state.first_moment[k].bias, state.second_moment[k].bias,
           grads.layers[k].bias);
  }
}

}  // namespace fairkit::nn

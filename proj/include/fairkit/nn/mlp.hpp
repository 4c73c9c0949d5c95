#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "fairkit/types.hpp"

namespace fairkit::nn {

enum class Activation { ReLU, Tanh };

struct MlpSpec {
  Index input_dim = 1;
  std::vector<Index> hidden_dims;
  Index output_dim = 1;
  Activation activation = Activation::ReLU;
  std::uint64_t seed = 0;

  bool operator==(const MlpSpec&) const = default;
};

/// Affine map `x -> W x + b`; applied row-wise to an n x in batch.
struct Layer {
  Matrix weight;  // out x in
  Vector bias;    // out

  Index in_dim() const { return weight.cols(); }
  Index out_dim() const { return weight.rows(); }
};

/// Batch application of a layer: X (n x in) -> n x out.
Matrix apply(const Layer& layer, const Eigen::Ref<const Matrix>& x);

/// Feed-forward network. Hidden layers use `spec.activation`; the output
/// layer is linear and produces logits.
class Network {
 public:
  /// Glorot-uniform weights drawn from `spec.seed`, zero biases.
  explicit Network(MlpSpec spec);
  Network(MlpSpec spec, std::vector<Layer> layers);

  static Network zeros(MlpSpec spec);

  const MlpSpec& spec() const { return spec_; }
  const std::vector<Layer>& layers() const { return layers_; }
  std::vector<Layer>& layers() { return layers_; }

  std::size_t num_hidden_layers() const { return layers_.size() - 1; }
  /// Width of the penultimate activation (input width when there are no hidden layers).
  Index hidden_dim() const;
  Index num_parameters() const;

  /// Parameters in layer order, each layer as row-major weight then bias.
  Vector flatten() const;
  void unflatten(const Eigen::Ref<const Vector>& params);

  bool operator==(const Network& other) const;

 private:
  MlpSpec spec_;
  std::vector<Layer> layers_;
};

struct ActivationTrace {
  Matrix input;
  std::vector<Matrix> pre;   // per layer, before activation
  std::vector<Matrix> post;  // per layer, after activation (post.back() == logits)

  const Matrix& logits() const { return post.back(); }
  /// Penultimate activation; the representation debiasing methods act on.
  const Matrix& hidden() const { return post.size() >= 2 ? post[post.size() - 2] : input; }
};

ActivationTrace forward(const Network& net, const Eigen::Ref<const Matrix>& x);

/// Extra upstream gradient injected at the output of hidden layer `layer`
/// (0-based over hidden layers only).
struct HiddenGrad {
  std::size_t layer;
  Matrix grad;
};

struct Gradients {
  std::vector<Layer> layers;
  Matrix input;  // dLoss/dX

  static Gradients zeros_like(const Network& net);
  Gradients& operator+=(const Gradients& other);
  Vector flatten() const;
};

Gradients backward(const Network& net, const ActivationTrace& trace,
                   const Eigen::Ref<const Matrix>& d_logits,
                   std::span<const HiddenGrad> extra = {});

}  // namespace fairkit::nn

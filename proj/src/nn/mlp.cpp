#include "fairkit/nn/mlp.hpp"

#include <cmath>
#include <random>
#include <string>

#include "fairkit/error.hpp"

namespace fairkit::nn {

namespace {

void validate(const MlpSpec& spec) {
  if (spec.input_dim < 1 || spec.output_dim < 1)
    throw Error(ErrorKind::Shape, "network dimensions must be >= 1");
  for (Index h : spec.hidden_dims)
    if (h < 1) throw Error(ErrorKind::Shape, "hidden dimensions must be >= 1");
}

std::vector<Index> layer_widths(const MlpSpec& spec) {
  std::vector<Index> widths{spec.input_dim};
  widths.insert(widths.end(), spec.hidden_dims.begin(), spec.hidden_dims.end());
  widths.push_back(spec.output_dim);
  return widths;
}

Matrix activate(Activation act, const Matrix& z) {
  switch (act) {
    case Activation::ReLU: return z.cwiseMax(0.0);
    case Activation::Tanh: return z.array().tanh().matrix();
  }
  return z;
}

// Derivative expressed through the pre-activation and the activation output.
Matrix activation_grad(Activation act, const Matrix& z, const Matrix& a) {
  switch (act) {
    case Activation::ReLU: return (z.array() > 0.0).cast<double>().matrix();
    case Activation::Tanh: return (1.0 - a.array().square()).matrix();
  }
  return Matrix::Ones(z.rows(), z.cols());
}

Vector flatten_layers(const std::vector<Layer>& layers) {
  Index total = 0;
  for (const auto& l : layers) total += l.weight.size() + l.bias.size();
  Vector out(total);
  Index offset = 0;
  for (const auto& l : layers) {
    for (Index r = 0; r < l.weight.rows(); ++r)
      for (Index c = 0; c < l.weight.cols(); ++c) out[offset++] = l.weight(r, c);
    out.segment(offset, l.bias.size()) = l.bias;
    offset += l.bias.size();
  }
  return out;
}

}  // namespace

Matrix apply(const Layer& layer, const Eigen::Ref<const Matrix>& x) {
  Matrix z = x * layer.weight.transpose();
  z.rowwise() += layer.bias.transpose();
  return z;
}

Network::Network(MlpSpec spec) : spec_(std::move(spec)) {
  validate(spec_);
  const auto widths = layer_widths(spec_);
  std::mt19937_64 rng(spec_.seed);
  for (std::size_t k = 0; k + 1 < widths.size(); ++k) {
    const Index in = widths[k];
    const Index out = widths[k + 1];
    const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
    std::uniform_real_distribution<double> dist(-limit, limit);
    Layer layer{Matrix(out, in), Vector::Zero(out)};
    for (Index r = 0; r < out; ++r)
      for (Index c = 0; c < in; ++c) layer.weight(r, c) = dist(rng);
    layers_.push_back(std::move(layer));
  }
}

Network::Network(MlpSpec spec, std::vector<Layer> layers)
    : spec_(std::move(spec)), layers_(std::move(layers)) {
  validate(spec_);
  const auto widths = layer_widths(spec_);
  if (layers_.size() + 1 != widths.size())
    throw Error(ErrorKind::Shape, "layer count does not match spec");
  for (std::size_t k = 0; k < layers_.size(); ++k) {
    const auto& l = layers_[k];
    if (l.in_dim() != widths[k] || l.out_dim() != widths[k + 1] || l.bias.size() != l.out_dim())
      throw Error(ErrorKind::Shape, "layer " + std::to_string(k) + " does not match spec");
  }
}

Network Network::zeros(MlpSpec spec) {
  validate(spec);
  const auto widths = layer_widths(spec);
  std::vector<Layer> layers;
  for (std::size_t k = 0; k + 1 < widths.size(); ++k)
    layers.push_back({Matrix::Zero(widths[k + 1], widths[k]), Vector::Zero(widths[k + 1])});
  return Network(std::move(spec), std::move(layers));
}

Index Network::hidden_dim() const {
  return spec_.hidden_dims.empty() ? spec_.input_dim : spec_.hidden_dims.back();
}

Index Network::num_parameters() const {
  Index n = 0;
  for (const auto& l : layers_) n += l.weight.size() + l.bias.size();
  return n;
}

Vector Network::flatten() const { return flatten_layers(layers_); }

void Network::unflatten(const Eigen::Ref<const Vector>& params) {
  if (params.size() != num_parameters())
    throw Error(ErrorKind::Shape, "parameter vector has " + std::to_string(params.size()) +
                                      " entries, expected " + std::to_string(num_parameters()));
  Index offset = 0;
  for (auto& l : layers_) {
    for (Index r = 0; r < l.weight.rows(); ++r)
      for (Index c = 0; c < l.weight.cols(); ++c) l.weight(r, c) = params[offset++];
    l.bias = params.segment(offset, l.bias.size());
    offset += l.bias.size();
  }
}

bool Network::operator==(const Network& other) const {
  if (!(spec_ == other.spec_) || layers_.size() != other.layers_.size()) return false;
  for (std::size_t k = 0; k < layers_.size(); ++k)
    if (layers_[k].weight != other.layers_[k].weight || layers_[k].bias != other.layers_[k].bias)
      return false;
  return true;
}

ActivationTrace forward(const Network& net, const Eigen::Ref<const Matrix>& x) {
  ActivationTrace trace;
  trace.input = x;
  const auto& layers = net.layers();
  trace.pre.reserve(layers.size());
  trace.post.reserve(layers.size());
  const Matrix* current = &trace.input;
  for (std::size_t k = 0; k < layers.size(); ++k) {
    if (current->cols() != layers[k].in_dim())
      throw Error(ErrorKind::Shape, "layer " + std::to_string(k) + " expects " +
                                        std::to_string(layers[k].in_dim()) + " inputs, got " +
                                        std::to_string(current->cols()));
    trace.pre.push_back(apply(layers[k], *current));
    const bool is_output = k + 1 == layers.size();
    trace.post.push_back(is_output ? trace.pre.back()
                                   : activate(net.spec().activation, trace.pre.back()));
    current = &trace.post.back();
  }
  return trace;
}

Gradients Gradients::zeros_like(const Network& net) {
  Gradients g;
  for (const auto& l : net.layers())
    g.layers.push_back({Matrix::Zero(l.weight.rows(), l.weight.cols()), Vector::Zero(l.bias.size())});
  return g;
}

Gradients& Gradients::operator+=(const Gradients& other) {
  for (std::size_t k = 0; k < layers.size(); ++k) {
    layers[k].weight += other.layers[k].weight;
    layers[k].bias += other.layers[k].bias;
  }
  return *this;
}

Vector Gradients::flatten() const { return flatten_layers(layers); }

Gradients backward(const Network& net, const ActivationTrace& trace,
                   const Eigen::Ref<const Matrix>& d_logits, std::span<const HiddenGrad> extra) {
  const auto& layers = net.layers();
  if (trace.post.size() != layers.size())
    throw Error(ErrorKind::Shape, "activation trace does not belong to this network");
  if (d_logits.rows() != trace.logits().rows() || d_logits.cols() != trace.logits().cols())
    throw Error(ErrorKind::Shape, "upstream gradient is " + std::to_string(d_logits.rows()) + "x" +
                                      std::to_string(d_logits.cols()) + ", logits are " +
                                      std::to_string(trace.logits().rows()) + "x" +
                                      std::to_string(trace.logits().cols()));
  for (const auto& e : extra) {
    if (e.layer >= net.num_hidden_layers())
      throw Error(ErrorKind::Shape, "hidden gradient targets missing layer " + std::to_string(e.layer));
    const auto& h = trace.post[e.layer];
    if (e.grad.rows() != h.rows() || e.grad.cols() != h.cols())
      throw Error(ErrorKind::Shape, "hidden gradient shape mismatch at layer " + std::to_string(e.layer));
  }

  Gradients grads;
  grads.layers.resize(layers.size());
  Matrix delta = d_logits;  // gradient w.r.t. pre-activation of layer k
  for (std::size_t k = layers.size(); k-- > 0;) {
    const Matrix& in = k == 0 ? trace.input : trace.post[k - 1];
    grads.layers[k].weight = delta.transpose() * in;
    grads.layers[k].bias = delta.colwise().sum().transpose();
    Matrix d_in = delta * layers[k].weight;
    if (k == 0) {
      grads.input = std::move(d_in);
      break;
    }
    for (const auto& e : extra)
      if (e.layer == k - 1) d_in += e.grad;
    delta = d_in.cwiseProduct(activation_grad(net.spec().activation, trace.pre[k - 1], trace.post[k - 1]));
  }
  return grads;
}

}  // namespace fairkit::nn

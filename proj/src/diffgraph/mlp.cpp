#include "irlvla/diffgraph/mlp.hpp"

#include <cmath>

#include "irlvla/common/error.hpp"
#include "irlvla/common/rng.hpp"

namespace irlvla::diffgraph {

struct TapeAccess {
  static const ParamBundle*& params(Tape& t) { return t.params_; }
  static std::vector<Matrix>& inputs(Tape& t) { return t.inputs_; }
  static std::vector<Matrix>& outputs(Tape& t) { return t.outputs_; }
  static bool& consumed(Tape& t) { return t.consumed_; }
};

std::size_t ParamBundle::num_params() const {
  std::size_t n = 0;
  for (const auto& l : layers) n += l.weight.size() + l.bias.size();
  return n;
}

bool ParamBundle::all_finite() const {
  for (const auto& l : layers) {
    if (!l.weight.allFinite() || !l.bias.allFinite()) return false;
  }
  return true;
}

ParamBundle make_mlp(const std::string& name, const std::vector<int>& sizes, std::uint64_t seed,
                     Activation hidden, Activation output) {
  if (sizes.size() < 2) fail(ErrorCode::ShapeMismatch, "an MLP needs at least two sizes");
  ParamBundle p;
  p.seed = seed;
  Rng rng(mix_seed(seed, 0x6d6c70));
  for (std::size_t i = 0; i + 1 < sizes.size(); ++i) {
    DenseLayer layer;
    layer.name = name + "." + std::to_string(i);
    const double bound = 1.0 / std::sqrt(static_cast<double>(sizes[i]));
    layer.weight.resize(sizes[i + 1], sizes[i]);
    layer.bias.resize(sizes[i + 1]);
    for (Eigen::Index r = 0; r < layer.weight.rows(); ++r) {
      for (Eigen::Index c = 0; c < layer.weight.cols(); ++c) {
        layer.weight(r, c) = rng.uniform(-bound, bound);
      }
    }
    for (Eigen::Index r = 0; r < layer.bias.size(); ++r) layer.bias(r) = rng.uniform(-bound, bound);
    layer.activation = i + 2 == sizes.size() ? output : hidden;
    p.layers.push_back(std::move(layer));
  }
  return p;
}

void zero_output_layer(ParamBundle& params) {
  params.layers.back().weight.setZero();
  params.layers.back().bias.setZero();
}

Gradients Gradients::zeros_like(const ParamBundle& params) {
  Gradients g;
  for (const auto& l : params.layers) {
    g.layers.push_back({Matrix::Zero(l.weight.rows(), l.weight.cols()), Vector::Zero(l.bias.size())});
  }
  return g;
}

Gradients& Gradients::operator+=(const Gradients& other) {
  if (other.layers.size() != layers.size()) fail(ErrorCode::ShapeMismatch, "gradient layer count");
  for (std::size_t i = 0; i < layers.size(); ++i) {
    layers[i].weight += other.layers[i].weight;
    layers[i].bias += other.layers[i].bias;
  }
  return *this;
}

Gradients& Gradients::operator*=(double s) {
  for (auto& l : layers) {
    l.weight *= s;
    l.bias *= s;
  }
  return *this;
}

bool Gradients::all_finite() const {
  for (const auto& l : layers) {
    if (!l.weight.allFinite() || !l.bias.allFinite()) return false;
  }
  return true;
}

double Gradients::max_abs() const {
  double m = 0.0;
  for (const auto& l : layers) {
    if (l.weight.size()) m = std::max(m, l.weight.cwiseAbs().maxCoeff());
    if (l.bias.size()) m = std::max(m, l.bias.cwiseAbs().maxCoeff());
  }
  return m;
}

namespace {

void activate(Matrix& z, Activation a) {
  if (a == Activation::Tanh) z = z.array().tanh().matrix();
}

void check_input(const ParamBundle& params, const Matrix& input) {
  if (params.layers.empty()) fail(ErrorCode::ShapeMismatch, "empty parameter bundle");
  if (input.rows() != params.input_size()) {
    fail(ErrorCode::ShapeMismatch, "input size " + std::to_string(input.rows()) +
                                       " != layer input " + std::to_string(params.input_size()));
  }
}

}  // namespace

ForwardResult mlp_forward(const ParamBundle& params, const Matrix& input) {
  check_input(params, input);
  ForwardResult r;
  TapeAccess::params(r.tape) = &params;
  auto& ins = TapeAccess::inputs(r.tape);
  auto& outs = TapeAccess::outputs(r.tape);
  Matrix x = input;
  for (const auto& layer : params.layers) {
    ins.push_back(x);
    Matrix z = layer.weight * x;
    z.colwise() += layer.bias;
    activate(z, layer.activation);
    outs.push_back(z);
    x = std::move(z);
  }
  r.output = std::move(x);
  return r;
}

Matrix mlp_eval(const ParamBundle& params, const Matrix& input) {
  check_input(params, input);
  Matrix x = input;
  for (const auto& layer : params.layers) {
    Matrix z = layer.weight * x;
    z.colwise() += layer.bias;
    activate(z, layer.activation);
    x = std::move(z);
  }
  return x;
}

BackwardResult backward(Tape& tape, const Matrix& output_grad) {
  if (TapeAccess::consumed(tape)) fail(ErrorCode::TapeReused, "tape already consumed by backward");
  const ParamBundle* params = TapeAccess::params(tape);
  if (params == nullptr) fail(ErrorCode::TapeReused, "tape was never recorded");
  TapeAccess::consumed(tape) = true;
  const auto& ins = TapeAccess::inputs(tape);
  const auto& outs = TapeAccess::outputs(tape);
  if (output_grad.rows() != params->output_size() || output_grad.cols() != outs.back().cols()) {
    fail(ErrorCode::ShapeMismatch, "output gradient shape mismatch");
  }

  BackwardResult r;
  r.grads.layers.resize(params->layers.size());
  Matrix g = output_grad;
  for (std::size_t i = params->layers.size(); i-- > 0;) {
    const DenseLayer& layer = params->layers[i];
    if (layer.activation == Activation::Tanh) {
      g = (g.array() * (1.0 - outs[i].array().square())).matrix();
    }
    r.grads.layers[i].weight = g * ins[i].transpose();
    r.grads.layers[i].bias = g.rowwise().sum();
    g = layer.weight.transpose() * g;
  }
  r.input_grad = std::move(g);
  return r;
}

}  // namespace irlvla::diffgraph

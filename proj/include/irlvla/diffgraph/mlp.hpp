#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace irlvla::diffgraph {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

enum class Activation : std::uint8_t { Identity = 0, Tanh = 1 };

struct DenseLayer {
  std::string name;
  Matrix weight;  // out x in
  Vector bias;    // out
  Activation activation = Activation::Identity;
};

struct ParamBundle {
  std::vector<DenseLayer> layers;
  std::uint64_t seed = 0;

  Eigen::Index input_size() const { return layers.front().weight.cols(); }
  Eigen::Index output_size() const { return layers.back().weight.rows(); }
  std::size_t num_params() const;
  bool all_finite() const;
};

// Dense stack with `hidden` activations on every layer but the last, which
// uses `output`. Weights and biases ~ U(-1/sqrt(fan_in), 1/sqrt(fan_in)).
ParamBundle make_mlp(const std::string& name, const std::vector<int>& sizes, std::uint64_t seed,
                     Activation hidden = Activation::Tanh,
                     Activation output = Activation::Identity);

// Sets the last layer's weights and biases to zero.
void zero_output_layer(ParamBundle& params);

struct LayerGrad {
  Matrix weight;
  Vector bias;
};

struct Gradients {
  std::vector<LayerGrad> layers;

  static Gradients zeros_like(const ParamBundle& params);
  Gradients& operator+=(const Gradients& other);
  Gradients& operator*=(double s);
  bool all_finite() const;
  double max_abs() const;
};

// Recorded forward pass; valid for exactly one backward().
class Tape {
 public:
  Tape() = default;
  bool consumed() const { return consumed_; }

 private:
  friend struct TapeAccess;
  const ParamBundle* params_ = nullptr;
  std::vector<Matrix> inputs_;   // per layer input, batch in columns
  std::vector<Matrix> outputs_;  // per layer post-activation output
  bool consumed_ = false;
};

struct ForwardResult {
  Matrix output;  // out x batch
  Tape tape;
};

struct BackwardResult {
  Gradients grads;
  Matrix input_grad;  // in x batch
};

// Batched forward: each column of `input` is one sample. Throws ShapeMismatch.
ForwardResult mlp_forward(const ParamBundle& params, const Matrix& input);

// Forward without recording, for inference paths.
Matrix mlp_eval(const ParamBundle& params, const Matrix& input);

// Gradients summed over the batch columns. Throws TapeReused on a second call.
BackwardResult backward(Tape& tape, const Matrix& output_grad);

}  // namespace irlvla::diffgraph

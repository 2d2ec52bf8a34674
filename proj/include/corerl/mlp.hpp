#pragma once

#include <Eigen/Dense>
#include <vector>

#include "corerl/rng.hpp"

namespace corerl {

/// Fully connected network with tanh hidden layers and a linear output.
/// Parameters live in one flat vector (layer by layer: W column-major, then b)
/// so optimizers, soft updates, checkpoints and finite differences can treat
/// them uniformly. Inputs and outputs are column-per-sample.
class Mlp {
 public:
  struct Tape {
    std::vector<Eigen::MatrixXd> activations;  // [0] = input, back() = output
  };

  Mlp() = default;
  Mlp(std::vector<int> layer_sizes, Rng& rng, double final_layer_scale = 3e-3);

  Eigen::MatrixXd forward(const Eigen::MatrixXd& x, Tape* tape = nullptr) const;

  /// Back-propagates dL/dY. Accumulates dL/dparams into `grad` when given
  /// and returns dL/dX.
  Eigen::MatrixXd backward(const Tape& tape, const Eigen::MatrixXd& d_out,
                           Eigen::VectorXd* grad) const;

  /// Fixed per-input multiplier applied before the first layer; empty means
  /// identity. Not a parameter: optimizers and soft updates never touch it.
  void set_input_scale(Eigen::VectorXd scale);
  const Eigen::VectorXd& input_scale() const { return input_scale_; }

  int input_dim() const { return sizes_.front(); }
  int output_dim() const { return sizes_.back(); }
  const std::vector<int>& layer_sizes() const { return sizes_; }

  Eigen::VectorXd& params() { return params_; }
  const Eigen::VectorXd& params() const { return params_; }

 private:
  using ConstMap = Eigen::Map<const Eigen::MatrixXd>;

  ConstMap weight(std::size_t layer) const;
  Eigen::Map<const Eigen::VectorXd> bias(std::size_t layer) const;

  std::vector<int> sizes_;
  std::vector<Eigen::Index> offsets_;  // start of each layer's W
  Eigen::VectorXd params_;
  Eigen::VectorXd input_scale_;
};

/// Adam on a flat parameter vector.
class Adam {
 public:
  Adam() = default;
  explicit Adam(Eigen::Index n, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);

  void step(Eigen::VectorXd& params, const Eigen::VectorXd& grad, double lr);

 private:
  Eigen::VectorXd m_;
  Eigen::VectorXd v_;
  double beta1_ = 0.9;
  double beta2_ = 0.999;
  double eps_ = 1e-8;
  long t_ = 0;
};

}  // namespace corerl

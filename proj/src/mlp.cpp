#include "corerl/mlp.hpp"

#include <cmath>
#include <random>

#include "corerl/error.hpp"

namespace corerl {

Mlp::Mlp(std::vector<int> layer_sizes, Rng& rng, double final_layer_scale)
    : sizes_(std::move(layer_sizes)) {
  if (sizes_.size() < 2) throw Error(ErrorCode::ConfigError, "network needs at least two layers");
  Eigen::Index total = 0;
  for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
    if (sizes_[l] < 1 || sizes_[l + 1] < 1) {
      throw Error(ErrorCode::ConfigError, "layer sizes must be positive");
    }
    offsets_.push_back(total);
    total += static_cast<Eigen::Index>(sizes_[l + 1]) * (sizes_[l] + 1);
  }
  params_.resize(total);

  const std::size_t last = sizes_.size() - 2;
  for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
    const double bound = l == last ? final_layer_scale : 1.0 / std::sqrt(double(sizes_[l]));
    std::uniform_real_distribution<double> u(-bound, bound);
    const Eigen::Index n = static_cast<Eigen::Index>(sizes_[l + 1]) * (sizes_[l] + 1);
    for (Eigen::Index i = 0; i < n; ++i) params_(offsets_[l] + i) = u(rng);
  }
}

void Mlp::set_input_scale(Eigen::VectorXd scale) {
  if (scale.size() != 0 && scale.size() != input_dim()) {
    throw Error(ErrorCode::DimensionMismatch, "input scale has " + std::to_string(scale.size()) +
                                                  " entries, expected " + std::to_string(input_dim()));
  }
  if (!scale.allFinite()) throw Error(ErrorCode::ConfigError, "input scale must be finite");
  input_scale_ = std::move(scale);
}

Mlp::ConstMap Mlp::weight(std::size_t layer) const {
  return ConstMap(params_.data() + offsets_[layer], sizes_[layer + 1], sizes_[layer]);
}

Eigen::Map<const Eigen::VectorXd> Mlp::bias(std::size_t layer) const {
  const Eigen::Index off = offsets_[layer] + Eigen::Index(sizes_[layer + 1]) * sizes_[layer];
  return Eigen::Map<const Eigen::VectorXd>(params_.data() + off, sizes_[layer + 1]);
}

Eigen::MatrixXd Mlp::forward(const Eigen::MatrixXd& x, Tape* tape) const {
  if (x.rows() != input_dim()) {
    throw Error(ErrorCode::DimensionMismatch, "network input has " + std::to_string(x.rows()) +
                                                  " rows, expected " + std::to_string(input_dim()));
  }
  const std::size_t layers = sizes_.size() - 1;
  Eigen::MatrixXd a = x;
  if (input_scale_.size() > 0) a = input_scale_.asDiagonal() * a;
  if (tape) {
    tape->activations.resize(layers + 1);
    tape->activations[0] = a;
  }
  for (std::size_t l = 0; l < layers; ++l) {
    Eigen::MatrixXd z = weight(l) * a;
    z.colwise() += bias(l);
    if (l + 1 < layers) z = z.array().tanh().matrix();
    a = std::move(z);
    if (tape) tape->activations[l + 1] = a;
  }
  return a;
}

Eigen::MatrixXd Mlp::backward(const Tape& tape, const Eigen::MatrixXd& d_out,
                              Eigen::VectorXd* grad) const {
  const std::size_t layers = sizes_.size() - 1;
  if (grad && grad->size() != params_.size()) grad->setZero(params_.size());
  Eigen::MatrixXd delta = d_out;  // dL/dz for the current layer
  for (std::size_t l = layers; l-- > 0;) {
    const Eigen::MatrixXd& input = tape.activations[l];
    if (grad) {
      Eigen::Map<Eigen::MatrixXd> gw(grad->data() + offsets_[l], sizes_[l + 1], sizes_[l]);
      gw.noalias() += delta * input.transpose();
      Eigen::Map<Eigen::VectorXd> gb(grad->data() + offsets_[l] + gw.size(), sizes_[l + 1]);
      gb += delta.rowwise().sum();
    }
    Eigen::MatrixXd d_input = weight(l).transpose() * delta;
    if (l > 0) {
      // input is tanh output of the previous layer.
      delta = d_input.array() * (1.0 - input.array().square());
    } else {
      if (input_scale_.size() > 0) return input_scale_.asDiagonal() * d_input;
      return d_input;
    }
  }
  return delta;
}

Adam::Adam(Eigen::Index n, double beta1, double beta2, double eps)
    : m_(Eigen::VectorXd::Zero(n)), v_(Eigen::VectorXd::Zero(n)),
      beta1_(beta1), beta2_(beta2), eps_(eps) {}

void Adam::step(Eigen::VectorXd& params, const Eigen::VectorXd& grad, double lr) {
  if (lr == 0.0) return;
  ++t_;
  m_ = beta1_ * m_ + (1.0 - beta1_) * grad;
  v_ = beta2_ * v_ + (1.0 - beta2_) * grad.cwiseAbs2();
  const double c1 = 1.0 - std::pow(beta1_, double(t_));
  const double c2 = 1.0 - std::pow(beta2_, double(t_));
  params.array() -= lr * (m_.array() / c1) / ((v_.array() / c2).sqrt() + eps_);
}

}  // namespace corerl

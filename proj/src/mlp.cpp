#include "gpe/mlp.hpp"

#include <cmath>
#include <stdexcept>

namespace gpe {

double MlpGradient::squared_norm() const {
  double s = 0.0;
  for (const auto& w : weights) s += w.squaredNorm();
  for (const auto& b : biases) s += b.squaredNorm();
  return s;
}

MlpMap::MlpMap(std::vector<int> widths, double slope, RngSeed seed)
    : widths_(std::move(widths)), slope_(slope) {
  if (widths_.size() < 2) throw std::invalid_argument("mlp needs at least input and output widths");
  Rng rng(seed);
  for (std::size_t l = 0; l + 1 < widths_.size(); ++l) {
    const int in = widths_[l];
    const int out = widths_[l + 1];
    if (in < 1 || out < 1) throw std::invalid_argument("mlp widths must be positive");
    const double scale = 1.0 / std::sqrt(static_cast<double>(in));
    Eigen::MatrixXd w(out, in);
    for (int i = 0; i < out; ++i)
      for (int j = 0; j < in; ++j) w(i, j) = rng.uniform(-scale, scale);
    Vector b(out);
    for (int i = 0; i < out; ++i) b(i) = rng.uniform(-scale, scale);
    weights_.push_back(std::move(w));
    biases_.push_back(std::move(b));
  }
  validate();
}

MlpMap::MlpMap(std::vector<int> widths, double slope, std::vector<Eigen::MatrixXd> weights,
               std::vector<Vector> biases)
    : widths_(std::move(widths)),
      slope_(slope),
      weights_(std::move(weights)),
      biases_(std::move(biases)) {
  validate();
}

void MlpMap::validate() const {
  if (!(slope_ > 0.0)) throw std::invalid_argument("leaky-rectifier slope must be > 0");
  if (widths_.size() < 2) throw std::invalid_argument("mlp needs at least input and output widths");
  if (weights_.size() + 1 != widths_.size() || biases_.size() != weights_.size())
    throw std::invalid_argument("mlp layer count does not match widths");
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    if (weights_[l].rows() != widths_[l + 1] || weights_[l].cols() != widths_[l] ||
        biases_[l].size() != widths_[l + 1])
      throw std::invalid_argument("mlp layer shape does not match widths");
  }
  if (!all_finite()) throw std::invalid_argument("mlp weights must be finite");
}

bool MlpMap::all_finite() const {
  for (const auto& w : weights_)
    if (!w.allFinite()) return false;
  for (const auto& b : biases_)
    if (!b.allFinite()) return false;
  return true;
}

RowMatrix MlpMap::forward(const RowMatrix& inputs, Tape& tape) const {
  if (inputs.cols() != input_dim()) throw std::invalid_argument("mlp input dimension mismatch");
  const std::size_t layers = weights_.size();
  tape.pre.resize(layers);
  tape.post.resize(layers + 1);
  tape.post[0] = inputs.transpose();
  for (std::size_t l = 0; l < layers; ++l) {
    tape.pre[l] = weights_[l] * tape.post[l];
    tape.pre[l].colwise() += biases_[l];
    if (l + 1 < layers) {
      const double a = slope_;
      tape.post[l + 1] = tape.pre[l].unaryExpr([a](double z) { return z > 0.0 ? z : a * z; });
    } else {
      tape.post[l + 1] = tape.pre[l];
    }
  }
  return tape.post[layers].transpose();
}

RowMatrix MlpMap::forward(const RowMatrix& inputs) const {
  Tape tape;
  return forward(inputs, tape);
}

Vector MlpMap::operator()(const Vector& x) const {
  if (x.size() != input_dim()) throw std::invalid_argument("mlp input dimension mismatch");
  Vector a = x;
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    Vector z = weights_[l] * a + biases_[l];
    if (l + 1 < weights_.size())
      for (Eigen::Index i = 0; i < z.size(); ++i) z(i) = z(i) > 0.0 ? z(i) : slope_ * z(i);
    a = std::move(z);
  }
  return a;
}

MlpGradient MlpMap::backward(const Tape& tape, const RowMatrix& output_grad,
                             RowMatrix* input_grad) const {
  const std::size_t layers = weights_.size();
  if (tape.post.size() != layers + 1) throw std::invalid_argument("tape does not match network");
  if (output_grad.cols() != output_dim() || output_grad.rows() != tape.post[0].cols())
    throw std::invalid_argument("output gradient shape mismatch");
  MlpGradient grad;
  grad.weights.resize(layers);
  grad.biases.resize(layers);
  Eigen::MatrixXd delta = output_grad.transpose();
  for (std::size_t l = layers; l-- > 0;) {
    grad.weights[l] = delta * tape.post[l].transpose();
    grad.biases[l] = delta.rowwise().sum();
    if (l > 0 || input_grad != nullptr) {
      Eigen::MatrixXd back = weights_[l].transpose() * delta;
      if (l > 0) {
        const double a = slope_;
        back.array() *= tape.pre[l - 1].unaryExpr([a](double z) { return z > 0.0 ? 1.0 : a; }).array();
      }
      delta = std::move(back);
    }
  }
  if (input_grad != nullptr) *input_grad = delta.transpose();
  return grad;
}

void MlpMap::apply_step(const MlpGradient& grad, double step) {
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    weights_[l] -= step * grad.weights[l];
    biases_[l] -= step * grad.biases[l];
  }
}

MlpGradient MlpMap::zero_gradient() const {
  MlpGradient g;
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    g.weights.push_back(Eigen::MatrixXd::Zero(weights_[l].rows(), weights_[l].cols()));
    g.biases.push_back(Vector::Zero(biases_[l].size()));
  }
  return g;
}

}  // namespace gpe

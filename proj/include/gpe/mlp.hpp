#pragma once

#include <vector>

#include "gpe/rng.hpp"
#include "gpe/types.hpp"

namespace gpe {

/// Parameter-shaped gradient (or step) for an MlpMap.
struct MlpGradient {
  std::vector<Eigen::MatrixXd> weights;
  std::vector<Vector> biases;

  double squared_norm() const;
};

/// Feed-forward map with leaky-rectifier hidden layers and a linear output
/// layer. Weights of layer l have shape widths[l+1] x widths[l].
///
/// A positive slope keeps every layer injective when the weight matrices have
/// full column rank, so the slope is required to be > 0.
class MlpMap {
 public:
  /// Stored activations of one batched forward pass (one column per sample).
  struct Tape {
    std::vector<Eigen::MatrixXd> pre;   // pre-activations per layer
    std::vector<Eigen::MatrixXd> post;  // post[0] is the input batch
  };

  MlpMap() = default;
  /// Seeded uniform initialization in [-1/sqrt(fan_in), 1/sqrt(fan_in)] for
  /// weights and biases.
  MlpMap(std::vector<int> widths, double slope, RngSeed seed);
  MlpMap(std::vector<int> widths, double slope, std::vector<Eigen::MatrixXd> weights,
         std::vector<Vector> biases);

  const std::vector<int>& widths() const { return widths_; }
  double slope() const { return slope_; }
  int input_dim() const { return widths_.front(); }
  int output_dim() const { return widths_.back(); }
  std::size_t layer_count() const { return weights_.size(); }
  const std::vector<Eigen::MatrixXd>& weights() const { return weights_; }
  const std::vector<Vector>& biases() const { return biases_; }
  std::vector<Vector>& mutable_biases() { return biases_; }
  std::vector<Eigen::MatrixXd>& mutable_weights() { return weights_; }

  /// Maps each row of `inputs` (n x input_dim) to a row of the result.
  RowMatrix forward(const RowMatrix& inputs) const;
  RowMatrix forward(const RowMatrix& inputs, Tape& tape) const;
  Vector operator()(const Vector& x) const;

  /// Reverse-mode pass. `output_grad` is dLoss/dOutput (n x output_dim).
  /// When `input_grad` is non-null it receives dLoss/dInput (n x input_dim).
  MlpGradient backward(const Tape& tape, const RowMatrix& output_grad,
                       RowMatrix* input_grad = nullptr) const;

  /// params -= step * grad.
  void apply_step(const MlpGradient& grad, double step);
  MlpGradient zero_gradient() const;
  bool all_finite() const;

 private:
  void validate() const;

  std::vector<int> widths_;
  double slope_ = 0.2;
  std::vector<Eigen::MatrixXd> weights_;
  std::vector<Vector> biases_;
};

}  // namespace gpe

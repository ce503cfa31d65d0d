#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "gpe/gme.hpp"
#include "gpe/mlp.hpp"

namespace gpe {

/// Empirical bi-Lipschitz constants of a table against its source points.
/// Ratios r = |y_i - y_j| / |x_i - x_j| are taken over pairs with
/// |x_i - x_j|^2 >= kBilipPairFloor; alpha_hat = max(ratio_max, 1 / ratio_min).
struct BilipEstimate {
  double alpha_hat = 1.0;
  double beta_hat = 1.0;
  double ratio_min = 1.0;
  double ratio_max = 1.0;
  std::size_t pairs = 0;
};

inline constexpr double kBilipPairFloor = 1e-12;

BilipEstimate estimate_bilip(const PairwiseSqDists& source, const PairwiseSqDists& image);
BilipEstimate estimate_bilip(const PointCloud& source, const EmbeddingTable& embedding);
BilipEstimate estimate_bilip(const RowMatrix& source, const RowMatrix& image);

/// 1 / (8 (4 ln beta + 1)); the step for which the Hessian ceiling of the GME
/// cost guarantees descent. Requires beta >= 1.
double corollary_step_size(double beta);

/// L = 8 (4 ln beta + 1), the Hessian ceiling the step size inverts.
double hessian_ceiling(double beta);

enum class EncoderMode { Table, Mlp };
enum class TrainStatus { TolReached, MaxIters, Diverged };

std::string to_string(EncoderMode mode);
std::string to_string(TrainStatus status);
EncoderMode encoder_mode_from_string(const std::string& name);

struct TrainConfig {
  EncoderMode mode = EncoderMode::Table;
  /// Fixed step size; empty means "auto" (corollary step from the current beta_hat).
  std::optional<double> step_size;
  int max_iters = 1000;
  double tol = 0.0;
  RngSeed seed{0};
  std::vector<int> hidden{32, 32};
  double slope = 0.2;
  int auto_period = 50;
  int divergence_window = 100;

  void validate() const;
};

struct TraceRecord {
  int iteration = 0;
  double cost = 0.0;
  double grad_norm_sq = 0.0;
  /// Step applied to move from this iterate to the next; 0 on the final record.
  double step = 0.0;
};

struct TrainTrace {
  std::vector<TraceRecord> records;
  TrainStatus status = TrainStatus::MaxIters;
  /// Largest beta_hat evaluated during the run (auto step / fixed-step checks).
  double beta_max = 1.0;

  double final_cost() const { return records.empty() ? 0.0 : records.back().cost; }
};

struct EncoderResult {
  EmbeddingTable codes;        // T(x_i) at the final iterate
  std::optional<MlpMap> mlp;   // set in mlp mode
  TrainTrace trace;
};

/// Top-d principal-direction projection of the centered cloud. Each direction
/// is signed so that its largest-magnitude entry is positive.
RowMatrix pca_projection(const PointCloud& cloud, int d);

/// Gradient descent on the discrete GME cost.
///
/// Table mode descends along the L2(mu_n) gradient, which is n times the
/// entrywise gradient, and reports its squared L2(mu_n) norm. Mlp mode descends
/// along the parameter gradient obtained by back-propagating the table
/// gradient through the network; its returned outputs are centered with
/// center_mlp_output.
EncoderResult train_encoder(const PointCloud& source, int d, const TrainConfig& config);

/// Shifts the output bias of `map` so that `codes` (its outputs on the
/// training points) have zero mean, and shifts `codes` to match. The GME cost
/// only sees code differences, so the trained encoder drifts freely in mean;
/// centering keeps downstream decoders well scaled.
void center_mlp_output(MlpMap& map, RowMatrix& codes);

/// Optional per-iteration callback: (iteration, current codes). Used to
/// snapshot encoders at several tolerances within one run.
using EncoderObserver = std::function<void(int, const EmbeddingTable&, const std::optional<MlpMap>&)>;
EncoderResult train_encoder(const PointCloud& source, int d, const TrainConfig& config,
                            const EncoderObserver& observer);

/// Telescoped descent-lemma check on a finished trace:
/// sum_k |grad_k|^2 <= 2 L (C^0 - C^K), L = 8 (4 ln beta_max + 1), summed over
/// records that took a step, plus per-step monotonicity with 1e-12 slack.
struct DescentCheck {
  double grad_sum = 0.0;
  double bound = 0.0;
  bool telescoping_holds = true;
  bool monotone = true;
  double max_increase = 0.0;
};

DescentCheck check_descent(const TrainTrace& trace);

struct DecoderResult {
  MlpMap decoder;
  TrainTrace trace;
};

/// Fits an MlpMap R^d -> R^D minimizing (1/n) sum |S(y_i) - x_i|^2 by full-batch
/// gradient descent with a fixed step. `config.hidden` sets the hidden widths.
DecoderResult train_decoder(const PointCloud& source, const EmbeddingTable& codes,
                            const TrainConfig& config);
/// Same, continuing from an existing decoder.
DecoderResult train_decoder(const PointCloud& source, const EmbeddingTable& codes,
                            const TrainConfig& config, MlpMap initial);

/// (1/n) sum |S(y_i) - x_i|^p, p >= 1.
double reconstruction_loss(const PointCloud& source, const EmbeddingTable& codes,
                           const MlpMap& decoder, double p);

}  // namespace gpe

#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/SparseCore>

#include "hin/graph.hpp"
#include "hin/rng.hpp"

namespace hin {

struct WorkerConfig {
  std::size_t dim = 32;
  std::size_t layers = 1;
  std::size_t epochs = 100;
  double lr = 0.01;
  double corruption_rate = 0.1;
  std::size_t patience = 20;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Encoder and discriminator parameters, owned by exactly one worker.
struct WorkerParams {
  std::vector<Eigen::MatrixXd> weights;  // d0 x d, then d x d
  std::vector<double> slopes;            // PReLU slope per encoder layer
  Eigen::MatrixXd disc_weight;           // 2d x d, rows [0,d) act on z, [d,2d) on s
  Eigen::RowVectorXd disc_bias;          // 1 x d
  Eigen::RowVectorXd projection;         // 1 x d
  double disc_slope = 0.25;

  /// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights, zero bias, slopes 0.25.
  static WorkerParams init(std::size_t input_dim, const WorkerConfig& cfg, Rng& rng);
  /// Same shapes as `like`, every entry zero.
  static WorkerParams zeros_like(const WorkerParams& like);

  std::size_t dim() const { return static_cast<std::size_t>(projection.size()); }

  /// Flat view used by optimizers and gradient checks. Order: weights (column
  /// major), slopes, disc_weight, disc_bias, projection, disc_slope.
  Eigen::VectorXd flatten() const;
  void assign(const Eigen::VectorXd& flat);
};

struct EmbeddingMatrix {
  PartitionId partition_id = 0;
  std::vector<NodeId> node_ids;
  Eigen::MatrixXd z;  // row i belongs to node_ids[i]
};

using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;

/// D^{-1/2} A D^{-1/2} for a pattern that already carries self-loops.
SparseMatrix normalized_adjacency(const SparsePattern& a);

double prelu(double x, double slope);

/// Stacked GCN layers Z <- PReLU(Â Z W). Throws ShapeMismatch or NonFinite.
Eigen::MatrixXd gcn_forward(const Eigen::MatrixXd& x, const SparsePattern& a,
                            const WorkerParams& params);

/// Logistic sigmoid of the column mean.
Eigen::RowVectorXd readout(const Eigen::MatrixXd& z);

/// sigmoid(PReLU([z, s] W_D + b) . w)
double discriminator(const Eigen::RowVectorXd& z, const Eigen::RowVectorXd& s,
                     const WorkerParams& params);

struct CorruptedGraph {
  SparsePattern adjacency;
  Eigen::MatrixXd features;
  std::vector<std::size_t> kept;  // original local rows that survived
};

/// Deletes ceil(rate * |E|) random off-diagonal edges and inserts as many
/// random pairs absent from `a` (clamped to what exists), then drops nodes
/// left with only their self-loop.
CorruptedGraph corrupt(const SparsePattern& a, const Eigen::MatrixXd& x, double rate, Rng& rng);

inline constexpr double kScoreEpsilon = 1e-7;

/// -(sum log p + sum log(1 - n)) / (|pos| + |neg|), scores clamped to
/// [kScoreEpsilon, 1 - kScoreEpsilon].
double dgi_loss(std::span<const double> pos_scores, std::span<const double> neg_scores);

struct LossAndGradient {
  double loss = 0.0;
  WorkerParams gradient;
};

/// Loss of one positive/corrupted pair and its exact gradient.
LossAndGradient dgi_loss_and_gradient(const Eigen::MatrixXd& x, const SparsePattern& a,
                                      const CorruptedGraph& negative, const WorkerParams& params);

double dgi_objective(const Eigen::MatrixXd& x, const SparsePattern& a,
                     const CorruptedGraph& negative, const WorkerParams& params);

struct TrainTrace {
  std::vector<double> losses;
  bool early_stopped = false;
};

/// Full-batch gradient descent with a fresh corruption each epoch. Stops early
/// once the loss has not improved by 1e-4 for cfg.patience epochs. The RNG
/// stream is seeded from cfg.seed xor p.id. Throws NonFiniteLoss.
EmbeddingMatrix train_worker(const Partition& p, const WorkerConfig& cfg,
                             TrainTrace* trace = nullptr);

void write_loss_trace(const TrainTrace& trace, const std::filesystem::path& path);

}  // namespace hin

#pragma once

#include <map>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "hin/graph.hpp"
#include "hin/infomax.hpp"

namespace hin {

enum class FitStatus {
  Fitted,
  SingleAnchor,      // identity rotation, unit scale, t = g - z
  DegenerateSource,  // zero-variance source or target; translation only
  NoAnchors,         // identity map, partition left in its own space
};

const char* to_string(FitStatus status);

/// x -> scale * x * rotation + translation, applied to row vectors.
struct AlignmentMap {
  Eigen::MatrixXd rotation;
  double scale = 1.0;
  Eigen::RowVectorXd translation;
  PartitionId source_partition = 0;
  std::size_t anchor_count = 0;
  FitStatus status = FitStatus::Fitted;

  static AlignmentMap identity(std::size_t dim);
};

struct AnchorPair {
  NodeId node_id = 0;
  Eigen::RowVectorXd z_hat;  // partition space
  Eigen::RowVectorXd g_hat;  // anchor space
};

/// Closed-form least-squares rotation + isotropic scale + translation taking
/// the rows of `source` onto the rows of `target`:
///   centre both, S = Zc^T Gc = U Σ V^T, T = U V^T, c = tr Σ / tr(Zc^T Zc),
///   t = mean(G) - c mean(Z) T.
/// Reflections are allowed. Throws TooFewAnchors for zero rows and
/// ShapeMismatch when the shapes differ.
AlignmentMap fit_procrustes(const Eigen::MatrixXd& source, const Eigen::MatrixXd& target);
AlignmentMap fit_procrustes(std::span<const AnchorPair> pairs);

/// Frobenius norm of scale * source * T + j^T t - target.
double alignment_residual(const Eigen::MatrixXd& source, const Eigen::MatrixXd& target,
                          const AlignmentMap& map);

Eigen::MatrixXd apply_map(const Eigen::MatrixXd& z, const AlignmentMap& map);

using NodeEmbeddings = std::map<NodeId, Eigen::RowVectorXd>;

/// Mean of each node's context vectors. Throws EmptyContextList.
NodeEmbeddings aggregate_contexts(const std::map<NodeId, std::vector<Eigen::RowVectorXd>>& contexts);

enum class AlignMode { Procrustes, Identity };

struct PartitionAlignment {
  AlignmentMap map;
  double residual = 0.0;
};

struct AlignmentReport {
  std::vector<PartitionAlignment> partitions;
  std::vector<PartitionId> flagged;  // partitions that fell back to a non-fitted map
};

/// Fits one map per partition from the nodes it shares with the anchor
/// network, maps every row, and averages each node's aligned contexts. Nodes
/// only present in the anchor network keep their anchor-space vector.
/// AlignMode::Identity skips fitting (every partition keeps its own space).
NodeEmbeddings align_all(std::span<const EmbeddingMatrix> partitions,
                         const EmbeddingMatrix* anchor, AlignMode mode = AlignMode::Procrustes,
                         AlignmentReport* report = nullptr, std::size_t executors = 1);

}  // namespace hin

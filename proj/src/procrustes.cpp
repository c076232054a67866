#include "hin/procrustes.hpp"

#include <algorithm>
#include <iostream>

#include "hin/error.hpp"
#include "hin/linalg.hpp"
#include "hin/parallel.hpp"

namespace hin {

const char* to_string(FitStatus status) {
  switch (status) {
    case FitStatus::Fitted: return "fitted";
    case FitStatus::SingleAnchor: return "single_anchor";
    case FitStatus::DegenerateSource: return "degenerate";
    case FitStatus::NoAnchors: return "no_anchors";
  }
  return "unknown";
}

AlignmentMap AlignmentMap::identity(std::size_t dim) {
  AlignmentMap m;
  const auto d = static_cast<Eigen::Index>(dim);
  m.rotation = Eigen::MatrixXd::Identity(d, d);
  m.scale = 1.0;
  m.translation = Eigen::RowVectorXd::Zero(d);
  return m;
}

AlignmentMap fit_procrustes(const Eigen::MatrixXd& source, const Eigen::MatrixXd& target) {
  if (source.rows() != target.rows() || source.cols() != target.cols())
    throw Error(ErrorKind::ShapeMismatch, "anchor matrices differ in shape");
  if (source.rows() == 0) throw Error(ErrorKind::TooFewAnchors, "no anchor pairs");
  if (!source.allFinite() || !target.allFinite())
    throw Error(ErrorKind::NonFinite, "anchor embeddings contain non-finite values");

  const auto d = static_cast<std::size_t>(source.cols());
  AlignmentMap map = AlignmentMap::identity(d);
  map.anchor_count = static_cast<std::size_t>(source.rows());

  const Eigen::RowVectorXd source_mean = source.colwise().mean();
  const Eigen::RowVectorXd target_mean = target.colwise().mean();
  if (source.rows() == 1) {
    map.translation = target_mean - source_mean;
    map.status = FitStatus::SingleAnchor;
    return map;
  }

  const Eigen::MatrixXd zc = source.rowwise() - source_mean;
  const Eigen::MatrixXd gc = target.rowwise() - target_mean;
  const double source_var = zc.squaredNorm();
  const double target_var = gc.squaredNorm();
  const double floor = 1e-24 * std::max(1.0, std::max(source.squaredNorm(), target.squaredNorm()));
  if (source_var <= floor || target_var <= floor) {
    map.translation = target_mean - source_mean;
    map.status = FitStatus::DegenerateSource;
    return map;
  }

  const Eigen::MatrixXd cross = zc.transpose() * gc;
  const auto svd = jacobi_svd(cross);
  map.rotation = svd.u * svd.v.transpose();
  map.scale = svd.singular.sum() / source_var;
  map.translation = target_mean - map.scale * source_mean * map.rotation;
  return map;
}

AlignmentMap fit_procrustes(std::span<const AnchorPair> pairs) {
  if (pairs.empty()) throw Error(ErrorKind::TooFewAnchors, "no anchor pairs");
  const auto d = pairs.front().z_hat.size();
  Eigen::MatrixXd source(static_cast<Eigen::Index>(pairs.size()), d);
  Eigen::MatrixXd target(static_cast<Eigen::Index>(pairs.size()), d);
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    if (pairs[i].z_hat.size() != d || pairs[i].g_hat.size() != d)
      throw Error(ErrorKind::ShapeMismatch, "anchor pair width");
    source.row(static_cast<Eigen::Index>(i)) = pairs[i].z_hat;
    target.row(static_cast<Eigen::Index>(i)) = pairs[i].g_hat;
  }
  return fit_procrustes(source, target);
}

double alignment_residual(const Eigen::MatrixXd& source, const Eigen::MatrixXd& target,
                          const AlignmentMap& map) {
  return (apply_map(source, map) - target).norm();
}

Eigen::MatrixXd apply_map(const Eigen::MatrixXd& z, const AlignmentMap& map) {
  if (z.cols() != map.rotation.rows() || map.translation.size() != map.rotation.cols())
    throw Error(ErrorKind::ShapeMismatch, "embedding width " + std::to_string(z.cols()) +
                                              " vs map width " + std::to_string(map.rotation.rows()));
  Eigen::MatrixXd out = map.scale * (z * map.rotation);
  out.rowwise() += map.translation;
  return out;
}

NodeEmbeddings aggregate_contexts(
    const std::map<NodeId, std::vector<Eigen::RowVectorXd>>& contexts) {
  NodeEmbeddings out;
  for (const auto& [node, vectors] : contexts) {
    if (vectors.empty()) throw Error(ErrorKind::EmptyContextList, "node " + std::to_string(node));
    Eigen::RowVectorXd sum = vectors.front();
    for (std::size_t i = 1; i < vectors.size(); ++i) sum += vectors[i];
    out.emplace(node, sum / static_cast<double>(vectors.size()));
  }
  return out;
}

NodeEmbeddings align_all(std::span<const EmbeddingMatrix> partitions, const EmbeddingMatrix* anchor,
                         AlignMode mode, AlignmentReport* report, std::size_t executors) {
  std::vector<PartitionAlignment> fitted(partitions.size());
  std::vector<Eigen::MatrixXd> aligned(partitions.size());

  parallel_for(partitions.size(), executors, [&](std::size_t pi) {
    const auto& part = partitions[pi];
    const auto d = static_cast<std::size_t>(part.z.cols());
    PartitionAlignment result{AlignmentMap::identity(d), 0.0};
    result.map.source_partition = part.partition_id;

    if (mode == AlignMode::Identity || anchor == nullptr) {
      result.map.status = FitStatus::NoAnchors;
      aligned[pi] = part.z;
      fitted[pi] = std::move(result);
      return;
    }

    std::vector<Eigen::Index> source_rows, target_rows;
    std::size_t i = 0, j = 0;
    while (i < part.node_ids.size() && j < anchor->node_ids.size()) {
      if (part.node_ids[i] < anchor->node_ids[j]) {
        ++i;
      } else if (anchor->node_ids[j] < part.node_ids[i]) {
        ++j;
      } else {
        source_rows.push_back(static_cast<Eigen::Index>(i++));
        target_rows.push_back(static_cast<Eigen::Index>(j++));
      }
    }
    if (source_rows.empty()) {
      result.map.status = FitStatus::NoAnchors;
      aligned[pi] = part.z;
      fitted[pi] = std::move(result);
      return;
    }
    const Eigen::MatrixXd source = part.z(source_rows, Eigen::all);
    const Eigen::MatrixXd target = anchor->z(target_rows, Eigen::all);
    result.map = fit_procrustes(source, target);
    result.map.source_partition = part.partition_id;
    result.residual = alignment_residual(source, target, result.map);
    aligned[pi] = apply_map(part.z, result.map);
    fitted[pi] = std::move(result);
  });

  std::map<NodeId, std::vector<Eigen::RowVectorXd>> contexts;
  for (std::size_t pi = 0; pi < partitions.size(); ++pi)
    for (std::size_t r = 0; r < partitions[pi].node_ids.size(); ++r)
      contexts[partitions[pi].node_ids[r]].push_back(aligned[pi].row(static_cast<Eigen::Index>(r)));
  NodeEmbeddings out = aggregate_contexts(contexts);
  if (anchor != nullptr && mode == AlignMode::Procrustes) {
    for (std::size_t r = 0; r < anchor->node_ids.size(); ++r)
      out.try_emplace(anchor->node_ids[r], anchor->z.row(static_cast<Eigen::Index>(r)));
  }

  std::vector<PartitionId> flagged;
  for (const auto& f : fitted) {
    if (f.map.status == FitStatus::Fitted) continue;
    flagged.push_back(f.map.source_partition);
    if (mode == AlignMode::Procrustes && anchor != nullptr)
      std::cerr << "warning: partition " << f.map.source_partition << " aligned with "
                << to_string(f.map.status) << " fallback\n";
  }
  if (report) {
    report->partitions = std::move(fitted);
    report->flagged = std::move(flagged);
  }
  return out;
}

}  // namespace hin

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "hin/graph.hpp"
#include "hin/hypergraph.hpp"

namespace hin {

/// Node-count limits for contracted hyperedges. Desk-scale defaults; the
/// large-graph preset is 10,000 / 40,000.
struct PartitionBounds {
  std::size_t lower = 200;
  std::size_t upper = 800;

  static PartitionBounds large_graph() { return {10000, 40000}; }
  void validate() const;
};

/// Active hyperedge of `target` sharing the most nodes with h. Ties go to the
/// smaller hyperedge, then the smaller id. nullopt when nothing overlaps.
std::optional<HyperedgeId> score_and_match(const Hyperedge& h, const Bucket& target);

/// Contracts b1 into b2. b1's active hyperedges are visited in ascending size
/// order and merged into their best b2 match when the union stays within
/// bounds.upper; otherwise they pass through. Hyperedges already above the
/// upper bound are deactivated. Only b2-side hyperedges (including ones grown
/// by earlier merges) are merge candidates. Result id = min of input ids.
Bucket contract_buckets(const Bucket& b1, const Bucket& b2, const PartitionBounds& bounds);

/// Pairwise tree reduction: each round pairs buckets in ascending id order
/// (an odd last bucket passes through) and contracts every pair concurrently.
/// `round_sizes` receives the bucket count before the first round and after
/// every round.
Bucket contract_all(std::vector<Bucket> buckets, const PartitionBounds& bounds,
                    std::size_t executors = 1, std::vector<std::size_t>* round_sizes = nullptr);

/// Shuffles hyperedges smaller than bounds.lower with `seed` and greedily packs
/// them: a group closes once it reaches bounds.lower, or when the next
/// hyperedge would push it past bounds.upper. Larger hyperedges are returned
/// unchanged. Output is ordered by id (a packed group keeps its smallest id).
std::vector<Hyperedge> pack_small_hyperedges(std::vector<Hyperedge> hyperedges,
                                             const PartitionBounds& bounds, std::uint64_t seed);

struct PartitionResult {
  std::vector<Partition> partitions;
  std::vector<Hyperedge> groups;  // node set behind partitions[i], before isolates are added
  std::vector<NodeId> isolated;   // appended to the smallest partition
  std::vector<std::size_t> round_sizes;
};

/// Full partition stage. Throws NoBuckets when `buckets` is empty and the
/// graph has no isolated nodes to place.
PartitionResult partition(const HinGraph& g, std::vector<Bucket> buckets,
                          const PartitionBounds& bounds, std::uint64_t seed,
                          std::size_t executors = 1,
                          std::size_t fallback_dim = kDefaultFallbackFeatureDim);

struct AnchorNetwork {
  Partition partition;                 // induced over node_ids
  std::vector<NodeId> anchors;         // selected top-k nodes, ascending
  std::size_t k = 0;
  /// membership[i] lists the partitions containing partition.node_ids[i].
  std::vector<std::vector<PartitionId>> membership;

  const std::vector<NodeId>& node_ids() const { return partition.node_ids; }
};

/// Picks, per partition, the nodes shared with another partition or adjacent
/// to one, ranked by their count of neighbours outside the partition. k is the
/// largest per-partition quota keeping anchors plus their first-order
/// neighbourhoods within bounds.upper (never below 1). Throws
/// NoCrossPartitionNodes when no partition has such a node.
AnchorNetwork extract_anchor_network(const HinGraph& g, std::span<const Partition> partitions,
                                     const PartitionBounds& bounds, PartitionId anchor_id,
                                     std::size_t fallback_dim = kDefaultFallbackFeatureDim);

/// Percentage of first-order neighbours lost to partitioning:
///   100 * sum_{P, v in P, r} (|N_r(v)| - |N_r(v) ∩ P|) / (sum_{v, r} |N_r(v)| - |V|).
/// Throws DegenerateDenominator when the denominator is not positive.
double avg_neighborhood_loss(const HinGraph& g, std::span<const Partition> partitions,
                             std::size_t executors = 1);

/// `partition_id<TAB>node_count<TAB>origin_relations<TAB>node_ids` with
/// comma-joined names; "-" marks an empty relation list.
void write_partition_manifest(const HinGraph& g, std::span<const Partition> partitions,
                              const std::filesystem::path& path);

std::vector<Partition> read_partition_manifest(const HinGraph& g, const std::filesystem::path& path,
                                               std::size_t fallback_dim = kDefaultFallbackFeatureDim);

}  // namespace hin

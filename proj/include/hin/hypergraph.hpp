#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <span>
#include <unordered_map>
#include <utility>
#include <vector>

#include "hin/graph.hpp"

namespace hin {

using HyperedgeId = std::uint32_t;
using BucketId = std::uint32_t;

struct Hyperedge {
  HyperedgeId id = 0;
  std::vector<RelationId> relation_tags;  // ascending
  std::vector<NodeId> node_ids;           // ascending, non-empty
  bool active = true;

  std::size_t size() const { return node_ids.size(); }
};

/// Size-ordered hyperedge container with a node -> hyperedge inverse index.
/// Ordering is (size, id) ascending; insert, erase and merge are O(log n)
/// in the hyperedge count plus the touched node count.
class Bucket {
 public:
  explicit Bucket(BucketId id = 0) : id_(id) {}

  BucketId id() const { return id_; }
  std::size_t size() const { return store_.size(); }
  bool empty() const { return store_.empty(); }

  void insert(Hyperedge h);
  Hyperedge erase(HyperedgeId id);
  const Hyperedge* find(HyperedgeId id) const;

  /// Unions `incoming` into the stored hyperedge `target`. The survivor takes
  /// id min(target, incoming.id); the index is patched only for nodes whose
  /// membership changed. Returns the surviving id.
  HyperedgeId merge_into(HyperedgeId target, const Hyperedge& incoming);

  void set_active(HyperedgeId id, bool active);

  /// Hyperedge ids containing v, ascending; empty span when v is unindexed.
  std::span<const HyperedgeId> hyperedges_of(NodeId v) const;

  /// Hyperedges in (size, id) order.
  std::vector<const Hyperedge*> ordered() const;

  /// True when the index is exactly the inverse incidence and the ordering
  /// set mirrors the store.
  bool is_consistent() const;

 private:
  void index_add(NodeId v, HyperedgeId id);
  void index_remove(NodeId v, HyperedgeId id);

  BucketId id_;
  std::map<HyperedgeId, Hyperedge> store_;
  std::set<std::pair<std::size_t, HyperedgeId>> order_;
  std::unordered_map<NodeId, std::vector<HyperedgeId>> node_index_;
};

/// Components of an undirected edge list, each sorted ascending; the list is
/// ordered by size descending, then smallest member ascending.
std::vector<std::vector<NodeId>> connected_components(
    std::span<const std::pair<NodeId, NodeId>> edges);

/// One bucket per relation that has edges; bucket id = relation id. Relations
/// are processed concurrently on up to `executors` threads; hyperedge ids are
/// assigned afterwards in relation-major, component order.
std::vector<Bucket> generate_hyperedges(const HinGraph& g, std::size_t executors = 1);

/// Nodes with no edge in any relation.
std::vector<NodeId> isolated_nodes(const HinGraph& g);

struct BucketStats {
  std::size_t count = 0;
  std::size_t largest = 0;
  double mean = 0.0;
};

BucketStats bucket_stats(std::span<const Bucket> buckets);

void write_hyperedge_dump(const HinGraph& g, std::span<const Bucket> buckets,
                          const std::filesystem::path& path);

}  // namespace hin

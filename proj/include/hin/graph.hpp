#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

namespace hin {

using NodeId = std::uint32_t;
using RelationId = std::uint32_t;
using NodeTypeId = std::uint32_t;
using LabelId = std::uint32_t;
using PartitionId = std::uint32_t;

struct Edge {
  NodeId src;
  NodeId dst;
  RelationId rel;

  friend bool operator==(const Edge&, const Edge&) = default;
};

/// One entry of a node's undirected incidence list.
struct Incidence {
  NodeId neighbor;
  RelationId rel;
};

/// Typed, multi-relational graph. Immutable once built; safe to share across
/// threads. Node, type, relation and label names are interned to dense ids in
/// first-appearance order.
class HinGraph {
 public:
  HinGraph() = default;

  std::size_t node_count() const { return node_names_.size(); }
  std::size_t edge_count() const { return edges_.size(); }
  std::size_t relation_count() const { return relation_names_.size(); }
  std::size_t node_type_count() const { return type_names_.size(); }
  std::size_t label_count() const { return label_names_.size(); }

  const std::vector<Edge>& edges() const { return edges_; }

  const std::string& node_name(NodeId v) const { return node_names_.at(v); }
  NodeTypeId node_type(NodeId v) const { return node_types_.at(v); }
  const std::string& node_type_name(NodeTypeId t) const { return type_names_.at(t); }
  const std::string& relation_name(RelationId r) const { return relation_names_.at(r); }
  const std::string& label_name(LabelId l) const { return label_names_.at(l); }
  std::optional<NodeId> find_node(std::string_view name) const;
  std::optional<RelationId> find_relation(std::string_view name) const;

  bool has_features() const { return feature_dim_ > 0; }
  std::size_t feature_dim() const { return feature_dim_; }
  std::span<const double> features(NodeId v) const;

  bool has_labels() const { return !label_names_.empty(); }
  /// Sorted label ids of v; empty when v is unlabeled.
  std::span<const LabelId> labels(NodeId v) const;

  /// Undirected incidence of v sorted by (neighbor, relation). Self-loop edges
  /// are kept in edges() but never appear here.
  std::span<const Incidence> incident(NodeId v) const;

  /// Number of distinct neighbors over all relations.
  std::size_t degree(NodeId v) const;

  /// Same nodes, types, features and labels; edge set replaced.
  HinGraph with_edges(std::vector<Edge> edges) const;

 private:
  friend class HinBuilder;
  void finalize();

  std::vector<std::string> node_names_;
  std::vector<NodeTypeId> node_types_;
  std::vector<std::string> type_names_;
  std::vector<std::string> relation_names_;
  std::vector<std::string> label_names_;
  std::unordered_map<std::string, NodeId> node_lookup_;
  std::unordered_map<std::string, RelationId> relation_lookup_;
  std::vector<Edge> edges_;
  std::size_t feature_dim_ = 0;
  std::vector<double> features_;
  std::vector<std::vector<LabelId>> labels_;
  std::vector<std::size_t> inc_offsets_;
  std::vector<Incidence> incidence_;
};

/// Incremental constructor for HinGraph. Duplicate undirected (u, v, rel)
/// triples are dropped, keeping the first orientation seen.
class HinBuilder {
 public:
  NodeId add_node(std::string_view name, std::string_view type);
  RelationId add_relation(std::string_view name);
  /// Returns false when the edge duplicates an existing one.
  bool add_edge(NodeId src, NodeId dst, RelationId rel);
  bool add_edge(std::string_view src, std::string_view src_type, std::string_view rel,
                std::string_view dst, std::string_view dst_type);
  void set_features(NodeId v, std::span<const double> values);
  void add_label(NodeId v, std::string_view label);

  std::optional<NodeId> find_node(std::string_view name) const;
  std::size_t node_count() const { return g_.node_names_.size(); }

  /// Throws EmptyGraph when no node was added.
  HinGraph build();

 private:
  HinGraph g_;
  std::unordered_map<std::string, NodeTypeId> type_lookup_;
  std::unordered_map<std::string, LabelId> label_lookup_;
  std::unordered_map<std::uint64_t, std::vector<RelationId>> seen_pairs_;
  std::vector<std::vector<double>> pending_features_;
};

/// Reads the TSV formats documented in the README. Throws Error with kinds
/// MalformedLine, DanglingFeature, DanglingLabel, EmptyGraph or Io.
HinGraph load_hin(const std::filesystem::path& edge_path,
                  const std::optional<std::filesystem::path>& feature_path = std::nullopt,
                  const std::optional<std::filesystem::path>& label_path = std::nullopt);

void save_edges(const HinGraph& g, const std::filesystem::path& path);
void save_features(const HinGraph& g, const std::filesystem::path& path);
void save_labels(const HinGraph& g, const std::filesystem::path& path);

std::vector<std::pair<NodeId, NodeId>> relation_subgraph(const HinGraph& g, RelationId r);

struct NeighborhoodSet {
  NodeId node;
  RelationId relation;
  std::vector<NodeId> neighbors;  // ascending, never contains node
};

NeighborhoodSet neighborhood(const HinGraph& g, NodeId v, RelationId r);

/// Symmetric 0/1 sparsity pattern in CSR form, columns sorted per row.
struct SparsePattern {
  std::size_t rows = 0;
  std::vector<std::size_t> row_ptr;
  std::vector<std::uint32_t> cols;

  std::size_t nnz() const { return cols.size(); }
  bool contains(std::size_t i, std::size_t j) const;
};

struct Partition {
  PartitionId id = 0;
  std::vector<NodeId> node_ids;  // ascending; position is the local index
  SparsePattern adjacency;       // self-loops on every row
  Eigen::MatrixXd features;      // node_ids.size() x d0
  std::vector<RelationId> origin_relations;

  std::size_t size() const { return node_ids.size(); }
  std::optional<std::size_t> local_index(NodeId v) const;
};

inline constexpr std::size_t kDefaultFallbackFeatureDim = 64;

/// Induces the subnetwork on node_ids over every relation. Without input
/// features, row i is the one-hot vector e_(i mod fallback_dim).
Partition induce_partition(const HinGraph& g, std::span<const NodeId> node_ids, PartitionId id,
                           std::size_t fallback_dim = kDefaultFallbackFeatureDim);

}  // namespace hin

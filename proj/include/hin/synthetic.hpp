#pragma once

#include <cstdint>
#include <vector>

#include "hin/graph.hpp"

namespace hin {

/// Community-structured HIN. Every relation splits the nodes into random
/// groups of `group_size`; each node draws `edges_per_node` partners inside its
/// group, from its own community with probability `intra`. Features are a
/// noisy community centroid, labels name the community ("c0", "c1", ...).
struct PlantedSpec {
  std::size_t nodes = 600;
  std::size_t communities = 6;
  std::size_t relations = 4;
  std::size_t group_size = 200;
  std::size_t edges_per_node = 3;
  double intra = 0.8;
  std::size_t feature_dim = 16;
  double feature_noise = 3.0;
  std::uint64_t seed = 1;
};

HinGraph planted_hin(const PlantedSpec& spec);

/// Community of node v in planted_hin (contiguous blocks).
std::size_t planted_community(const PlantedSpec& spec, NodeId v);

/// Uniform random multi-relational graph with `edges` draws per relation and
/// no features or labels. Duplicates and self-pairs are skipped, so relations
/// can end up with fewer edges.
HinGraph random_hin(std::size_t nodes, std::size_t relations, std::size_t edges, std::uint64_t seed);

/// Every relation is a disjoint union of `cliques` cliques of `clique_size`
/// nodes drawn from a per-relation shuffle of all nodes.
HinGraph clique_hin(std::size_t relations, std::size_t cliques, std::size_t clique_size,
                    std::uint64_t seed);

}  // namespace hin

#include "hin/synthetic.hpp"

#include <algorithm>
#include <numeric>
#include <string>

#include "hin/error.hpp"
#include "hin/rng.hpp"

namespace hin {

namespace {

std::vector<NodeId> add_nodes(HinBuilder& b, std::size_t n) {
  std::vector<NodeId> ids(n);
  for (std::size_t i = 0; i < n; ++i)
    ids[i] = b.add_node("n" + std::to_string(i), i % 2 == 0 ? "a" : "b");
  return ids;
}

}  // namespace

std::size_t planted_community(const PlantedSpec& spec, NodeId v) {
  const std::size_t block = (spec.nodes + spec.communities - 1) / spec.communities;
  return v / block;
}

HinGraph planted_hin(const PlantedSpec& spec) {
  if (spec.nodes == 0 || spec.communities == 0 || spec.group_size == 0)
    throw Error(ErrorKind::InvalidConfig, "planted HIN needs nodes, communities and groups");
  Rng rng(spec.seed);
  HinBuilder b;
  const auto ids = add_nodes(b, spec.nodes);

  std::vector<std::vector<double>> centroids(spec.communities, std::vector<double>(spec.feature_dim));
  for (auto& c : centroids)
    for (auto& x : c) x = rng.normal();
  for (std::size_t v = 0; v < spec.nodes; ++v) {
    const auto c = planted_community(spec, ids[v]);
    std::vector<double> row(spec.feature_dim);
    for (std::size_t k = 0; k < spec.feature_dim; ++k)
      row[k] = centroids[c][k] + spec.feature_noise * rng.normal();
    if (spec.feature_dim > 0) b.set_features(ids[v], row);
    b.add_label(ids[v], "c" + std::to_string(c));
  }

  std::vector<NodeId> order(ids);
  for (std::size_t r = 0; r < spec.relations; ++r) {
    const auto rel = b.add_relation("r" + std::to_string(r));
    rng.shuffle(std::span<NodeId>(order));
    for (std::size_t start = 0; start < order.size(); start += spec.group_size) {
      const std::size_t stop = std::min(order.size(), start + spec.group_size);
      std::vector<std::vector<NodeId>> by_community(spec.communities);
      for (std::size_t i = start; i < stop; ++i)
        by_community[planted_community(spec, order[i])].push_back(order[i]);
      for (std::size_t i = start; i < stop; ++i) {
        const NodeId v = order[i];
        const auto& own = by_community[planted_community(spec, v)];
        for (std::size_t e = 0; e < spec.edges_per_node; ++e) {
          NodeId u;
          if (rng.uniform() < spec.intra && own.size() > 1)
            u = own[rng.below(own.size())];
          else
            u = order[start + rng.below(stop - start)];
          if (u != v) b.add_edge(v, u, rel);
        }
      }
    }
  }
  return b.build();
}

HinGraph random_hin(std::size_t nodes, std::size_t relations, std::size_t edges, std::uint64_t seed) {
  Rng rng(seed);
  HinBuilder b;
  const auto ids = add_nodes(b, nodes);
  for (std::size_t r = 0; r < relations; ++r) {
    const auto rel = b.add_relation("r" + std::to_string(r));
    for (std::size_t e = 0; e < edges; ++e) {
      const auto u = ids[rng.below(nodes)];
      const auto v = ids[rng.below(nodes)];
      if (u != v) b.add_edge(u, v, rel);
    }
  }
  return b.build();
}

HinGraph clique_hin(std::size_t relations, std::size_t cliques, std::size_t clique_size,
                    std::uint64_t seed) {
  Rng rng(seed);
  HinBuilder b;
  auto ids = add_nodes(b, cliques * clique_size);
  for (std::size_t r = 0; r < relations; ++r) {
    const auto rel = b.add_relation("r" + std::to_string(r));
    rng.shuffle(std::span<NodeId>(ids));
    for (std::size_t c = 0; c < cliques; ++c)
      for (std::size_t i = 0; i < clique_size; ++i)
        for (std::size_t j = i + 1; j < clique_size; ++j)
          b.add_edge(ids[c * clique_size + i], ids[c * clique_size + j], rel);
  }
  return b.build();
}

}  // namespace hin

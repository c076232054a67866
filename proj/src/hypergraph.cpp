#include "hin/hypergraph.hpp"

#include <algorithm>
#include <fstream>
#include <iterator>

#include "hin/error.hpp"
#include "hin/parallel.hpp"

namespace hin {

void Bucket::index_add(NodeId v, HyperedgeId id) {
  auto& ids = node_index_[v];
  ids.insert(std::lower_bound(ids.begin(), ids.end(), id), id);
}

void Bucket::index_remove(NodeId v, HyperedgeId id) {
  auto it = node_index_.find(v);
  if (it == node_index_.end()) return;
  auto& ids = it->second;
  auto pos = std::lower_bound(ids.begin(), ids.end(), id);
  if (pos != ids.end() && *pos == id) ids.erase(pos);
  if (ids.empty()) node_index_.erase(it);
}

void Bucket::insert(Hyperedge h) {
  const auto id = h.id;
  for (auto v : h.node_ids) index_add(v, id);
  order_.emplace(h.size(), id);
  store_.emplace(id, std::move(h));
}

Hyperedge Bucket::erase(HyperedgeId id) {
  auto it = store_.find(id);
  Hyperedge h = std::move(it->second);
  store_.erase(it);
  order_.erase({h.size(), id});
  for (auto v : h.node_ids) index_remove(v, id);
  return h;
}

const Hyperedge* Bucket::find(HyperedgeId id) const {
  auto it = store_.find(id);
  return it == store_.end() ? nullptr : &it->second;
}

HyperedgeId Bucket::merge_into(HyperedgeId target, const Hyperedge& incoming) {
  auto it = store_.find(target);
  Hyperedge& h = it->second;
  order_.erase({h.size(), h.id});

  std::vector<NodeId> added;
  std::set_difference(incoming.node_ids.begin(), incoming.node_ids.end(), h.node_ids.begin(),
                      h.node_ids.end(), std::back_inserter(added));
  std::vector<NodeId> nodes;
  nodes.reserve(h.size() + added.size());
  std::merge(h.node_ids.begin(), h.node_ids.end(), added.begin(), added.end(),
             std::back_inserter(nodes));
  std::vector<RelationId> tags;
  std::set_union(h.relation_tags.begin(), h.relation_tags.end(), incoming.relation_tags.begin(),
                 incoming.relation_tags.end(), std::back_inserter(tags));

  const HyperedgeId survivor = std::min(target, incoming.id);
  if (survivor == target) {
    for (auto v : added) index_add(v, target);
    h.node_ids = std::move(nodes);
    h.relation_tags = std::move(tags);
    order_.emplace(h.size(), h.id);
    return survivor;
  }

  Hyperedge merged{survivor, std::move(tags), std::move(nodes), h.active};
  for (auto v : h.node_ids) {
    index_remove(v, target);
    index_add(v, survivor);
  }
  for (auto v : added) index_add(v, survivor);
  store_.erase(it);
  order_.emplace(merged.size(), survivor);
  store_.emplace(survivor, std::move(merged));
  return survivor;
}

void Bucket::set_active(HyperedgeId id, bool active) { store_.at(id).active = active; }

std::span<const HyperedgeId> Bucket::hyperedges_of(NodeId v) const {
  auto it = node_index_.find(v);
  if (it == node_index_.end()) return {};
  return it->second;
}

std::vector<const Hyperedge*> Bucket::ordered() const {
  std::vector<const Hyperedge*> out;
  out.reserve(order_.size());
  for (const auto& [size, id] : order_) out.push_back(&store_.at(id));
  return out;
}

bool Bucket::is_consistent() const {
  if (order_.size() != store_.size()) return false;
  std::unordered_map<NodeId, std::vector<HyperedgeId>> expected;
  for (const auto& [id, h] : store_) {
    if (h.id != id || h.node_ids.empty()) return false;
    if (!order_.contains({h.size(), id})) return false;
    if (!std::is_sorted(h.node_ids.begin(), h.node_ids.end())) return false;
    for (auto v : h.node_ids) expected[v].push_back(id);
  }
  if (expected.size() != node_index_.size()) return false;
  for (const auto& [v, ids] : expected) {
    auto it = node_index_.find(v);
    if (it == node_index_.end() || it->second != ids) return false;
  }
  return true;
}

std::vector<std::vector<NodeId>> connected_components(
    std::span<const std::pair<NodeId, NodeId>> edges) {
  std::vector<NodeId> nodes;
  nodes.reserve(edges.size() * 2);
  for (const auto& [a, b] : edges) {
    nodes.push_back(a);
    nodes.push_back(b);
  }
  std::sort(nodes.begin(), nodes.end());
  nodes.erase(std::unique(nodes.begin(), nodes.end()), nodes.end());
  const std::size_t n = nodes.size();
  auto local = [&](NodeId v) {
    return static_cast<std::size_t>(std::lower_bound(nodes.begin(), nodes.end(), v) - nodes.begin());
  };

  std::vector<std::size_t> offsets(n + 1, 0);
  for (const auto& [a, b] : edges) {
    ++offsets[local(a) + 1];
    ++offsets[local(b) + 1];
  }
  for (std::size_t i = 0; i < n; ++i) offsets[i + 1] += offsets[i];
  std::vector<std::size_t> adj(offsets[n]);
  std::vector<std::size_t> cursor(offsets.begin(), offsets.end() - 1);
  for (const auto& [a, b] : edges) {
    const auto la = local(a), lb = local(b);
    adj[cursor[la]++] = lb;
    adj[cursor[lb]++] = la;
  }
  for (std::size_t i = 0; i < n; ++i)
    std::sort(adj.begin() + static_cast<std::ptrdiff_t>(offsets[i]),
              adj.begin() + static_cast<std::ptrdiff_t>(offsets[i + 1]));

  std::vector<std::vector<NodeId>> components;
  std::vector<char> seen(n, 0);
  std::vector<std::size_t> frontier, next;
  for (std::size_t start = 0; start < n; ++start) {
    if (seen[start]) continue;
    std::vector<NodeId> comp;
    seen[start] = 1;
    frontier.assign(1, start);
    while (!frontier.empty()) {
      next.clear();
      for (auto u : frontier) {
        comp.push_back(nodes[u]);
        for (auto k = offsets[u]; k < offsets[u + 1]; ++k) {
          const auto w = adj[k];
          if (!seen[w]) {
            seen[w] = 1;
            next.push_back(w);
          }
        }
      }
      std::sort(next.begin(), next.end());
      frontier.swap(next);
    }
    std::sort(comp.begin(), comp.end());
    components.push_back(std::move(comp));
  }
  std::stable_sort(components.begin(), components.end(), [](const auto& a, const auto& b) {
    return a.size() != b.size() ? a.size() > b.size() : a.front() < b.front();
  });
  return components;
}

std::vector<Bucket> generate_hyperedges(const HinGraph& g, std::size_t executors) {
  const std::size_t relations = g.relation_count();
  std::vector<std::vector<std::vector<NodeId>>> per_relation(relations);
  parallel_for(relations, executors, [&](std::size_t r) {
    const auto edges = relation_subgraph(g, static_cast<RelationId>(r));
    per_relation[r] = connected_components(edges);
  });

  std::vector<Bucket> buckets;
  HyperedgeId next_id = 0;
  for (std::size_t r = 0; r < relations; ++r) {
    if (per_relation[r].empty()) continue;
    Bucket bucket(static_cast<BucketId>(r));
    for (auto& comp : per_relation[r])
      bucket.insert(Hyperedge{next_id++, {static_cast<RelationId>(r)}, std::move(comp), true});
    buckets.push_back(std::move(bucket));
  }
  return buckets;
}

std::vector<NodeId> isolated_nodes(const HinGraph& g) {
  std::vector<char> touched(g.node_count(), 0);
  for (const auto& e : g.edges()) touched[e.src] = touched[e.dst] = 1;
  std::vector<NodeId> out;
  for (NodeId v = 0; v < g.node_count(); ++v)
    if (!touched[v]) out.push_back(v);
  return out;
}

BucketStats bucket_stats(std::span<const Bucket> buckets) {
  BucketStats stats;
  std::size_t total_nodes = 0;
  for (const auto& b : buckets) {
    for (const auto* h : b.ordered()) {
      ++stats.count;
      stats.largest = std::max(stats.largest, h->size());
      total_nodes += h->size();
    }
  }
  if (stats.count > 0) stats.mean = static_cast<double>(total_nodes) / static_cast<double>(stats.count);
  return stats;
}

void write_hyperedge_dump(const HinGraph& g, std::span<const Bucket> buckets,
                          const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::Io, "cannot write " + path.string());
  std::vector<const Hyperedge*> all;
  for (const auto& b : buckets)
    for (const auto* h : b.ordered()) all.push_back(h);
  std::sort(all.begin(), all.end(), [](auto* a, auto* b) { return a->id < b->id; });
  for (const auto* h : all) {
    out << h->id << '\t';
    for (std::size_t i = 0; i < h->relation_tags.size(); ++i)
      out << (i ? "," : "") << g.relation_name(h->relation_tags[i]);
    out << '\t' << h->size() << '\t';
    for (std::size_t i = 0; i < h->node_ids.size(); ++i)
      out << (i ? "," : "") << g.node_name(h->node_ids[i]);
    out << '\n';
  }
}

}  // namespace hin

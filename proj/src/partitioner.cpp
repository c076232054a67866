#include "hin/partitioner.hpp"

#include <algorithm>
#include <fstream>
#include <iterator>
#include <numeric>
#include <unordered_map>

#include "hin/error.hpp"
#include "hin/parallel.hpp"
#include "hin/rng.hpp"

namespace hin {

void PartitionBounds::validate() const {
  if (lower == 0 || lower > upper)
    throw Error(ErrorKind::InvalidConfig, "partition bounds need 0 < lower <= upper, got " +
                                              std::to_string(lower) + "/" + std::to_string(upper));
}

std::optional<HyperedgeId> score_and_match(const Hyperedge& h, const Bucket& target) {
  std::unordered_map<HyperedgeId, std::size_t> hits;
  for (auto v : h.node_ids)
    for (auto id : target.hyperedges_of(v)) ++hits[id];

  std::optional<HyperedgeId> best;
  std::size_t best_hits = 0, best_size = 0;
  for (const auto& [id, count] : hits) {
    const Hyperedge* cand = target.find(id);
    if (!cand->active) continue;
    const bool better = !best || count > best_hits ||
                        (count == best_hits && (cand->size() < best_size ||
                                                (cand->size() == best_size && id < *best)));
    if (better) {
      best = id;
      best_hits = count;
      best_size = cand->size();
    }
  }
  return best;
}

namespace {

std::size_t union_size(const std::vector<NodeId>& a, const std::vector<NodeId>& b) {
  std::size_t common = 0;
  auto i = a.begin();
  auto j = b.begin();
  while (i != a.end() && j != b.end()) {
    if (*i < *j) {
      ++i;
    } else if (*j < *i) {
      ++j;
    } else {
      ++common;
      ++i;
      ++j;
    }
  }
  return a.size() + b.size() - common;
}

void absorb(Hyperedge& into, const Hyperedge& from) {
  std::vector<NodeId> nodes;
  std::set_union(into.node_ids.begin(), into.node_ids.end(), from.node_ids.begin(),
                 from.node_ids.end(), std::back_inserter(nodes));
  std::vector<RelationId> tags;
  std::set_union(into.relation_tags.begin(), into.relation_tags.end(), from.relation_tags.begin(),
                 from.relation_tags.end(), std::back_inserter(tags));
  into.node_ids = std::move(nodes);
  into.relation_tags = std::move(tags);
  into.id = std::min(into.id, from.id);
}

}  // namespace

Bucket contract_buckets(const Bucket& b1, const Bucket& b2, const PartitionBounds& bounds) {
  Bucket work = b2;
  for (const auto* h : b2.ordered())
    if (h->size() > bounds.upper) work.set_active(h->id, false);

  std::vector<Hyperedge> passed;
  for (const auto* hp : b1.ordered()) {
    Hyperedge h = *hp;
    if (h.size() > bounds.upper) h.active = false;
    if (!h.active) {
      passed.push_back(std::move(h));
      continue;
    }
    const auto match = score_and_match(h, work);
    if (match && union_size(h.node_ids, work.find(*match)->node_ids) <= bounds.upper) {
      work.merge_into(*match, h);
    } else {
      passed.push_back(std::move(h));
    }
  }

  Bucket out(std::min(b1.id(), b2.id()));
  for (const auto* h : work.ordered()) out.insert(*h);
  for (auto& h : passed) out.insert(std::move(h));
  return out;
}

Bucket contract_all(std::vector<Bucket> buckets, const PartitionBounds& bounds,
                    std::size_t executors, std::vector<std::size_t>* round_sizes) {
  if (buckets.empty()) throw Error(ErrorKind::NoBuckets, "nothing to contract");
  std::sort(buckets.begin(), buckets.end(), [](const Bucket& a, const Bucket& b) { return a.id() < b.id(); });
  if (round_sizes) round_sizes->assign(1, buckets.size());

  // A lone bucket is contracted against an empty one so oversized hyperedges
  // are still deactivated.
  if (buckets.size() == 1) {
    buckets[0] = contract_buckets(Bucket(buckets[0].id()), buckets[0], bounds);
  }

  while (buckets.size() > 1) {
    const std::size_t pairs = buckets.size() / 2;
    std::vector<Bucket> next(pairs + buckets.size() % 2);
    parallel_for(pairs, executors, [&](std::size_t i) {
      next[i] = contract_buckets(buckets[2 * i], buckets[2 * i + 1], bounds);
    });
    if (buckets.size() % 2) next.back() = std::move(buckets.back());
    buckets = std::move(next);
    if (round_sizes) round_sizes->push_back(buckets.size());
  }
  return std::move(buckets.front());
}

std::vector<Hyperedge> pack_small_hyperedges(std::vector<Hyperedge> hyperedges,
                                             const PartitionBounds& bounds, std::uint64_t seed) {
  std::vector<Hyperedge> out, small;
  for (auto& h : hyperedges) (h.size() < bounds.lower ? small : out).push_back(std::move(h));
  // Canonical order before the shuffle so the result depends only on the set.
  std::sort(small.begin(), small.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
  Rng rng(seed);
  rng.shuffle(std::span<Hyperedge>(small));

  std::optional<Hyperedge> group;
  for (auto& h : small) {
    if (group && union_size(group->node_ids, h.node_ids) > bounds.upper) {
      out.push_back(std::move(*group));
      group.reset();
    }
    if (!group) {
      group = std::move(h);
    } else {
      absorb(*group, h);
    }
    if (group->size() >= bounds.lower) {
      out.push_back(std::move(*group));
      group.reset();
    }
  }
  if (group) out.push_back(std::move(*group));
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
  return out;
}

PartitionResult partition(const HinGraph& g, std::vector<Bucket> buckets,
                          const PartitionBounds& bounds, std::uint64_t seed, std::size_t executors,
                          std::size_t fallback_dim) {
  bounds.validate();
  PartitionResult result;
  result.isolated = isolated_nodes(g);
  if (buckets.empty()) {
    if (result.isolated.empty()) throw Error(ErrorKind::NoBuckets, "graph has no edges");
    result.groups.push_back(Hyperedge{0, {}, result.isolated, true});
    result.round_sizes = {0};
  } else {
    Bucket last = contract_all(std::move(buckets), bounds, executors, &result.round_sizes);
    std::vector<Hyperedge> finals;
    for (const auto* h : last.ordered()) finals.push_back(*h);
    result.groups = pack_small_hyperedges(std::move(finals), bounds, seed);
  }

  const std::size_t k = result.groups.size();
  std::vector<std::vector<NodeId>> node_sets(k);
  for (std::size_t i = 0; i < k; ++i) node_sets[i] = result.groups[i].node_ids;
  if (!result.isolated.empty()) {
    std::size_t smallest = 0;
    for (std::size_t i = 1; i < k; ++i)
      if (node_sets[i].size() < node_sets[smallest].size()) smallest = i;
    auto& target = node_sets[smallest];
    std::vector<NodeId> merged;
    std::set_union(target.begin(), target.end(), result.isolated.begin(), result.isolated.end(),
                   std::back_inserter(merged));
    target = std::move(merged);
  }

  result.partitions.resize(k);
  parallel_for(k, executors, [&](std::size_t i) {
    result.partitions[i] =
        induce_partition(g, node_sets[i], static_cast<PartitionId>(i), fallback_dim);
    result.partitions[i].origin_relations = result.groups[i].relation_tags;
  });
  return result;
}

AnchorNetwork extract_anchor_network(const HinGraph& g, std::span<const Partition> partitions,
                                     const PartitionBounds& bounds, PartitionId anchor_id,
                                     std::size_t fallback_dim) {
  const std::size_t n = g.node_count();
  std::vector<std::vector<PartitionId>> member_of(n);
  for (const auto& p : partitions)
    for (auto v : p.node_ids) member_of[v].push_back(p.id);

  struct Ranked {
    NodeId node;
    std::size_t cross_degree;
  };
  std::vector<std::vector<Ranked>> ranked(partitions.size());
  bool any = false;
  for (std::size_t pi = 0; pi < partitions.size(); ++pi) {
    const auto& p = partitions[pi];
    for (auto v : p.node_ids) {
      std::size_t cross = 0;
      NodeId last = v;
      for (const auto& inc : g.incident(v)) {
        if (inc.neighbor == last) continue;
        last = inc.neighbor;
        if (!p.local_index(inc.neighbor)) ++cross;
      }
      if (cross > 0 || member_of[v].size() >= 2) ranked[pi].push_back({v, cross});
    }
    std::sort(ranked[pi].begin(), ranked[pi].end(), [](const Ranked& a, const Ranked& b) {
      return a.cross_degree != b.cross_degree ? a.cross_degree > b.cross_degree : a.node < b.node;
    });
    any = any || !ranked[pi].empty();
  }
  if (!any) throw Error(ErrorKind::NoCrossPartitionNodes, "partitions share no nodes or edges");

  std::size_t max_len = 0;
  for (const auto& r : ranked) max_len = std::max(max_len, r.size());

  std::vector<char> in_network(n, 0);
  std::size_t network_size = 0;
  auto add_with_neighbors = [&](NodeId v) {
    if (!in_network[v]) {
      in_network[v] = 1;
      ++network_size;
    }
    for (const auto& inc : g.incident(v)) {
      if (!in_network[inc.neighbor]) {
        in_network[inc.neighbor] = 1;
        ++network_size;
      }
    }
  };

  std::size_t k = 0;
  for (std::size_t step = 1; step <= max_len; ++step) {
    for (const auto& r : ranked)
      if (step <= r.size()) add_with_neighbors(r[step - 1].node);
    if (network_size > bounds.upper) break;
    k = step;
  }
  k = std::max<std::size_t>(k, 1);

  std::vector<NodeId> anchors;
  for (const auto& r : ranked)
    for (std::size_t i = 0; i < std::min(k, r.size()); ++i) anchors.push_back(r[i].node);
  std::sort(anchors.begin(), anchors.end());
  anchors.erase(std::unique(anchors.begin(), anchors.end()), anchors.end());

  std::fill(in_network.begin(), in_network.end(), 0);
  std::vector<NodeId> nodes;
  for (auto v : anchors) {
    if (!in_network[v]) {
      in_network[v] = 1;
      nodes.push_back(v);
    }
    for (const auto& inc : g.incident(v)) {
      if (!in_network[inc.neighbor]) {
        in_network[inc.neighbor] = 1;
        nodes.push_back(inc.neighbor);
      }
    }
  }

  AnchorNetwork anchor;
  anchor.partition = induce_partition(g, nodes, anchor_id, fallback_dim);
  anchor.anchors = std::move(anchors);
  anchor.k = k;
  anchor.membership.reserve(anchor.partition.size());
  for (auto v : anchor.partition.node_ids) anchor.membership.push_back(member_of[v]);
  return anchor;
}

double avg_neighborhood_loss(const HinGraph& g, std::span<const Partition> partitions,
                             std::size_t executors) {
  double denominator = -static_cast<double>(g.node_count());
  for (NodeId v = 0; v < g.node_count(); ++v) denominator += static_cast<double>(g.incident(v).size());
  if (denominator <= 0.0)
    throw Error(ErrorKind::DegenerateDenominator,
                "sum of neighbourhood sizes does not exceed the node count");

  std::vector<std::size_t> missing(partitions.size(), 0);
  parallel_for(partitions.size(), executors, [&](std::size_t pi) {
    const auto& p = partitions[pi];
    std::size_t count = 0;
    for (auto v : p.node_ids)
      for (const auto& inc : g.incident(v))
        if (!p.local_index(inc.neighbor)) ++count;
    missing[pi] = count;
  });
  const auto numerator = std::accumulate(missing.begin(), missing.end(), std::size_t{0});
  return 100.0 * static_cast<double>(numerator) / denominator;
}

void write_partition_manifest(const HinGraph& g, std::span<const Partition> partitions,
                              const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::Io, "cannot write " + path.string());
  for (const auto& p : partitions) {
    out << p.id << '\t' << p.size() << '\t';
    if (p.origin_relations.empty()) out << '-';
    for (std::size_t i = 0; i < p.origin_relations.size(); ++i)
      out << (i ? "," : "") << g.relation_name(p.origin_relations[i]);
    out << '\t';
    for (std::size_t i = 0; i < p.node_ids.size(); ++i)
      out << (i ? "," : "") << g.node_name(p.node_ids[i]);
    out << '\n';
  }
}

namespace {

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    out.push_back(s.substr(start, pos - start));
    if (pos == std::string::npos) break;
    start = pos + 1;
  }
  return out;
}

}  // namespace

std::vector<Partition> read_partition_manifest(const HinGraph& g, const std::filesystem::path& path,
                                               std::size_t fallback_dim) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot open " + path.string());
  std::vector<Partition> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    const auto fields = split(line, '\t');
    if (fields.size() != 4)
      throw Error(ErrorKind::MalformedLine, path.filename().string() + " line " + std::to_string(line_no));
    std::vector<NodeId> nodes;
    for (const auto& name : split(fields[3], ',')) {
      const auto v = g.find_node(name);
      if (!v) throw Error(ErrorKind::UnknownNode, name);
      nodes.push_back(*v);
    }
    std::vector<RelationId> rels;
    if (fields[2] != "-") {
      for (const auto& name : split(fields[2], ',')) {
        const auto r = g.find_relation(name);
        if (!r) throw Error(ErrorKind::UnknownRelation, name);
        rels.push_back(*r);
      }
    }
    std::sort(rels.begin(), rels.end());
    PartitionId id = 0;
    try {
      id = static_cast<PartitionId>(std::stoul(fields[0]));
    } catch (const std::exception&) {
      throw Error(ErrorKind::MalformedLine, path.filename().string() + " line " + std::to_string(line_no));
    }
    auto p = induce_partition(g, nodes, id, fallback_dim);
    p.origin_relations = std::move(rels);
    out.push_back(std::move(p));
  }
  return out;
}

}  // namespace hin

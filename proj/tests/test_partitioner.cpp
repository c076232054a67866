#include <doctest.h>

#include <cmath>
#include <set>

#include "hin/error.hpp"
#include "hin/partitioner.hpp"
#include "hin/rng.hpp"
#include "hin/synthetic.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace hin;

namespace {

Hyperedge he(HyperedgeId id, std::vector<NodeId> nodes, RelationId rel = 0) {
  return Hyperedge{id, {rel}, std::move(nodes), true};
}

Bucket bucket(BucketId id, const std::vector<Hyperedge>& hs) {
  Bucket b(id);
  for (const auto& h : hs) b.insert(h);
  return b;
}

std::vector<Hyperedge> random_hyperedges(Rng& rng, HyperedgeId& next, RelationId rel,
                                         std::size_t max_count, std::size_t max_size, NodeId universe) {
  std::vector<Hyperedge> out;
  const auto count = 1 + rng.below(max_count);
  for (std::size_t i = 0; i < count; ++i) {
    std::set<NodeId> nodes;
    const auto n = 1 + rng.below(max_size);
    while (nodes.size() < n) nodes.insert(static_cast<NodeId>(rng.below(universe)));
    out.push_back(he(next++, {nodes.begin(), nodes.end()}, rel));
  }
  return out;
}

std::vector<Hyperedge> contents(const Bucket& b) {
  std::vector<Hyperedge> out;
  for (const auto* h : b.ordered()) out.push_back(*h);
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& c) { return a.id < c.id; });
  return out;
}

bool same(const std::vector<Hyperedge>& a, const std::vector<Hyperedge>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (a[i].id != b[i].id || a[i].node_ids != b[i].node_ids ||
        a[i].relation_tags != b[i].relation_tags || a[i].active != b[i].active)
      return false;
  return true;
}

std::vector<Partition> induce_all(const HinGraph& g, const std::vector<std::vector<NodeId>>& sets) {
  std::vector<Partition> out;
  for (std::size_t i = 0; i < sets.size(); ++i)
    out.push_back(induce_partition(g, sets[i], static_cast<PartitionId>(i), 4));
  return out;
}

HinGraph path_graph(std::size_t n) {
  HinBuilder b;
  for (std::size_t i = 1; i < n; ++i)
    b.add_edge(std::to_string(i), "A", "r0", std::to_string(i + 1), "A");
  return b.build();
}

}  // namespace

TEST_CASE("bounds validation") {
  CHECK_NOTHROW(PartitionBounds{}.validate());
  CHECK_ERROR_KIND((PartitionBounds{0, 5}.validate()), ErrorKind::InvalidConfig);
  CHECK_ERROR_KIND((PartitionBounds{6, 5}.validate()), ErrorKind::InvalidConfig);
  CHECK(PartitionBounds::large_graph().lower == 10000);
  CHECK(PartitionBounds::large_graph().upper == 40000);
}

TEST_CASE("score_and_match examples") {
  const auto target = bucket(1, {he(10, {2, 3, 9}), he(11, {3, 10})});
  CHECK(score_and_match(he(0, {1, 2, 3}), target) == HyperedgeId{10});
  CHECK_FALSE(score_and_match(he(0, {7, 8}), bucket(1, {he(5, {1, 2})})).has_value());

  const auto tie = bucket(1, {he(20, {1, 2, 3}), he(21, {1, 4}), he(19, {1, 5})});
  CHECK(score_and_match(he(0, {1}), tie) == HyperedgeId{19});

  auto inactive = bucket(1, {he(30, {1, 2}), he(31, {1, 9, 8})});
  inactive.set_active(30, false);
  CHECK(score_and_match(he(0, {1, 2}), inactive) == HyperedgeId{31});
}

TEST_CASE("score_and_match agrees with exhaustive intersection") {
  Rng rng(41);
  for (int trial = 0; trial < 300; ++trial) {
    HyperedgeId next = 0;
    auto list = random_hyperedges(rng, next, 0, 20, 8, 30);
    for (auto& h : list)
      if (rng.below(5) == 0) h.active = false;
    const auto target = bucket(0, list);
    const auto probe = random_hyperedges(rng, next, 1, 1, 8, 30).front();
    const auto want = oracle::best_match(probe, list);
    const auto got = score_and_match(probe, target);
    REQUIRE(got.has_value() == want.has_value());
    if (want) CHECK(*got == list[*want].id);
  }
}

TEST_CASE("contract_buckets examples") {
  const PartitionBounds wide{1, 10};
  const auto merged = contract_buckets(bucket(0, {he(0, {1, 2}, 0)}), bucket(1, {he(1, {2, 3}, 1)}), wide);
  CHECK(merged.id() == 0);
  REQUIRE(merged.size() == 1);
  const auto* h = merged.ordered()[0];
  CHECK(h->id == 0);
  CHECK(h->node_ids == std::vector<NodeId>{1, 2, 3});
  CHECK(h->relation_tags == std::vector<RelationId>{0, 1});

  const PartitionBounds tight{1, 2};
  const auto blocked = contract_buckets(bucket(0, {he(0, {1, 2})}), bucket(1, {he(1, {2, 3})}), tight);
  REQUIRE(blocked.size() == 2);
  CHECK(blocked.find(0)->node_ids == std::vector<NodeId>{1, 2});
  CHECK(blocked.find(1)->node_ids == std::vector<NodeId>{2, 3});

  const auto oversized = contract_buckets(bucket(0, {he(0, {1, 2, 3})}), bucket(1, {he(1, {3, 4})}), tight);
  CHECK_FALSE(oversized.find(0)->active);
  CHECK(oversized.find(1)->active);
}

TEST_CASE("contract_buckets agrees with a plain re-simulation") {
  Rng rng(43);
  for (int trial = 0; trial < 300; ++trial) {
    HyperedgeId next = 0;
    auto a = random_hyperedges(rng, next, 0, 15, 8, 40);
    auto b = random_hyperedges(rng, next, 1, 15, 8, 40);
    const PartitionBounds bounds{1, 3 + rng.below(12)};
    const auto got = contract_buckets(bucket(0, a), bucket(1, b), bounds);
    CHECK(got.is_consistent());
    const auto want = oracle::contract(a, b, bounds.upper);
    CHECK(same(contents(got), want));

    std::set<NodeId> before, after;
    for (const auto& h : a) before.insert(h.node_ids.begin(), h.node_ids.end());
    for (const auto& h : b) before.insert(h.node_ids.begin(), h.node_ids.end());
    for (const auto* h : got.ordered()) {
      after.insert(h->node_ids.begin(), h->node_ids.end());
      if (h->relation_tags.size() > 1) CHECK(h->size() <= bounds.upper);
    }
    CHECK(before == after);
  }
}

TEST_CASE("contract_all halves the bucket count every round") {
  for (std::size_t n : {1u, 2u, 3u, 5u, 8u, 9u}) {
    const auto g = random_hin(300, n, 80, 50 + n);
    auto buckets = generate_hyperedges(g);
    REQUIRE(buckets.size() == n);
    std::vector<std::size_t> rounds;
    const auto last = contract_all(buckets, PartitionBounds{10, 40}, 2, &rounds);
    CHECK(last.is_consistent());
    for (std::size_t t = 0; t < rounds.size(); ++t)
      CHECK(rounds[t] == static_cast<std::size_t>(std::ceil(static_cast<double>(n) / std::pow(2.0, t))));
    CHECK(rounds.back() == 1);
  }
  CHECK_ERROR_KIND(contract_all({}, PartitionBounds{}), ErrorKind::NoBuckets);
}

TEST_CASE("packing closes groups at the lower bound or before the upper bound") {
  Rng rng(47);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<Hyperedge> hs;
    NodeId base = 0;
    for (HyperedgeId i = 0; i < 30; ++i) {
      const auto n = 1 + rng.below(12);
      std::vector<NodeId> nodes(n);
      std::iota(nodes.begin(), nodes.end(), base);
      base += static_cast<NodeId>(n);
      hs.push_back(he(i, nodes));
    }
    const PartitionBounds bounds{8, 14};
    const auto packed = pack_small_hyperedges(hs, bounds, 7 + trial);
    std::size_t total = 0;
    for (std::size_t i = 0; i < packed.size(); ++i) {
      total += packed[i].size();
      if (i) CHECK(packed[i - 1].id < packed[i].id);
      bool originally_large = false;
      for (const auto& h : hs)
        if (h.id == packed[i].id && h.size() >= bounds.lower) originally_large = true;
      if (!originally_large) CHECK(packed[i].size() <= bounds.upper);
    }
    CHECK(total == base);
    for (const auto& h : hs) {
      if (h.size() < bounds.lower) continue;
      const auto it = std::find_if(packed.begin(), packed.end(), [&](const auto& x) { return x.id == h.id; });
      REQUIRE(it != packed.end());
      CHECK(it->node_ids == h.node_ids);
    }
    CHECK(same(packed, pack_small_hyperedges(hs, bounds, 7 + trial)));
  }
}

TEST_CASE("single bucket within bounds yields its hyperedges verbatim") {
  const auto g = clique_hin(1, 5, 6, 3);
  const auto buckets = generate_hyperedges(g);
  const auto result = partition(g, buckets, PartitionBounds{6, 10}, 1);
  REQUIRE(result.partitions.size() == 5);
  std::set<std::vector<NodeId>> expected;
  for (const auto* h : buckets[0].ordered()) expected.insert(h->node_ids);
  std::set<std::vector<NodeId>> got;
  for (const auto& p : result.partitions) got.insert(p.node_ids);
  CHECK(got == expected);
}

TEST_CASE("planted disjoint communities are recovered exactly") {
  const std::size_t size = 10;
  HinBuilder b;
  Rng rng(53);
  for (std::size_t c = 0; c < 3; ++c) {
    const std::string rel = "r" + std::to_string(c);
    for (std::size_t i = 1; i < size; ++i) {
      const auto j = rng.below(i);
      b.add_edge("c" + std::to_string(c) + "_" + std::to_string(i), "A", rel,
                 "c" + std::to_string(c) + "_" + std::to_string(j), "A");
    }
  }
  const auto g = b.build();
  const auto result = partition(g, generate_hyperedges(g), PartitionBounds{size, 4 * size}, 9);
  REQUIRE(result.partitions.size() == 3);
  for (const auto& p : result.partitions) {
    REQUIRE(p.size() == size);
    const auto prefix = g.node_name(p.node_ids[0]).substr(0, 2);
    for (auto v : p.node_ids) CHECK(g.node_name(v).substr(0, 2) == prefix);
    CHECK(p.origin_relations.size() == 1);
  }
}

TEST_CASE("isolated nodes join the smallest partition") {
  HinBuilder b;
  for (int i = 0; i < 5; ++i) b.add_edge("a" + std::to_string(i), "A", "r", "a" + std::to_string(i + 1), "A");
  b.add_edge("b0", "A", "r", "b1", "A");
  b.add_node("lonely", "A");
  const auto g = b.build();
  const auto result = partition(g, generate_hyperedges(g), PartitionBounds{1, 100}, 1);
  REQUIRE(result.partitions.size() == 2);
  CHECK(result.isolated == std::vector<NodeId>{*g.find_node("lonely")});
  const auto& small = result.partitions[0].size() < result.partitions[1].size() ? result.partitions[0]
                                                                                 : result.partitions[1];
  CHECK(small.local_index(*g.find_node("lonely")).has_value());
  CHECK(small.size() == 3);

  HinBuilder only;
  only.add_node("x", "A");
  only.add_node("y", "A");
  const auto h = only.build();
  const auto lone = partition(h, {}, PartitionBounds{1, 10}, 1);
  REQUIRE(lone.partitions.size() == 1);
  CHECK(lone.partitions[0].size() == 2);
}

TEST_CASE("partition is identical across executor counts") {
  const auto g = random_hin(2000, 5, 700, 59);
  const PartitionBounds bounds{40, 160};
  const auto a = partition(g, generate_hyperedges(g, 1), bounds, 3, 1);
  const auto b = partition(g, generate_hyperedges(g, 4), bounds, 3, 8);
  REQUIRE(a.partitions.size() == b.partitions.size());
  for (std::size_t i = 0; i < a.partitions.size(); ++i) {
    CHECK(a.partitions[i].node_ids == b.partitions[i].node_ids);
    CHECK(a.partitions[i].origin_relations == b.partitions[i].origin_relations);
  }
  CHECK(a.round_sizes == b.round_sizes);
}

TEST_CASE("anchor network for two partitions sharing one node") {
  HinBuilder b;
  for (int i = 1; i < 5; ++i) b.add_edge(std::to_string(i), "A", "r0", std::to_string(i + 1), "A");
  for (int i = 5; i < 9; ++i) b.add_edge(std::to_string(i), "A", "r1", std::to_string(i + 1), "A");
  const auto g = b.build();
  auto n = [&](const char* s) { return *g.find_node(s); };
  const auto parts = induce_all(g, {{n("1"), n("2"), n("3"), n("4"), n("5")},
                                    {n("5"), n("6"), n("7"), n("8"), n("9")}});
  const auto anchor = extract_anchor_network(g, parts, PartitionBounds{1, 100}, 2, 4);
  CHECK(anchor.anchors == std::vector<NodeId>{n("5")});
  CHECK(anchor.node_ids() == std::vector<NodeId>{n("4"), n("5"), n("6")});
  CHECK(anchor.partition.id == 2);
  CHECK(anchor.membership[1] == std::vector<PartitionId>{0, 1});
  CHECK(anchor.membership[0] == std::vector<PartitionId>{0});
}

TEST_CASE("disjoint partitions have no anchors") {
  const auto g = clique_hin(1, 2, 4, 5);
  const auto buckets = generate_hyperedges(g);
  std::vector<std::vector<NodeId>> sets;
  for (const auto* h : buckets[0].ordered()) sets.push_back(h->node_ids);
  CHECK_ERROR_KIND(extract_anchor_network(g, induce_all(g, sets), PartitionBounds{1, 100}, 2),
                   ErrorKind::NoCrossPartitionNodes);
}

TEST_CASE("anchor membership and selection agree with a brute-force scan") {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const auto g = random_hin(120, 2, 150, 60 + seed);
    Rng rng(seed);
    std::vector<std::vector<NodeId>> sets(2);
    for (NodeId v = 0; v < g.node_count(); ++v) {
      const auto r = rng.below(5);
      if (r <= 1) sets[0].push_back(v);
      if (r >= 1) sets[1].push_back(v);
    }
    const auto parts = induce_all(g, sets);
    const PartitionBounds bounds{1, 40};
    const auto anchor = extract_anchor_network(g, parts, bounds, 2, 4);

    auto in = [&](std::size_t p, NodeId v) { return std::binary_search(sets[p].begin(), sets[p].end(), v); };
    std::set<NodeId> candidates;
    for (std::size_t p = 0; p < 2; ++p) {
      for (auto v : sets[p]) {
        bool cross = in(1 - p, v);
        for (const auto& e : g.edges()) {
          if (e.src == v && !in(p, e.dst)) cross = true;
          if (e.dst == v && !in(p, e.src)) cross = true;
        }
        if (cross) candidates.insert(v);
      }
    }
    std::set<NodeId> expected_nodes;
    for (auto a : anchor.anchors) {
      CHECK(candidates.count(a) == 1);
      expected_nodes.insert(a);
      for (const auto& e : g.edges()) {
        if (e.src == a) expected_nodes.insert(e.dst);
        if (e.dst == a) expected_nodes.insert(e.src);
      }
    }
    CHECK(std::vector<NodeId>(expected_nodes.begin(), expected_nodes.end()) == anchor.node_ids());
    if (anchor.k > 1) CHECK(anchor.node_ids().size() <= bounds.upper);
    for (std::size_t p = 0; p < 2; ++p) {
      bool contributes = false;
      for (auto a : anchor.anchors) contributes = contributes || in(p, a);
      CHECK(contributes);
    }
    for (std::size_t i = 0; i < anchor.node_ids().size(); ++i) {
      const auto v = anchor.node_ids()[i];
      std::vector<PartitionId> m;
      for (PartitionId p = 0; p < 2; ++p)
        if (in(p, v)) m.push_back(p);
      CHECK(anchor.membership[i] == m);
    }
  }
}

TEST_CASE("neighbourhood loss examples") {
  const auto g = path_graph(3);
  std::vector<NodeId> all = {0, 1, 2};
  CHECK(avg_neighborhood_loss(g, induce_all(g, {all})) == 0.0);
  CHECK(avg_neighborhood_loss(g, induce_all(g, {{0, 1}, {1, 2}})) == doctest::Approx(200.0));

  const auto two = path_graph(2);
  CHECK_ERROR_KIND(avg_neighborhood_loss(two, induce_all(two, {{0, 1}})), ErrorKind::DegenerateDenominator);
}

TEST_CASE("neighbourhood loss equals the triple loop on random bipartitions") {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const auto g = random_hin(150, 3, 200, 70 + seed);
    Rng rng(seed);
    std::vector<std::vector<NodeId>> sets(2);
    for (NodeId v = 0; v < g.node_count(); ++v) {
      const auto r = rng.below(4);
      if (r <= 1) sets[0].push_back(v);
      if (r >= 1) sets[1].push_back(v);
    }
    const auto got = avg_neighborhood_loss(g, induce_all(g, sets), 3);
    CHECK(std::abs(got - oracle::neighborhood_loss(g, sets)) < 1e-9);
  }
}

TEST_CASE("partition manifest round-trips") {
  const auto g = random_hin(300, 3, 150, 81);
  const auto result = partition(g, generate_hyperedges(g), PartitionBounds{20, 80}, 4);
  TempDir dir;
  write_partition_manifest(g, result.partitions, dir.path / "p.tsv");
  const auto back = read_partition_manifest(g, dir.path / "p.tsv", 8);
  REQUIRE(back.size() == result.partitions.size());
  for (std::size_t i = 0; i < back.size(); ++i) {
    CHECK(back[i].id == result.partitions[i].id);
    CHECK(back[i].node_ids == result.partitions[i].node_ids);
    CHECK(back[i].origin_relations == result.partitions[i].origin_relations);
  }
  write_file(dir.path / "bad.tsv", "0\t2\tr0\n");
  CHECK_ERROR_KIND(read_partition_manifest(g, dir.path / "bad.tsv"), ErrorKind::MalformedLine);
  write_file(dir.path / "unknown.tsv", "0\t1\tr0\tnobody\n");
  CHECK_ERROR_KIND(read_partition_manifest(g, dir.path / "unknown.tsv"), ErrorKind::UnknownNode);
}

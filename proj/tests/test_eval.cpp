#include <doctest.h>

#include <set>

#include "hin/eval.hpp"
#include "hin/rng.hpp"
#include "hin/synthetic.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace hin;

namespace {

// Labeled graph with one edge chain so every node exists; embeddings are
// supplied separately.
HinGraph labeled_graph(const std::vector<std::string>& labels) {
  HinBuilder b;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const auto v = b.add_node("n" + std::to_string(i), "t");
    if (!labels[i].empty()) b.add_label(v, labels[i]);
  }
  for (NodeId i = 0; i + 1 < labels.size(); ++i) b.add_edge(i, i + 1, b.add_relation("r"));
  return b.build();
}

NodeEmbeddings cluster_embeddings(const std::vector<int>& cls, double separation, std::uint64_t seed,
                                  Eigen::Index d = 4) {
  Rng rng(seed);
  NodeEmbeddings out;
  for (std::size_t i = 0; i < cls.size(); ++i) {
    Eigen::RowVectorXd z(d);
    for (Eigen::Index j = 0; j < d; ++j) z(j) = rng.normal();
    z(0) += separation * cls[i];
    out[static_cast<NodeId>(i)] = z;
  }
  return out;
}

}  // namespace

TEST_CASE("EvalConfig validation") {
  EvalConfig c;
  CHECK_NOTHROW(c.validate());
  for (double bad : {0.0, 1.0, -0.2, 1.5}) {
    EvalConfig x;
    x.train_fraction = bad;
    CHECK_ERROR_KIND(x.validate(), ErrorKind::InvalidConfig);
    EvalConfig y;
    y.hidden_link_fraction = bad;
    CHECK_ERROR_KIND(y.validate(), ErrorKind::InvalidConfig);
  }
  EvalConfig r;
  r.runs = 0;
  CHECK_ERROR_KIND(r.validate(), ErrorKind::InvalidConfig);
  EvalConfig lr;
  lr.classifier_lr = 0.0;
  CHECK_ERROR_KIND(lr.validate(), ErrorKind::InvalidConfig);
}

TEST_CASE("logistic regression separates a separable set") {
  Eigen::MatrixXd x(6, 1);
  x << -3, -2, -1, 1, 2, 3;
  Eigen::VectorXd y(6);
  y << 0, 0, 0, 1, 1, 1;
  const auto m = train_logistic(x, y, 500, 0.5, 0.0);
  const auto p = m.probabilities(x);
  for (int i = 0; i < 3; ++i) CHECK(p(i) < 0.5);
  for (int i = 3; i < 6; ++i) CHECK(p(i) > 0.5);
  CHECK(m.weights(0) > 0.0);

  const auto zero = train_logistic(x, y, 0, 0.5, 0.0);
  CHECK(zero.probabilities(x).isApproxToConstant(0.5));
}

TEST_CASE("standardizer gives zero mean and unit variance") {
  Eigen::MatrixXd x(4, 3);
  x << 1, 5, 2, 2, 5, 4, 3, 5, 6, 4, 5, 8;
  const auto s = Standardizer::fit(x);
  const auto z = s.apply(x);
  for (Eigen::Index j = 0; j < 3; ++j) CHECK(z.col(j).mean() == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(z.col(0).array().square().mean() == doctest::Approx(1.0));
  CHECK(z.col(1).isZero());
  CHECK(s.scale(1) == 1.0);
}

TEST_CASE("f1 scores on hand examples") {
  using L = std::vector<LabelId>;
  const std::vector<L> truth = {{0}, {0}, {1}, {1}};
  const std::vector<L> pred = {{0}, {1}, {1}, {1}};
  const auto s = f1_scores(truth, pred, 2);
  // label 0: tp1 fp0 fn1 -> 2/3; label 1: tp2 fp1 fn0 -> 4/5
  CHECK(s.macro_f1 == doctest::Approx((2.0 / 3 + 4.0 / 5) / 2));
  CHECK(s.micro_f1 == doctest::Approx(0.75));

  const std::vector<L> mt = {{0, 1}, {2}};
  const std::vector<L> mp = {{0}, {1, 2}};
  const auto m = f1_scores(mt, mp, 3);
  // tp 2, fp 1, fn 1
  CHECK(m.micro_f1 == doctest::Approx(4.0 / 6));
  CHECK(m.macro_f1 == doctest::Approx((1.0 + 0.0 + 1.0) / 3));

  const auto perfect = f1_scores(truth, truth, 2);
  CHECK(perfect.micro_f1 == 1.0);
  CHECK(perfect.macro_f1 == 1.0);
}

TEST_CASE("roc_auc hand lists") {
  const std::vector<double> pos = {.9, .8, .7, .6}, neg = {.5, .4, .3, .2};
  CHECK(roc_auc(pos, neg) == 1.0);
  CHECK(roc_auc(neg, pos) == 0.0);

  const std::vector<double> pos2 = {.9, .8, .7, .5}, neg2 = {.6, .4, .3, .2};
  CHECK(roc_auc(pos2, neg2) == doctest::Approx(15.0 / 16));
  const std::vector<double> pos3 = {.9, .8, .7, .4}, neg3 = {.6, .5, .3, .2};
  CHECK(roc_auc(pos3, neg3) == doctest::Approx(14.0 / 16));
  CHECK(oracle::auc(pos3, neg3) == doctest::Approx(14.0 / 16));

  const std::vector<double> tied = {.5, .5};
  CHECK(roc_auc(tied, tied) == 0.5);
  CHECK(roc_auc(std::vector<double>{}, neg) == 0.5);
}

TEST_CASE("roc_auc equals the pairwise-count oracle") {
  Rng rng(5);
  for (int trial = 0; trial < 30; ++trial) {
    std::vector<double> pos(1 + rng.below(40)), neg(1 + rng.below(40));
    // Coarse grid so ties occur.
    for (auto& p : pos) p = static_cast<double>(rng.below(10)) + 1.0;
    for (auto& q : neg) q = static_cast<double>(rng.below(10));
    CHECK(roc_auc(pos, neg) == doctest::Approx(oracle::auc(pos, neg)).epsilon(1e-12));
  }
}

TEST_CASE("random scores give AUC near one half") {
  double total = 0.0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(seed);
    std::vector<double> pos(500), neg(500);
    for (auto& p : pos) p = rng.uniform();
    for (auto& q : neg) q = rng.uniform();
    total += roc_auc(pos, neg);
  }
  CHECK(std::abs(total / 20 - 0.5) <= 0.05);
}

TEST_CASE("separated clusters classify almost perfectly") {
  std::vector<std::string> labels;
  std::vector<int> cls;
  for (int i = 0; i < 100; ++i) {
    cls.push_back(i % 2);
    labels.push_back(i % 2 ? "b" : "a");
  }
  const auto g = labeled_graph(labels);
  const auto emb = cluster_embeddings(cls, 10.0, 3);
  const auto s = node_classification_eval(g, emb, EvalConfig{}, 11);
  CHECK(s.micro_f1 >= 0.95);
  CHECK(s.macro_f1 >= 0.95);
}

TEST_CASE("permuted labels score near the majority rate") {
  std::vector<int> cls;
  for (int i = 0; i < 300; ++i) cls.push_back(i < 150 ? 0 : (i < 225 ? 1 : 2));
  double total = 0.0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    auto permuted = cls;
    Rng rng(seed);
    rng.shuffle(std::span<int>(permuted));
    std::vector<std::string> labels;
    for (int c : permuted) labels.push_back("c" + std::to_string(c));
    const auto g = labeled_graph(labels);
    EvalConfig cfg;
    cfg.runs = 1;
    total += node_classification_eval(g, cluster_embeddings(cls, 6.0, seed + 100, 2), cfg, seed).micro_f1;
  }
  CHECK(std::abs(total / 20 - 0.5) <= 0.1);
}

TEST_CASE("insufficient labels") {
  const auto one = labeled_graph({"a", "a", "a", ""});
  NodeEmbeddings emb = cluster_embeddings({0, 0, 0, 0}, 0.0, 1);
  CHECK_ERROR_KIND(node_classification_eval(one, emb, EvalConfig{}, 1), ErrorKind::InsufficientLabels);
  const auto singleton = labeled_graph({"a", "a", "b", "a"});
  CHECK_ERROR_KIND(node_classification_eval(singleton, emb, EvalConfig{}, 1),
                   ErrorKind::InsufficientLabels);
  const auto none = labeled_graph({"", "", "", ""});
  CHECK_ERROR_KIND(node_classification_eval(none, emb, EvalConfig{}, 1), ErrorKind::InsufficientLabels);
}

TEST_CASE("multi-label prediction uses per-label thresholds") {
  // Label x on one side, label y on the other, a shared label z everywhere.
  std::vector<int> cls;
  HinBuilder b;
  const auto r = b.add_relation("r");
  for (int i = 0; i < 80; ++i) {
    const auto v = b.add_node("n" + std::to_string(i), "t");
    b.add_label(v, i % 2 ? "x" : "y");
    b.add_label(v, "z");
    cls.push_back(i % 2);
    if (i) b.add_edge(v - 1, v, r);
  }
  const auto g = b.build();
  const auto s = node_classification_eval(g, cluster_embeddings(cls, 10.0, 9), EvalConfig{}, 2);
  CHECK(s.micro_f1 >= 0.95);
}

TEST_CASE("split_links hides whole pairs") {
  HinBuilder b;
  for (int i = 0; i < 5; ++i) b.add_edge(std::to_string(i), "t", "r", std::to_string(i + 1), "t");
  CHECK_ERROR_KIND(split_links(b.build(), 0.2, 1), ErrorKind::TooFewEdges);

  const auto g = random_hin(200, 3, 300, 7);
  std::set<std::pair<NodeId, NodeId>> all_pairs;
  for (const auto& e : g.edges())
    if (e.src != e.dst) all_pairs.emplace(std::min(e.src, e.dst), std::max(e.src, e.dst));
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto s = split_links(g, 0.2, seed);
    CHECK(s.train_graph.node_count() == g.node_count());
    CHECK(s.hidden_pairs.size() + s.train_pairs.size() == all_pairs.size());
    CHECK(std::abs(static_cast<double>(s.hidden_pairs.size()) - 0.2 * all_pairs.size()) <= 1.0);
    std::set<std::pair<NodeId, NodeId>> hidden(s.hidden_pairs.begin(), s.hidden_pairs.end());
    std::set<std::pair<NodeId, NodeId>> train(s.train_pairs.begin(), s.train_pairs.end());
    for (const auto& p : hidden) CHECK_FALSE(train.count(p));
    std::set<std::pair<NodeId, NodeId>> remaining;
    for (const auto& e : s.train_graph.edges()) {
      const std::pair<NodeId, NodeId> p{std::min(e.src, e.dst), std::max(e.src, e.dst)};
      CHECK_FALSE(hidden.count(p));
      if (e.src != e.dst) remaining.insert(p);
    }
    CHECK(remaining == train);
  }
  CHECK(split_links(g, 0.2, 3).hidden_pairs == split_links(g, 0.2, 3).hidden_pairs);
}

TEST_CASE("sample_non_edges returns distinct unlinked pairs") {
  const auto g = random_hin(60, 2, 200, 13);
  std::set<std::pair<NodeId, NodeId>> linked;
  for (const auto& e : g.edges()) linked.emplace(std::min(e.src, e.dst), std::max(e.src, e.dst));
  Rng rng(4);
  const auto neg = sample_non_edges(g, 300, rng);
  CHECK(neg.size() == 300);
  std::set<std::pair<NodeId, NodeId>> seen;
  for (auto [u, v] : neg) {
    CHECK(u < v);
    CHECK(v < g.node_count());
    CHECK_FALSE(linked.count({u, v}));
    CHECK(seen.insert({u, v}).second);
  }

  HinBuilder b;
  b.add_edge("a", "t", "r", "b", "t");
  b.add_edge("b", "t", "r", "c", "t");
  Rng r2(1);
  const auto few = sample_non_edges(b.build(), 10, r2);
  REQUIRE(few.size() == 1);
  CHECK(few[0] == std::pair<NodeId, NodeId>{0, 2});
}

TEST_CASE("link scoring separates informative from random embeddings") {
  PlantedSpec spec;
  spec.nodes = 300;
  spec.communities = 3;
  spec.relations = 2;
  spec.group_size = 300;
  const auto g = planted_hin(spec);
  NodeEmbeddings informative, noise;
  Rng rng(2);
  for (NodeId v = 0; v < g.node_count(); ++v) {
    Eigen::RowVectorXd z = Eigen::RowVectorXd::Zero(6);
    z(static_cast<Eigen::Index>(planted_community(spec, v))) = 1.0;
    for (Eigen::Index j = 0; j < 6; ++j) z(j) += 0.1 * rng.normal();
    informative[v] = z;
    Eigen::RowVectorXd n(6);
    for (Eigen::Index j = 0; j < 6; ++j) n(j) = rng.normal();
    noise[v] = n;
  }
  EvalConfig cfg;
  const double good = link_prediction_eval(g, informative, cfg, 1);
  const double bad = link_prediction_eval(g, noise, cfg, 1);
  CHECK(good >= 0.75);
  CHECK(std::abs(bad - 0.5) <= 0.1);
  CHECK(link_prediction_eval(g, informative, cfg, 1) == good);

  std::vector<HinGraph> seen_graphs;
  std::vector<std::uint64_t> seeds;
  link_prediction_eval(
      g,
      [&](const HinGraph& train, std::uint64_t s) {
        seen_graphs.push_back(train);
        seeds.push_back(s);
        return informative;
      },
      cfg, 1);
  REQUIRE(seen_graphs.size() == cfg.runs);
  for (std::size_t i = 0; i < seeds.size(); ++i) {
    const auto split = split_links(g, cfg.hidden_link_fraction, seeds[i]);
    CHECK(seen_graphs[i].edges() == split.train_graph.edges());
    CHECK(seen_graphs[i].edge_count() < g.edge_count());
  }
}

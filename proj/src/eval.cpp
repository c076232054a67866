#include "hin/eval.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <unordered_set>

#include "hin/error.hpp"

namespace hin {

void EvalConfig::validate() const {
  auto in_open_unit = [](double x) { return x > 0.0 && x < 1.0; };
  if (!in_open_unit(train_fraction) || !in_open_unit(hidden_link_fraction))
    throw Error(ErrorKind::InvalidConfig, "evaluation fractions must lie in (0, 1)");
  if (runs == 0) throw Error(ErrorKind::InvalidConfig, "evaluation runs must be >= 1");
  if (!(classifier_lr > 0.0)) throw Error(ErrorKind::InvalidConfig, "classifier_lr must be > 0");
}

namespace {

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

std::uint64_t pair_key(NodeId a, NodeId b) {
  if (a > b) std::swap(a, b);
  return (static_cast<std::uint64_t>(a) << 32) | b;
}

}  // namespace

Eigen::VectorXd LogisticModel::probabilities(const Eigen::MatrixXd& x) const {
  Eigen::VectorXd logits = x * weights;
  return logits.unaryExpr([this](double q) { return sigmoid(q + bias); });
}

LogisticModel train_logistic(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, std::size_t epochs,
                             double lr, double l2) {
  LogisticModel model{Eigen::VectorXd::Zero(x.cols()), 0.0};
  const double n = static_cast<double>(std::max<Eigen::Index>(x.rows(), 1));
  for (std::size_t epoch = 0; epoch < epochs; ++epoch) {
    const Eigen::VectorXd residual = model.probabilities(x) - y;
    const Eigen::VectorXd grad_w = x.transpose() * residual / n + l2 * model.weights;
    model.weights -= lr * grad_w;
    model.bias -= lr * residual.sum() / n;
  }
  return model;
}

Standardizer Standardizer::fit(const Eigen::MatrixXd& x) {
  Standardizer s;
  s.mean = x.colwise().mean();
  s.scale.resize(x.cols());
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    const double var = (x.col(j).array() - s.mean(j)).square().mean();
    s.scale(j) = var > 1e-24 ? std::sqrt(var) : 1.0;
  }
  return s;
}

Eigen::MatrixXd Standardizer::apply(const Eigen::MatrixXd& x) const {
  Eigen::MatrixXd out = x.rowwise() - mean;
  return out.array().rowwise() / scale.array();
}

F1Scores f1_scores(std::span<const std::vector<LabelId>> truth,
                   std::span<const std::vector<LabelId>> predicted, std::size_t label_count) {
  std::vector<double> tp(label_count, 0), fp(label_count, 0), fn(label_count, 0);
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const auto& t = truth[i];
    const auto& p = predicted[i];
    for (auto l : p) {
      if (std::binary_search(t.begin(), t.end(), l)) {
        ++tp[l];
      } else {
        ++fp[l];
      }
    }
    for (auto l : t)
      if (!std::binary_search(p.begin(), p.end(), l)) ++fn[l];
  }
  F1Scores out;
  double sum_tp = 0, sum_fp = 0, sum_fn = 0, macro = 0;
  std::size_t present = 0;
  for (std::size_t l = 0; l < label_count; ++l) {
    sum_tp += tp[l];
    sum_fp += fp[l];
    sum_fn += fn[l];
    if (tp[l] + fp[l] + fn[l] == 0) continue;
    ++present;
    macro += 2 * tp[l] / (2 * tp[l] + fp[l] + fn[l]);
  }
  out.macro_f1 = present ? macro / static_cast<double>(present) : 0.0;
  const double denom = 2 * sum_tp + sum_fp + sum_fn;
  out.micro_f1 = denom > 0 ? 2 * sum_tp / denom : 0.0;
  return out;
}

double roc_auc(std::span<const double> positive_scores, std::span<const double> negative_scores) {
  if (positive_scores.empty() || negative_scores.empty()) return 0.5;
  struct Scored {
    double score;
    bool positive;
  };
  std::vector<Scored> all;
  all.reserve(positive_scores.size() + negative_scores.size());
  for (double s : positive_scores) all.push_back({s, true});
  for (double s : negative_scores) all.push_back({s, false});
  std::sort(all.begin(), all.end(), [](const Scored& a, const Scored& b) { return a.score < b.score; });

  // Sum of average ranks of the positives.
  double rank_sum = 0.0;
  std::size_t i = 0;
  while (i < all.size()) {
    std::size_t j = i;
    while (j < all.size() && all[j].score == all[i].score) ++j;
    const double avg_rank = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t k = i; k < j; ++k)
      if (all[k].positive) rank_sum += avg_rank;
    i = j;
  }
  const double np = static_cast<double>(positive_scores.size());
  const double nn = static_cast<double>(negative_scores.size());
  return (rank_sum - np * (np + 1) / 2) / (np * nn);
}

namespace {

Eigen::MatrixXd gather_rows(const NodeEmbeddings& embeddings, std::span<const NodeId> nodes) {
  if (nodes.empty()) return {};
  const auto d = embeddings.begin()->second.size();
  Eigen::MatrixXd x(static_cast<Eigen::Index>(nodes.size()), d);
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    auto it = embeddings.find(nodes[i]);
    if (it == embeddings.end())
      throw Error(ErrorKind::UnknownNode, "no embedding for node " + std::to_string(nodes[i]));
    x.row(static_cast<Eigen::Index>(i)) = it->second;
  }
  return x;
}

}  // namespace

F1Scores node_classification_eval(const HinGraph& g, const NodeEmbeddings& embeddings,
                                  const EvalConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  std::vector<NodeId> labeled;
  bool multi_label = false;
  std::vector<std::size_t> class_sizes(g.label_count(), 0);
  for (NodeId v = 0; v < g.node_count(); ++v) {
    const auto labels = g.labels(v);
    if (labels.empty() || !embeddings.contains(v)) continue;
    labeled.push_back(v);
    multi_label = multi_label || labels.size() > 1;
    for (auto l : labels) ++class_sizes[l];
  }
  const auto populated =
      std::count_if(class_sizes.begin(), class_sizes.end(), [](std::size_t c) { return c > 0; });
  if (populated < 2)
    throw Error(ErrorKind::InsufficientLabels, "need at least two labeled classes");
  for (std::size_t l = 0; l < class_sizes.size(); ++l)
    if (class_sizes[l] == 1)
      throw Error(ErrorKind::InsufficientLabels, "class " + g.label_name(static_cast<LabelId>(l)) +
                                                     " has a single labeled node");

  // Stratify on the smallest label id of each node.
  std::map<LabelId, std::vector<NodeId>> strata;
  for (auto v : labeled) strata[g.labels(v).front()].push_back(v);

  const std::size_t label_count = g.label_count();
  F1Scores total;
  for (std::size_t run = 0; run < cfg.runs; ++run) {
    Rng rng(seed + 0x9e3779b97f4a7c15ULL * (run + 1));
    std::vector<NodeId> train, test;
    for (auto& [label, members] : strata) {
      std::vector<NodeId> shuffled = members;
      rng.shuffle(std::span<NodeId>(shuffled));
      auto n_train = static_cast<std::size_t>(std::llround(cfg.train_fraction * static_cast<double>(shuffled.size())));
      if (shuffled.size() >= 2) n_train = std::clamp<std::size_t>(n_train, 1, shuffled.size() - 1);
      train.insert(train.end(), shuffled.begin(), shuffled.begin() + static_cast<std::ptrdiff_t>(n_train));
      test.insert(test.end(), shuffled.begin() + static_cast<std::ptrdiff_t>(n_train), shuffled.end());
    }
    std::sort(train.begin(), train.end());
    std::sort(test.begin(), test.end());

    const auto raw_train = gather_rows(embeddings, train);
    const auto scaler = Standardizer::fit(raw_train);
    const Eigen::MatrixXd x_train = scaler.apply(raw_train);
    const Eigen::MatrixXd x_test = scaler.apply(gather_rows(embeddings, test));

    Eigen::MatrixXd probs(x_test.rows(), static_cast<Eigen::Index>(label_count));
    for (std::size_t l = 0; l < label_count; ++l) {
      Eigen::VectorXd y(x_train.rows());
      for (std::size_t i = 0; i < train.size(); ++i) {
        const auto labels = g.labels(train[i]);
        y(static_cast<Eigen::Index>(i)) =
            std::binary_search(labels.begin(), labels.end(), static_cast<LabelId>(l)) ? 1.0 : 0.0;
      }
      const auto model = train_logistic(x_train, y, cfg.classifier_epochs, cfg.classifier_lr, cfg.classifier_l2);
      probs.col(static_cast<Eigen::Index>(l)) = model.probabilities(x_test);
    }

    std::vector<std::vector<LabelId>> truth, predicted;
    for (std::size_t i = 0; i < test.size(); ++i) {
      const auto labels = g.labels(test[i]);
      truth.emplace_back(labels.begin(), labels.end());
      std::vector<LabelId> pred;
      const auto row = probs.row(static_cast<Eigen::Index>(i));
      if (multi_label) {
        for (Eigen::Index l = 0; l < row.size(); ++l)
          if (row(l) >= 0.5) pred.push_back(static_cast<LabelId>(l));
      } else {
        Eigen::Index arg = 0;
        row.maxCoeff(&arg);
        pred.push_back(static_cast<LabelId>(arg));
      }
      predicted.push_back(std::move(pred));
    }
    const auto scores = f1_scores(truth, predicted, label_count);
    total.macro_f1 += scores.macro_f1;
    total.micro_f1 += scores.micro_f1;
  }
  total.macro_f1 /= static_cast<double>(cfg.runs);
  total.micro_f1 /= static_cast<double>(cfg.runs);
  return total;
}

LinkSplit split_links(const HinGraph& g, double hidden_fraction, std::uint64_t seed) {
  if (g.edge_count() < 10)
    throw Error(ErrorKind::TooFewEdges, "link prediction needs at least 10 edges, graph has " +
                                            std::to_string(g.edge_count()));
  std::vector<std::pair<NodeId, NodeId>> pairs;
  {
    std::unordered_set<std::uint64_t> seen;
    for (const auto& e : g.edges()) {
      if (e.src == e.dst) continue;
      if (seen.insert(pair_key(e.src, e.dst)).second)
        pairs.emplace_back(std::min(e.src, e.dst), std::max(e.src, e.dst));
    }
  }
  std::sort(pairs.begin(), pairs.end());
  Rng rng(seed);
  rng.shuffle(std::span<std::pair<NodeId, NodeId>>(pairs));
  auto hidden_count = static_cast<std::size_t>(std::llround(hidden_fraction * static_cast<double>(pairs.size())));
  hidden_count = std::clamp<std::size_t>(hidden_count, 1, pairs.size() - 1);

  LinkSplit split;
  split.hidden_pairs.assign(pairs.begin(), pairs.begin() + static_cast<std::ptrdiff_t>(hidden_count));
  split.train_pairs.assign(pairs.begin() + static_cast<std::ptrdiff_t>(hidden_count), pairs.end());
  std::sort(split.hidden_pairs.begin(), split.hidden_pairs.end());
  std::sort(split.train_pairs.begin(), split.train_pairs.end());

  std::unordered_set<std::uint64_t> hidden;
  for (const auto& [a, b] : split.hidden_pairs) hidden.insert(pair_key(a, b));
  std::vector<Edge> kept;
  for (const auto& e : g.edges())
    if (!hidden.contains(pair_key(e.src, e.dst))) kept.push_back(e);
  split.train_graph = g.with_edges(std::move(kept));
  return split;
}

std::vector<std::pair<NodeId, NodeId>> sample_non_edges(const HinGraph& g, std::size_t count,
                                                        Rng& rng) {
  const std::size_t n = g.node_count();
  std::unordered_set<std::uint64_t> linked;
  for (const auto& e : g.edges()) linked.insert(pair_key(e.src, e.dst));
  const std::size_t available = n * (n - 1) / 2 - std::min(n * (n - 1) / 2, linked.size());
  count = std::min(count, available);
  std::unordered_set<std::uint64_t> chosen;
  std::vector<std::pair<NodeId, NodeId>> out;
  while (out.size() < count) {
    auto u = static_cast<NodeId>(rng.below(n));
    auto v = static_cast<NodeId>(rng.below(n));
    if (u == v) continue;
    const auto key = pair_key(u, v);
    if (linked.contains(key) || !chosen.insert(key).second) continue;
    out.emplace_back(std::min(u, v), std::max(u, v));
  }
  return out;
}

namespace {

Eigen::MatrixXd hadamard_features(const NodeEmbeddings& embeddings,
                                  std::span<const std::pair<NodeId, NodeId>> pairs) {
  if (pairs.empty()) return {};
  const auto d = embeddings.begin()->second.size();
  Eigen::MatrixXd x(static_cast<Eigen::Index>(pairs.size()), d);
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    auto a = embeddings.find(pairs[i].first);
    auto b = embeddings.find(pairs[i].second);
    if (a == embeddings.end() || b == embeddings.end())
      throw Error(ErrorKind::UnknownNode, "pair endpoint without embedding");
    x.row(static_cast<Eigen::Index>(i)) = a->second.cwiseProduct(b->second);
  }
  return x;
}

}  // namespace

double score_link_split(const HinGraph& g, const LinkSplit& split, const NodeEmbeddings& embeddings,
                        const EvalConfig& cfg, std::uint64_t seed) {
  Rng rng(seed);
  auto negatives = sample_non_edges(g, split.train_pairs.size() + split.hidden_pairs.size(), rng);
  const auto train_neg = std::span(negatives).first(std::min(split.train_pairs.size(), negatives.size()));
  const auto test_neg = std::span(negatives).subspan(train_neg.size());

  Eigen::MatrixXd x_train(static_cast<Eigen::Index>(split.train_pairs.size() + train_neg.size()),
                          embeddings.begin()->second.size());
  x_train << hadamard_features(embeddings, split.train_pairs), hadamard_features(embeddings, train_neg);
  Eigen::VectorXd y(x_train.rows());
  y.head(static_cast<Eigen::Index>(split.train_pairs.size())).setOnes();
  y.tail(static_cast<Eigen::Index>(train_neg.size())).setZero();

  const auto scaler = Standardizer::fit(x_train);
  const auto model = train_logistic(scaler.apply(x_train), y, cfg.classifier_epochs, cfg.classifier_lr,
                                    cfg.classifier_l2);
  const Eigen::VectorXd pos = model.probabilities(scaler.apply(hadamard_features(embeddings, split.hidden_pairs)));
  const Eigen::VectorXd neg = model.probabilities(scaler.apply(hadamard_features(embeddings, test_neg)));
  return roc_auc(std::span<const double>(pos.data(), static_cast<std::size_t>(pos.size())),
                 std::span<const double>(neg.data(), static_cast<std::size_t>(neg.size())));
}

double link_prediction_eval(const HinGraph& g, const EmbedFn& embed, const EvalConfig& cfg,
                            std::uint64_t seed) {
  cfg.validate();
  double total = 0.0;
  for (std::size_t run = 0; run < cfg.runs; ++run) {
    const std::uint64_t run_seed = seed + 0x9e3779b97f4a7c15ULL * (run + 1);
    const auto split = split_links(g, cfg.hidden_link_fraction, run_seed);
    const auto embeddings = embed(split.train_graph, run_seed);
    total += score_link_split(g, split, embeddings, cfg, run_seed ^ 0x5bd1e995ULL);
  }
  return total / static_cast<double>(cfg.runs);
}

double link_prediction_eval(const HinGraph& g, const NodeEmbeddings& embeddings,
                            const EvalConfig& cfg, std::uint64_t seed) {
  return link_prediction_eval(
      g, [&](const HinGraph&, std::uint64_t) { return embeddings; }, cfg, seed);
}

}  // namespace hin

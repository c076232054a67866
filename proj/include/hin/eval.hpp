#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "hin/graph.hpp"
#include "hin/procrustes.hpp"
#include "hin/rng.hpp"

namespace hin {

struct EvalConfig {
  double train_fraction = 0.7;
  double hidden_link_fraction = 0.2;
  std::size_t classifier_epochs = 300;
  double classifier_lr = 0.5;
  double classifier_l2 = 1e-4;
  std::size_t runs = 5;
  bool link_prediction = true;

  void validate() const;
};

/// Binary logistic regression fitted by full-batch gradient descent on the
/// mean log-loss plus an L2 penalty on the weights.
struct LogisticModel {
  Eigen::VectorXd weights;
  double bias = 0.0;

  Eigen::VectorXd probabilities(const Eigen::MatrixXd& x) const;
};

LogisticModel train_logistic(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, std::size_t epochs,
                             double lr, double l2);

/// Column means/stddevs learnt on one matrix and applied to others.
struct Standardizer {
  Eigen::RowVectorXd mean;
  Eigen::RowVectorXd scale;

  static Standardizer fit(const Eigen::MatrixXd& x);
  Eigen::MatrixXd apply(const Eigen::MatrixXd& x) const;
};

struct F1Scores {
  double macro_f1 = 0.0;
  double micro_f1 = 0.0;
};

/// Macro and micro F1 over label sets (each inner vector sorted).
F1Scores f1_scores(std::span<const std::vector<LabelId>> truth,
                   std::span<const std::vector<LabelId>> predicted, std::size_t label_count);

/// Area under the ROC curve via the Mann-Whitney statistic; ties count 1/2.
double roc_auc(std::span<const double> positive_scores, std::span<const double> negative_scores);

/// Stratified train/test split of labeled nodes, averaged over cfg.runs
/// seeded repetitions. One-vs-rest logistic classifiers; single-label data is
/// decided by argmax, multi-label data by a 0.5 threshold per label.
/// Throws InsufficientLabels unless >= 2 classes each have >= 2 nodes.
F1Scores node_classification_eval(const HinGraph& g, const NodeEmbeddings& embeddings,
                                  const EvalConfig& cfg, std::uint64_t seed);

/// Hidden links are whole node pairs: every relation edge between a hidden
/// pair is withheld from train_graph.
struct LinkSplit {
  HinGraph train_graph;
  std::vector<std::pair<NodeId, NodeId>> train_pairs;
  std::vector<std::pair<NodeId, NodeId>> hidden_pairs;
};

/// Throws TooFewEdges when g has fewer than 10 edges.
LinkSplit split_links(const HinGraph& g, double hidden_fraction, std::uint64_t seed);

/// `count` distinct unordered pairs that are neither self-pairs nor linked in g.
std::vector<std::pair<NodeId, NodeId>> sample_non_edges(const HinGraph& g, std::size_t count,
                                                        Rng& rng);

/// Hadamard pair features for a logistic scorer trained on the split's train
/// pairs (plus as many sampled non-edges) and scored on the hidden pairs
/// (plus fresh non-edges).
double score_link_split(const HinGraph& g, const LinkSplit& split, const NodeEmbeddings& embeddings,
                        const EvalConfig& cfg, std::uint64_t seed);

using EmbedFn = std::function<NodeEmbeddings(const HinGraph& train_graph, std::uint64_t run_seed)>;

/// Remove-then-embed protocol: for each run, split, embed the remaining graph
/// with `embed`, then score. Mean AUC over cfg.runs.
double link_prediction_eval(const HinGraph& g, const EmbedFn& embed, const EvalConfig& cfg,
                            std::uint64_t seed);

/// Same protocol with fixed embeddings (which may have seen the hidden pairs).
double link_prediction_eval(const HinGraph& g, const NodeEmbeddings& embeddings,
                            const EvalConfig& cfg, std::uint64_t seed);

}  // namespace hin

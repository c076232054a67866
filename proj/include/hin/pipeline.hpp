#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "hin/eval.hpp"
#include "hin/graph.hpp"
#include "hin/infomax.hpp"
#include "hin/partitioner.hpp"
#include "hin/procrustes.hpp"

namespace hin {

struct PipelinePaths {
  std::filesystem::path edges;
  std::optional<std::filesystem::path> features;
  std::optional<std::filesystem::path> labels;
  std::filesystem::path out = "out";
};

struct PipelineConfig {
  PartitionBounds bounds;
  WorkerConfig worker;
  EvalConfig eval;
  std::size_t executors = 1;
  std::uint64_t seed = 0;
  std::size_t fallback_feature_dim = kDefaultFallbackFeatureDim;
  AlignMode align_mode = AlignMode::Procrustes;
  PipelinePaths paths;

  void validate() const;
};

/// Overlays the keys present in `j` onto `cfg`. Relative paths are resolved
/// against `base_dir`.
void merge_config(PipelineConfig& cfg, const nlohmann::json& j,
                  const std::filesystem::path& base_dir = {});
PipelineConfig load_config(const std::filesystem::path& path);
nlohmann::json config_to_json(const PipelineConfig& cfg);

struct PartitionStage {
  PartitionResult partitions;
  std::optional<AnchorNetwork> anchor;  // absent for k = 1 or disjoint partitions
  std::vector<Bucket> buckets;          // as generated, before contraction
};

PartitionStage run_partition_stage(const HinGraph& g, const PipelineConfig& cfg);

struct EmbedStage {
  std::vector<EmbeddingMatrix> partition_embeddings;
  std::optional<EmbeddingMatrix> anchor_embedding;
  std::vector<TrainTrace> traces;  // one per partition, then the anchor network
};

/// Trains one independent worker per partition (and one for the anchor
/// network), at most cfg.executors at a time.
EmbedStage run_embed_stage(std::span<const Partition> partitions, const AnchorNetwork* anchor,
                           const PipelineConfig& cfg);

struct EmbeddingRun {
  PartitionStage partition;
  EmbedStage embed;
  AlignmentReport alignment;
  NodeEmbeddings embeddings;
};

/// Partition, embed and align one graph in memory.
EmbeddingRun embed_graph(const HinGraph& g, const PipelineConfig& cfg);

struct Metrics {
  std::optional<double> macro_f1;
  std::optional<double> micro_f1;
  std::optional<double> auc;
  std::optional<double> avg_neighborhood_loss;
  nlohmann::json per_partition = nlohmann::json::array();

  nlohmann::json to_json() const;
};

/// Downstream metrics for an embedding run. Link prediction re-embeds the
/// graph with the hidden pairs removed on every evaluation round.
Metrics evaluate_run(const HinGraph& g, const EmbeddingRun& run, const PipelineConfig& cfg);

struct PipelineOutput {
  EmbeddingRun run;
  Metrics metrics;
};

/// Loads cfg.paths, runs every stage, evaluates, and writes all artifacts to
/// cfg.paths.out. On failure nothing is left behind in the output directory.
PipelineOutput run_pipeline(const PipelineConfig& cfg);

// Artifact writers and readers.
std::string format_vector(const Eigen::Ref<const Eigen::RowVectorXd>& v);
void write_embedding_dump(const HinGraph& g, std::span<const EmbeddingMatrix> matrices,
                          const std::filesystem::path& path);
std::vector<EmbeddingMatrix> read_embedding_dump(const HinGraph& g, const std::filesystem::path& path);
void write_final_embeddings(const HinGraph& g, const NodeEmbeddings& embeddings,
                            const std::filesystem::path& path);
NodeEmbeddings read_final_embeddings(const HinGraph& g, const std::filesystem::path& path);
void write_alignment_report(const AlignmentReport& report, const std::filesystem::path& path);
void write_metrics(const Metrics& metrics, const std::filesystem::path& path);

}  // namespace hin

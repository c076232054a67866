#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "hin/error.hpp"
#include "hin/pipeline.hpp"

namespace fs = std::filesystem;
using namespace hin;

namespace {

struct Flags {
  std::optional<std::string> config;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> workers;
  std::optional<std::size_t> dim;
  std::optional<std::size_t> epochs;
  std::optional<double> lr;
  std::optional<std::size_t> lower;
  std::optional<std::size_t> upper;
  std::optional<double> corruption;
  std::optional<std::string> out;
  std::optional<std::string> edges;
  std::optional<std::string> features;
  std::optional<std::string> labels;
  bool no_align = false;
};

PipelineConfig resolve_config(const Flags& f) {
  PipelineConfig cfg = f.config ? load_config(*f.config) : PipelineConfig{};
  if (f.seed) cfg.seed = *f.seed;
  if (f.workers) cfg.executors = *f.workers;
  if (f.dim) cfg.worker.dim = *f.dim;
  if (f.epochs) cfg.worker.epochs = *f.epochs;
  if (f.lr) cfg.worker.lr = *f.lr;
  if (f.lower) cfg.bounds.lower = *f.lower;
  if (f.upper) cfg.bounds.upper = *f.upper;
  if (f.corruption) cfg.worker.corruption_rate = *f.corruption;
  if (f.out) cfg.paths.out = *f.out;
  if (f.edges) cfg.paths.edges = *f.edges;
  if (f.features) cfg.paths.features = *f.features;
  if (f.labels) cfg.paths.labels = *f.labels;
  if (f.no_align) cfg.align_mode = AlignMode::Identity;
  cfg.validate();
  if (cfg.paths.edges.empty()) throw CLI::ValidationError("--edges", "no edge file given (flag or config paths.edges)");
  return cfg;
}

HinGraph load_graph(const PipelineConfig& cfg) {
  return load_hin(cfg.paths.edges, cfg.paths.features, cfg.paths.labels);
}

std::vector<Partition> read_anchor_manifest(const HinGraph& g, const PipelineConfig& cfg) {
  const auto path = cfg.paths.out / "anchors.tsv";
  if (!fs::exists(path)) return {};
  return read_partition_manifest(g, path, cfg.fallback_feature_dim);
}

void cmd_partition(const PipelineConfig& cfg) {
  const auto g = load_graph(cfg);
  const auto stage = run_partition_stage(g, cfg);
  fs::create_directories(cfg.paths.out);
  write_partition_manifest(g, stage.partitions.partitions, cfg.paths.out / "partitions.tsv");
  std::vector<Partition> anchors;
  if (stage.anchor) anchors.push_back(stage.anchor->partition);
  write_partition_manifest(g, anchors, cfg.paths.out / "anchors.tsv");
  write_hyperedge_dump(g, stage.buckets, cfg.paths.out / "hyperedges.tsv");
  std::cout << "partitions " << stage.partitions.partitions.size() << '\n';
  if (stage.anchor) std::cout << "anchor_nodes " << stage.anchor->node_ids().size() << '\n';
}

void cmd_embed(const PipelineConfig& cfg) {
  const auto g = load_graph(cfg);
  const auto parts = read_partition_manifest(g, cfg.paths.out / "partitions.tsv", cfg.fallback_feature_dim);
  auto anchors = read_anchor_manifest(g, cfg);
  std::optional<AnchorNetwork> anchor;
  if (!anchors.empty()) {
    anchor.emplace();
    anchor->partition = std::move(anchors.front());
  }
  const auto stage = run_embed_stage(parts, anchor ? &*anchor : nullptr, cfg);
  std::vector<EmbeddingMatrix> dumps = stage.partition_embeddings;
  if (stage.anchor_embedding) dumps.push_back(*stage.anchor_embedding);
  write_embedding_dump(g, dumps, cfg.paths.out / "partition_embeddings.tsv");
  fs::create_directories(cfg.paths.out / "traces");
  for (std::size_t i = 0; i < stage.traces.size(); ++i) {
    const auto id = i < parts.size() ? parts[i].id : anchor->partition.id;
    write_loss_trace(stage.traces[i], cfg.paths.out / "traces" / ("worker_" + std::to_string(id) + ".csv"));
  }
}

void cmd_align(const PipelineConfig& cfg) {
  const auto g = load_graph(cfg);
  auto matrices = read_embedding_dump(g, cfg.paths.out / "partition_embeddings.tsv");
  const auto anchors = read_anchor_manifest(g, cfg);
  std::optional<EmbeddingMatrix> anchor;
  if (!anchors.empty()) {
    for (auto it = matrices.begin(); it != matrices.end(); ++it) {
      if (it->partition_id != anchors.front().id) continue;
      anchor = std::move(*it);
      matrices.erase(it);
      break;
    }
  }
  AlignmentReport report;
  const auto emb = align_all(matrices, anchor ? &*anchor : nullptr,
                             anchor ? cfg.align_mode : AlignMode::Identity, &report, cfg.executors);
  write_alignment_report(report, cfg.paths.out / "alignment.tsv");
  write_final_embeddings(g, emb, cfg.paths.out / "embeddings.tsv");
}

void cmd_eval(const PipelineConfig& cfg) {
  const auto g = load_graph(cfg);
  const auto emb = read_final_embeddings(g, cfg.paths.out / "embeddings.tsv");
  Metrics m;
  const auto manifest = cfg.paths.out / "partitions.tsv";
  if (fs::exists(manifest)) {
    const auto parts = read_partition_manifest(g, manifest, 1);
    try {
      m.avg_neighborhood_loss = avg_neighborhood_loss(g, parts, cfg.executors);
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::DegenerateDenominator) throw;
    }
  }
  if (g.has_labels()) {
    const auto f1 = node_classification_eval(g, emb, cfg.eval, cfg.seed);
    m.macro_f1 = f1.macro_f1;
    m.micro_f1 = f1.micro_f1;
  }
  if (cfg.eval.link_prediction && g.edge_count() >= 10)
    m.auc = link_prediction_eval(g, emb, cfg.eval, cfg.seed);
  write_metrics(m, cfg.paths.out / "metrics.json");
  std::cout << m.to_json().dump(2) << '\n';
}

void cmd_run(const PipelineConfig& cfg) {
  const auto result = run_pipeline(cfg);
  std::cout << result.metrics.to_json().dump(2) << '\n';
}

void cmd_quality(const PipelineConfig& cfg, const std::optional<std::string>& manifest) {
  const auto g = load_graph(cfg);
  const fs::path path = manifest ? fs::path(*manifest) : cfg.paths.out / "partitions.tsv";
  const auto parts = read_partition_manifest(g, path, 1);
  std::printf("avg_neighborhood_loss %.2f\n", avg_neighborhood_loss(g, parts, cfg.executors));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Decentralized embedding of heterogeneous information networks"};
  app.require_subcommand(1);
  app.fallthrough();

  Flags f;
  app.add_option("--config", f.config, "JSON config file; explicit flags override it");
  app.add_option("--seed", f.seed, "Master seed");
  app.add_option("--workers", f.workers, "Maximum concurrent workers")->check(CLI::PositiveNumber);
  app.add_option("--dim", f.dim, "Embedding width");
  app.add_option("--epochs", f.epochs, "Maximum training epochs per worker");
  app.add_option("--lr", f.lr, "Worker learning rate");
  app.add_option("--lower-bound", f.lower, "Partition lower bound (nodes)");
  app.add_option("--upper-bound", f.upper, "Partition upper bound (nodes)");
  app.add_option("--corruption-rate", f.corruption, "Fraction of edges rewired for negatives");
  app.add_option("--out", f.out, "Output directory");
  app.add_option("--edges", f.edges, "Edge file (TSV)");
  app.add_option("--features", f.features, "Feature file (TSV)");
  app.add_option("--labels", f.labels, "Label file (TSV)");
  app.add_flag("--no-align", f.no_align, "Skip alignment (identity maps)");

  auto* partition_cmd = app.add_subcommand("partition", "Build hyperedges, partitions and the anchor network");
  auto* embed_cmd = app.add_subcommand("embed", "Train one worker per partition and the anchor network");
  auto* align_cmd = app.add_subcommand("align", "Align partition embeddings and aggregate contexts");
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate final embeddings");
  auto* run_cmd = app.add_subcommand("run", "Run every stage and evaluate");
  auto* quality_cmd = app.add_subcommand("quality", "Report average neighbourhood loss of a partition manifest");
  std::optional<std::string> manifest;
  quality_cmd->add_option("--manifest", manifest, "Partition manifest (default <out>/partitions.tsv)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    std::cerr << app.help();
    return 2;
  }

  try {
    const auto cfg = resolve_config(f);
    if (*partition_cmd) cmd_partition(cfg);
    else if (*embed_cmd) cmd_embed(cfg);
    else if (*align_cmd) cmd_align(cfg);
    else if (*eval_cmd) cmd_eval(cfg);
    else if (*run_cmd) cmd_run(cfg);
    else if (*quality_cmd) cmd_quality(cfg, manifest);
  } catch (const CLI::ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n' << app.help();
    return 2;
  } catch (const Error& e) {
    std::cerr << "error [" << to_string(e.kind()) << "]: " << e.what() << '\n';
    return e.kind() == ErrorKind::InvalidConfig ? 2 : 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

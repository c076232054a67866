#include "hin/pipeline.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include "hin/error.hpp"
#include "hin/hypergraph.hpp"
#include "hin/parallel.hpp"

namespace hin {

void PipelineConfig::validate() const {
  bounds.validate();
  worker.validate();
  eval.validate();
  if (executors < 1) throw Error(ErrorKind::InvalidConfig, "executor count must be >= 1");
  if (fallback_feature_dim < 1) throw Error(ErrorKind::InvalidConfig, "fallback_feature_dim must be >= 1");
}

namespace {

template <typename T>
void take(const nlohmann::json& j, const char* key, T& into) {
  if (!j.contains(key)) return;
  try {
    into = j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::InvalidConfig, std::string("config key '") + key + "': " + e.what());
  }
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  std::filesystem::path path(p);
  if (path.is_relative() && !base.empty()) return base / path;
  return path;
}

void reject_unknown(const nlohmann::json& j, const std::string& where,
                    std::initializer_list<const char*> known) {
  if (!j.is_object()) throw Error(ErrorKind::InvalidConfig, "config section '" + where + "' must be an object");
  for (const auto& [key, value] : j.items())
    if (std::none_of(known.begin(), known.end(), [&](const char* k) { return key == k; }))
      throw Error(ErrorKind::InvalidConfig, "unknown config key '" + where + key + "'");
}

}  // namespace

void merge_config(PipelineConfig& cfg, const nlohmann::json& j, const std::filesystem::path& base_dir) {
  reject_unknown(j, "", {"seed", "workers", "bounds", "worker", "eval", "fallback_feature_dim", "align", "paths"});

  take(j, "seed", cfg.seed);
  take(j, "workers", cfg.executors);
  take(j, "fallback_feature_dim", cfg.fallback_feature_dim);
  if (j.contains("align")) {
    bool align = true;
    take(j, "align", align);
    cfg.align_mode = align ? AlignMode::Procrustes : AlignMode::Identity;
  }
  if (j.contains("bounds")) {
    const auto& b = j.at("bounds");
    reject_unknown(b, "bounds.", {"lower", "upper"});
    take(b, "lower", cfg.bounds.lower);
    take(b, "upper", cfg.bounds.upper);
  }
  if (j.contains("worker")) {
    const auto& w = j.at("worker");
    reject_unknown(w, "worker.", {"dim", "layers", "epochs", "lr", "corruption_rate", "patience"});
    take(w, "dim", cfg.worker.dim);
    take(w, "layers", cfg.worker.layers);
    take(w, "epochs", cfg.worker.epochs);
    take(w, "lr", cfg.worker.lr);
    take(w, "corruption_rate", cfg.worker.corruption_rate);
    take(w, "patience", cfg.worker.patience);
  }
  if (j.contains("eval")) {
    const auto& e = j.at("eval");
    reject_unknown(e, "eval.", {"train_fraction", "hidden_link_fraction", "classifier_epochs", "classifier_lr",
                                "classifier_l2", "runs", "link_prediction"});
    take(e, "train_fraction", cfg.eval.train_fraction);
    take(e, "hidden_link_fraction", cfg.eval.hidden_link_fraction);
    take(e, "classifier_epochs", cfg.eval.classifier_epochs);
    take(e, "classifier_lr", cfg.eval.classifier_lr);
    take(e, "classifier_l2", cfg.eval.classifier_l2);
    take(e, "runs", cfg.eval.runs);
    take(e, "link_prediction", cfg.eval.link_prediction);
  }
  if (j.contains("paths")) {
    const auto& p = j.at("paths");
    reject_unknown(p, "paths.", {"edges", "features", "labels", "out"});
    std::string s;
    if (p.contains("edges")) {
      take(p, "edges", s);
      cfg.paths.edges = resolve(base_dir, s);
    }
    if (p.contains("features")) {
      take(p, "features", s);
      cfg.paths.features = resolve(base_dir, s);
    }
    if (p.contains("labels")) {
      take(p, "labels", s);
      cfg.paths.labels = resolve(base_dir, s);
    }
    if (p.contains("out")) {
      take(p, "out", s);
      cfg.paths.out = resolve(base_dir, s);
    }
  }
}

PipelineConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot open config " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::InvalidConfig, path.string() + ": " + e.what());
  }
  PipelineConfig cfg;
  merge_config(cfg, j, path.parent_path());
  return cfg;
}

nlohmann::json config_to_json(const PipelineConfig& cfg) {
  nlohmann::json j;
  j["seed"] = cfg.seed;
  j["workers"] = cfg.executors;
  j["fallback_feature_dim"] = cfg.fallback_feature_dim;
  j["align"] = cfg.align_mode == AlignMode::Procrustes;
  j["bounds"] = {{"lower", cfg.bounds.lower}, {"upper", cfg.bounds.upper}};
  j["worker"] = {{"dim", cfg.worker.dim},
                 {"layers", cfg.worker.layers},
                 {"epochs", cfg.worker.epochs},
                 {"lr", cfg.worker.lr},
                 {"corruption_rate", cfg.worker.corruption_rate},
                 {"patience", cfg.worker.patience}};
  j["eval"] = {{"train_fraction", cfg.eval.train_fraction},
               {"hidden_link_fraction", cfg.eval.hidden_link_fraction},
               {"classifier_epochs", cfg.eval.classifier_epochs},
               {"classifier_lr", cfg.eval.classifier_lr},
               {"classifier_l2", cfg.eval.classifier_l2},
               {"runs", cfg.eval.runs},
               {"link_prediction", cfg.eval.link_prediction}};
  nlohmann::json paths;
  paths["edges"] = cfg.paths.edges.string();
  if (cfg.paths.features) paths["features"] = cfg.paths.features->string();
  if (cfg.paths.labels) paths["labels"] = cfg.paths.labels->string();
  paths["out"] = cfg.paths.out.string();
  j["paths"] = paths;
  return j;
}

PartitionStage run_partition_stage(const HinGraph& g, const PipelineConfig& cfg) {
  PartitionStage stage;
  stage.buckets = generate_hyperedges(g, cfg.executors);
  stage.partitions = partition(g, stage.buckets, cfg.bounds, cfg.seed, cfg.executors,
                               cfg.fallback_feature_dim);
  const auto& parts = stage.partitions.partitions;
  if (parts.size() >= 2) {
    try {
      stage.anchor = extract_anchor_network(g, parts, cfg.bounds,
                                            static_cast<PartitionId>(parts.size()),
                                            cfg.fallback_feature_dim);
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::NoCrossPartitionNodes) throw;
      std::cerr << "warning: partitions share no nodes or edges; embedding each partition "
                   "standalone with identity alignment\n";
    }
  }
  return stage;
}

EmbedStage run_embed_stage(std::span<const Partition> partitions, const AnchorNetwork* anchor,
                           const PipelineConfig& cfg) {
  const std::size_t k = partitions.size();
  const std::size_t tasks = k + (anchor ? 1 : 0);
  std::vector<EmbeddingMatrix> results(tasks);
  std::vector<TrainTrace> traces(tasks);
  WorkerConfig worker = cfg.worker;
  worker.seed = cfg.seed;
  parallel_for(tasks, cfg.executors, [&](std::size_t i) {
    const Partition& p = i < k ? partitions[i] : anchor->partition;
    try {
      results[i] = train_worker(p, worker, &traces[i]);
    } catch (const Error& e) {
      throw Error(e.kind(), "worker for partition " + std::to_string(p.id) + " (" +
                                std::to_string(p.size()) + " nodes, epoch " +
                                std::to_string(traces[i].losses.size()) + "): " + e.what());
    }
  });
  EmbedStage stage;
  if (anchor) {
    stage.anchor_embedding = std::move(results.back());
    results.pop_back();
  }
  stage.partition_embeddings = std::move(results);
  stage.traces = std::move(traces);
  return stage;
}

EmbeddingRun embed_graph(const HinGraph& g, const PipelineConfig& cfg) {
  cfg.validate();
  EmbeddingRun run;
  run.partition = run_partition_stage(g, cfg);
  const auto& parts = run.partition.partitions.partitions;
  const AnchorNetwork* anchor = run.partition.anchor ? &*run.partition.anchor : nullptr;
  run.embed = run_embed_stage(parts, anchor, cfg);
  const EmbeddingMatrix* anchor_z = run.embed.anchor_embedding ? &*run.embed.anchor_embedding : nullptr;
  run.embeddings = align_all(run.embed.partition_embeddings, anchor_z,
                             anchor_z ? cfg.align_mode : AlignMode::Identity, &run.alignment,
                             cfg.executors);
  return run;
}

nlohmann::json Metrics::to_json() const {
  nlohmann::json j;
  auto put = [&](const char* key, const std::optional<double>& v) {
    j[key] = v ? nlohmann::json(*v) : nlohmann::json(nullptr);
  };
  put("macro_f1", macro_f1);
  put("micro_f1", micro_f1);
  put("auc", auc);
  put("avg_neighborhood_loss", avg_neighborhood_loss);
  j["per_partition"] = per_partition;
  return j;
}

Metrics evaluate_run(const HinGraph& g, const EmbeddingRun& run, const PipelineConfig& cfg) {
  Metrics m;
  const auto& parts = run.partition.partitions.partitions;
  try {
    m.avg_neighborhood_loss = avg_neighborhood_loss(g, parts, cfg.executors);
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::DegenerateDenominator) throw;
  }

  for (std::size_t i = 0; i < parts.size(); ++i) {
    nlohmann::json entry;
    entry["partition_id"] = parts[i].id;
    entry["nodes"] = parts[i].size();
    entry["origin_relations"] = parts[i].origin_relations.size();
    const auto& trace = run.embed.traces[i];
    entry["epochs"] = trace.losses.size();
    entry["final_loss"] = trace.losses.empty() ? nlohmann::json(nullptr) : nlohmann::json(trace.losses.back());
    if (i < run.alignment.partitions.size()) {
      const auto& a = run.alignment.partitions[i];
      entry["anchors"] = a.map.anchor_count;
      entry["residual"] = a.residual;
      entry["scale"] = a.map.scale;
      entry["alignment"] = to_string(a.map.status);
    }
    m.per_partition.push_back(entry);
  }

  if (g.has_labels()) {
    try {
      const auto f1 = node_classification_eval(g, run.embeddings, cfg.eval, cfg.seed);
      m.macro_f1 = f1.macro_f1;
      m.micro_f1 = f1.micro_f1;
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::InsufficientLabels) throw;
      std::cerr << "warning: node classification skipped: " << e.what() << '\n';
    }
  }

  if (cfg.eval.link_prediction) {
    if (g.edge_count() < 10) {
      std::cerr << "warning: link prediction skipped: fewer than 10 edges\n";
    } else {
      m.auc = link_prediction_eval(
          g,
          [&](const HinGraph& train_graph, std::uint64_t run_seed) {
            PipelineConfig sub = cfg;
            sub.seed = run_seed;
            return embed_graph(train_graph, sub).embeddings;
          },
          cfg.eval, cfg.seed);
    }
  }
  return m;
}

std::string format_vector(const Eigen::Ref<const Eigen::RowVectorXd>& v) {
  std::string out;
  char buf[32];
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (i) out.push_back(',');
    const auto res = std::to_chars(buf, buf + sizeof(buf), v(i));
    out.append(buf, res.ptr);
  }
  return out;
}

namespace {

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::Io, "cannot write " + path.string());
  return out;
}

Eigen::RowVectorXd parse_vector(const std::string& text, const std::filesystem::path& path,
                                std::size_t line_no) {
  std::vector<double> values;
  const char* p = text.data();
  const char* end = p + text.size();
  while (p < end) {
    double x = 0.0;
    auto [next, ec] = std::from_chars(p, end, x);
    if (ec != std::errc())
      throw Error(ErrorKind::MalformedLine, path.filename().string() + " line " + std::to_string(line_no));
    values.push_back(x);
    p = next;
    if (p < end && *p == ',') ++p;
  }
  return Eigen::Map<Eigen::RowVectorXd>(values.data(), static_cast<Eigen::Index>(values.size()));
}

std::vector<std::string> split_tab(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string field;
  while (std::getline(ss, field, '\t')) out.push_back(field);
  return out;
}

NodeId lookup(const HinGraph& g, const std::string& name) {
  const auto v = g.find_node(name);
  if (!v) throw Error(ErrorKind::UnknownNode, name);
  return *v;
}

}  // namespace

void write_embedding_dump(const HinGraph& g, std::span<const EmbeddingMatrix> matrices,
                          const std::filesystem::path& path) {
  auto out = open_out(path);
  for (const auto& m : matrices)
    for (std::size_t i = 0; i < m.node_ids.size(); ++i)
      out << g.node_name(m.node_ids[i]) << '\t' << m.partition_id << '\t'
          << format_vector(m.z.row(static_cast<Eigen::Index>(i))) << '\n';
}

std::vector<EmbeddingMatrix> read_embedding_dump(const HinGraph& g, const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot open " + path.string());
  std::map<PartitionId, std::vector<std::pair<NodeId, Eigen::RowVectorXd>>> rows;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line.front() == '#') continue;
    const auto f = split_tab(line);
    if (f.size() != 3)
      throw Error(ErrorKind::MalformedLine, path.filename().string() + " line " + std::to_string(line_no));
    const auto pid = static_cast<PartitionId>(std::stoul(f[1]));
    rows[pid].emplace_back(lookup(g, f[0]), parse_vector(f[2], path, line_no));
  }
  std::vector<EmbeddingMatrix> out;
  for (auto& [pid, entries] : rows) {
    std::sort(entries.begin(), entries.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
    EmbeddingMatrix m;
    m.partition_id = pid;
    const auto d = entries.front().second.size();
    m.z.resize(static_cast<Eigen::Index>(entries.size()), d);
    for (std::size_t i = 0; i < entries.size(); ++i) {
      if (entries[i].second.size() != d) throw Error(ErrorKind::ShapeMismatch, "embedding widths differ");
      m.node_ids.push_back(entries[i].first);
      m.z.row(static_cast<Eigen::Index>(i)) = entries[i].second;
    }
    out.push_back(std::move(m));
  }
  return out;
}

void write_final_embeddings(const HinGraph& g, const NodeEmbeddings& embeddings,
                            const std::filesystem::path& path) {
  auto out = open_out(path);
  for (const auto& [v, z] : embeddings) out << g.node_name(v) << '\t' << format_vector(z) << '\n';
}

NodeEmbeddings read_final_embeddings(const HinGraph& g, const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot open " + path.string());
  NodeEmbeddings out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line.front() == '#') continue;
    const auto f = split_tab(line);
    if (f.size() != 2)
      throw Error(ErrorKind::MalformedLine, path.filename().string() + " line " + std::to_string(line_no));
    out[lookup(g, f[0])] = parse_vector(f[1], path, line_no);
  }
  return out;
}

void write_alignment_report(const AlignmentReport& report, const std::filesystem::path& path) {
  auto out = open_out(path);
  out.precision(17);
  for (const auto& p : report.partitions)
    out << p.map.source_partition << '\t' << p.map.anchor_count << '\t' << p.residual << '\t'
        << p.map.scale << '\n';
}

void write_metrics(const Metrics& metrics, const std::filesystem::path& path) {
  auto out = open_out(path);
  out << metrics.to_json().dump(2) << '\n';
}

PipelineOutput run_pipeline(const PipelineConfig& cfg) {
  cfg.validate();
  if (cfg.paths.edges.empty()) throw Error(ErrorKind::InvalidConfig, "no edge file given");
  const auto g = load_hin(cfg.paths.edges, cfg.paths.features, cfg.paths.labels);

  const auto out_dir = cfg.paths.out;
  const auto staging = out_dir / ".staging";
  std::filesystem::create_directories(out_dir);
  std::filesystem::remove_all(staging);
  std::filesystem::create_directories(staging / "traces");
  try {
    PipelineOutput result;
    result.run = embed_graph(g, cfg);
    const auto& run = result.run;
    const auto& parts = run.partition.partitions.partitions;

    write_partition_manifest(g, parts, staging / "partitions.tsv");
    std::vector<Partition> anchor_parts;
    if (run.partition.anchor) anchor_parts.push_back(run.partition.anchor->partition);
    write_partition_manifest(g, anchor_parts, staging / "anchors.tsv");
    write_hyperedge_dump(g, run.partition.buckets, staging / "hyperedges.tsv");

    std::vector<EmbeddingMatrix> dumps = run.embed.partition_embeddings;
    if (run.embed.anchor_embedding) dumps.push_back(*run.embed.anchor_embedding);
    write_embedding_dump(g, dumps, staging / "partition_embeddings.tsv");
    for (std::size_t i = 0; i < run.embed.traces.size(); ++i) {
      const auto id = i < parts.size() ? parts[i].id : run.partition.anchor->partition.id;
      write_loss_trace(run.embed.traces[i], staging / "traces" / ("worker_" + std::to_string(id) + ".csv"));
    }
    write_alignment_report(run.alignment, staging / "alignment.tsv");
    write_final_embeddings(g, run.embeddings, staging / "embeddings.tsv");

    result.metrics = evaluate_run(g, run, cfg);
    write_metrics(result.metrics, staging / "metrics.json");

    std::filesystem::remove_all(out_dir / "traces");
    for (const auto& entry : std::filesystem::directory_iterator(staging))
      std::filesystem::rename(entry.path(), out_dir / entry.path().filename());
    std::filesystem::remove_all(staging);
    return result;
  } catch (...) {
    std::error_code ec;
    std::filesystem::remove_all(staging, ec);
    throw;
  }
}

}  // namespace hin

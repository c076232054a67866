#include "hin/graph.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

#include "hin/error.hpp"

namespace hin {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::MalformedLine: return "MalformedLine";
    case ErrorKind::DanglingFeature: return "DanglingFeature";
    case ErrorKind::DanglingLabel: return "DanglingLabel";
    case ErrorKind::EmptyGraph: return "EmptyGraph";
    case ErrorKind::UnknownRelation: return "UnknownRelation";
    case ErrorKind::UnknownNode: return "UnknownNode";
    case ErrorKind::NoBuckets: return "NoBuckets";
    case ErrorKind::NoCrossPartitionNodes: return "NoCrossPartitionNodes";
    case ErrorKind::DegenerateDenominator: return "DegenerateDenominator";
    case ErrorKind::ShapeMismatch: return "ShapeMismatch";
    case ErrorKind::NonFinite: return "NonFinite";
    case ErrorKind::NonFiniteLoss: return "NonFiniteLoss";
    case ErrorKind::TooFewAnchors: return "TooFewAnchors";
    case ErrorKind::EmptyContextList: return "EmptyContextList";
    case ErrorKind::InsufficientLabels: return "InsufficientLabels";
    case ErrorKind::TooFewEdges: return "TooFewEdges";
    case ErrorKind::InvalidConfig: return "InvalidConfig";
    case ErrorKind::Io: return "Io";
  }
  return "Unknown";
}

namespace {

std::uint64_t pair_key(NodeId a, NodeId b) {
  if (a > b) std::swap(a, b);
  return (static_cast<std::uint64_t>(a) << 32) | b;
}

std::vector<std::string_view> split_tabs(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const auto tab = line.find('\t', start);
    if (tab == std::string_view::npos) {
      fields.push_back(line.substr(start));
      break;
    }
    fields.push_back(line.substr(start, tab - start));
    start = tab + 1;
  }
  return fields;
}

std::string_view strip_cr(std::string_view line) {
  if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
  return line;
}

bool skip_line(std::string_view line) { return line.empty() || line.front() == '#'; }

std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot open " + path.string());
  return in;
}

std::ofstream open_output(const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::Io, "cannot write " + path.string());
  out.precision(17);
  return out;
}

Error malformed(const std::filesystem::path& path, std::size_t line_no, const std::string& why) {
  return Error(ErrorKind::MalformedLine,
               path.filename().string() + " line " + std::to_string(line_no) + ": " + why);
}

}  // namespace

std::optional<NodeId> HinGraph::find_node(std::string_view name) const {
  auto it = node_lookup_.find(std::string(name));
  if (it == node_lookup_.end()) return std::nullopt;
  return it->second;
}

std::optional<RelationId> HinGraph::find_relation(std::string_view name) const {
  auto it = relation_lookup_.find(std::string(name));
  if (it == relation_lookup_.end()) return std::nullopt;
  return it->second;
}

std::span<const double> HinGraph::features(NodeId v) const {
  if (feature_dim_ == 0) return {};
  return std::span<const double>(features_).subspan(static_cast<std::size_t>(v) * feature_dim_,
                                                    feature_dim_);
}

std::span<const LabelId> HinGraph::labels(NodeId v) const {
  if (labels_.empty()) return {};
  return labels_.at(v);
}

std::span<const Incidence> HinGraph::incident(NodeId v) const {
  return std::span<const Incidence>(incidence_)
      .subspan(inc_offsets_.at(v), inc_offsets_.at(v + 1) - inc_offsets_[v]);
}

std::size_t HinGraph::degree(NodeId v) const {
  std::size_t count = 0;
  NodeId last = v;
  for (const auto& inc : incident(v)) {
    if (inc.neighbor != last) ++count;
    last = inc.neighbor;
  }
  return count;
}

void HinGraph::finalize() {
  const std::size_t n = node_names_.size();
  std::vector<std::size_t> counts(n + 1, 0);
  for (const auto& e : edges_) {
    if (e.src == e.dst) continue;
    ++counts[e.src + 1];
    ++counts[e.dst + 1];
  }
  for (std::size_t i = 0; i < n; ++i) counts[i + 1] += counts[i];
  inc_offsets_ = counts;
  incidence_.assign(counts[n], Incidence{0, 0});
  std::vector<std::size_t> cursor(counts.begin(), counts.end() - 1);
  for (const auto& e : edges_) {
    if (e.src == e.dst) continue;
    incidence_[cursor[e.src]++] = {e.dst, e.rel};
    incidence_[cursor[e.dst]++] = {e.src, e.rel};
  }
  for (std::size_t v = 0; v < n; ++v) {
    std::sort(incidence_.begin() + static_cast<std::ptrdiff_t>(inc_offsets_[v]),
              incidence_.begin() + static_cast<std::ptrdiff_t>(inc_offsets_[v + 1]),
              [](const Incidence& a, const Incidence& b) {
                return a.neighbor != b.neighbor ? a.neighbor < b.neighbor : a.rel < b.rel;
              });
  }
}

HinGraph HinGraph::with_edges(std::vector<Edge> edges) const {
  HinGraph g = *this;
  g.edges_.clear();
  std::unordered_map<std::uint64_t, std::vector<RelationId>> seen;
  for (const auto& e : edges) {
    if (e.src >= node_count() || e.dst >= node_count())
      throw Error(ErrorKind::UnknownNode, "edge endpoint out of range");
    if (e.rel >= relation_count()) throw Error(ErrorKind::UnknownRelation, std::to_string(e.rel));
    auto& rels = seen[pair_key(e.src, e.dst)];
    if (std::find(rels.begin(), rels.end(), e.rel) != rels.end()) continue;
    rels.push_back(e.rel);
    g.edges_.push_back(e);
  }
  g.finalize();
  return g;
}

NodeId HinBuilder::add_node(std::string_view name, std::string_view type) {
  if (auto it = g_.node_lookup_.find(std::string(name)); it != g_.node_lookup_.end()) {
    const auto& existing = g_.type_names_[g_.node_types_[it->second]];
    if (existing != type)
      throw Error(ErrorKind::MalformedLine, "node " + std::string(name) + " has type " + existing +
                                                " and " + std::string(type));
    return it->second;
  }
  auto [tit, inserted] =
      type_lookup_.try_emplace(std::string(type), static_cast<NodeTypeId>(g_.type_names_.size()));
  if (inserted) g_.type_names_.emplace_back(type);
  const auto id = static_cast<NodeId>(g_.node_names_.size());
  g_.node_names_.emplace_back(name);
  g_.node_types_.push_back(tit->second);
  g_.node_lookup_.emplace(std::string(name), id);
  return id;
}

RelationId HinBuilder::add_relation(std::string_view name) {
  auto [it, inserted] = g_.relation_lookup_.try_emplace(
      std::string(name), static_cast<RelationId>(g_.relation_names_.size()));
  if (inserted) g_.relation_names_.emplace_back(name);
  return it->second;
}

bool HinBuilder::add_edge(NodeId src, NodeId dst, RelationId rel) {
  if (src >= g_.node_names_.size() || dst >= g_.node_names_.size())
    throw Error(ErrorKind::UnknownNode, "edge endpoint out of range");
  if (rel >= g_.relation_names_.size()) throw Error(ErrorKind::UnknownRelation, std::to_string(rel));
  auto& rels = seen_pairs_[pair_key(src, dst)];
  if (std::find(rels.begin(), rels.end(), rel) != rels.end()) return false;
  rels.push_back(rel);
  g_.edges_.push_back({src, dst, rel});
  return true;
}

bool HinBuilder::add_edge(std::string_view src, std::string_view src_type, std::string_view rel,
                          std::string_view dst, std::string_view dst_type) {
  const NodeId s = add_node(src, src_type);
  const RelationId r = add_relation(rel);
  const NodeId d = add_node(dst, dst_type);
  return add_edge(s, d, r);
}

void HinBuilder::set_features(NodeId v, std::span<const double> values) {
  if (v >= g_.node_names_.size()) throw Error(ErrorKind::DanglingFeature, std::to_string(v));
  if (pending_features_.size() < g_.node_names_.size()) pending_features_.resize(g_.node_names_.size());
  pending_features_[v].assign(values.begin(), values.end());
}

void HinBuilder::add_label(NodeId v, std::string_view label) {
  if (v >= g_.node_names_.size()) throw Error(ErrorKind::DanglingLabel, std::to_string(v));
  auto [it, inserted] =
      label_lookup_.try_emplace(std::string(label), static_cast<LabelId>(g_.label_names_.size()));
  if (inserted) g_.label_names_.emplace_back(label);
  if (g_.labels_.size() < g_.node_names_.size()) g_.labels_.resize(g_.node_names_.size());
  auto& set = g_.labels_[v];
  if (std::find(set.begin(), set.end(), it->second) == set.end()) {
    set.push_back(it->second);
    std::sort(set.begin(), set.end());
  }
}

std::optional<NodeId> HinBuilder::find_node(std::string_view name) const {
  return g_.find_node(name);
}

HinGraph HinBuilder::build() {
  if (g_.node_names_.empty()) throw Error(ErrorKind::EmptyGraph, "no nodes");
  const std::size_t n = g_.node_names_.size();
  if (!g_.labels_.empty()) g_.labels_.resize(n);

  std::size_t dim = 0;
  for (const auto& row : pending_features_) {
    if (row.empty()) continue;
    if (dim == 0) dim = row.size();
    if (row.size() != dim)
      throw Error(ErrorKind::ShapeMismatch, "feature rows have dimensions " + std::to_string(dim) +
                                                " and " + std::to_string(row.size()));
  }
  g_.feature_dim_ = dim;
  g_.features_.assign(n * dim, 0.0);
  for (std::size_t v = 0; v < pending_features_.size(); ++v)
    std::copy(pending_features_[v].begin(), pending_features_[v].end(),
              g_.features_.begin() + static_cast<std::ptrdiff_t>(v * dim));

  g_.finalize();
  HinGraph out = std::move(g_);
  *this = HinBuilder();
  return out;
}

HinGraph load_hin(const std::filesystem::path& edge_path,
                  const std::optional<std::filesystem::path>& feature_path,
                  const std::optional<std::filesystem::path>& label_path) {
  HinBuilder builder;
  {
    auto in = open_input(edge_path);
    std::string raw;
    std::size_t line_no = 0;
    while (std::getline(in, raw)) {
      ++line_no;
      const auto line = strip_cr(raw);
      if (skip_line(line)) continue;
      const auto f = split_tabs(line);
      if (f.size() != 5 || std::any_of(f.begin(), f.end(), [](auto s) { return s.empty(); }))
        throw malformed(edge_path, line_no, "expected 5 non-empty tab-separated fields");
      try {
        builder.add_edge(f[0], f[1], f[2], f[3], f[4]);
      } catch (const Error& e) {
        throw malformed(edge_path, line_no, e.what());
      }
    }
  }
  if (builder.node_count() == 0) throw Error(ErrorKind::EmptyGraph, edge_path.string());

  if (feature_path) {
    auto in = open_input(*feature_path);
    std::string raw;
    std::size_t line_no = 0;
    std::vector<double> values;
    while (std::getline(in, raw)) {
      ++line_no;
      const auto line = strip_cr(raw);
      if (skip_line(line)) continue;
      const auto f = split_tabs(line);
      if (f.size() != 2 || f[0].empty() || f[1].empty())
        throw malformed(*feature_path, line_no, "expected node_id<TAB>comma-separated values");
      const auto v = builder.find_node(f[0]);
      if (!v) throw Error(ErrorKind::DanglingFeature, "unknown node " + std::string(f[0]));
      values.clear();
      std::string_view rest = f[1];
      while (true) {
        const auto comma = rest.find(',');
        const auto tok = rest.substr(0, comma);
        double x = 0.0;
        const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), x);
        if (ec != std::errc() || ptr != tok.data() + tok.size())
          throw malformed(*feature_path, line_no, "bad number '" + std::string(tok) + "'");
        values.push_back(x);
        if (comma == std::string_view::npos) break;
        rest.remove_prefix(comma + 1);
      }
      builder.set_features(*v, values);
    }
  }

  if (label_path) {
    auto in = open_input(*label_path);
    std::string raw;
    std::size_t line_no = 0;
    while (std::getline(in, raw)) {
      ++line_no;
      const auto line = strip_cr(raw);
      if (skip_line(line)) continue;
      const auto f = split_tabs(line);
      if (f.size() != 2 || f[0].empty() || f[1].empty())
        throw malformed(*label_path, line_no, "expected node_id<TAB>label");
      const auto v = builder.find_node(f[0]);
      if (!v) throw Error(ErrorKind::DanglingLabel, "unknown node " + std::string(f[0]));
      builder.add_label(*v, f[1]);
    }
  }
  return builder.build();
}

void save_edges(const HinGraph& g, const std::filesystem::path& path) {
  auto out = open_output(path);
  for (const auto& e : g.edges()) {
    out << g.node_name(e.src) << '\t' << g.node_type_name(g.node_type(e.src)) << '\t'
        << g.relation_name(e.rel) << '\t' << g.node_name(e.dst) << '\t'
        << g.node_type_name(g.node_type(e.dst)) << '\n';
  }
}

void save_features(const HinGraph& g, const std::filesystem::path& path) {
  auto out = open_output(path);
  for (NodeId v = 0; v < g.node_count(); ++v) {
    const auto row = g.features(v);
    out << g.node_name(v) << '\t';
    for (std::size_t i = 0; i < row.size(); ++i) out << (i ? "," : "") << row[i];
    out << '\n';
  }
}

void save_labels(const HinGraph& g, const std::filesystem::path& path) {
  auto out = open_output(path);
  for (NodeId v = 0; v < g.node_count(); ++v)
    for (auto l : g.labels(v)) out << g.node_name(v) << '\t' << g.label_name(l) << '\n';
}

std::vector<std::pair<NodeId, NodeId>> relation_subgraph(const HinGraph& g, RelationId r) {
  if (r >= g.relation_count()) throw Error(ErrorKind::UnknownRelation, std::to_string(r));
  std::vector<std::pair<NodeId, NodeId>> out;
  for (const auto& e : g.edges())
    if (e.rel == r) out.emplace_back(e.src, e.dst);
  return out;
}

NeighborhoodSet neighborhood(const HinGraph& g, NodeId v, RelationId r) {
  if (v >= g.node_count()) throw Error(ErrorKind::UnknownNode, std::to_string(v));
  if (r >= g.relation_count()) throw Error(ErrorKind::UnknownRelation, std::to_string(r));
  NeighborhoodSet out{v, r, {}};
  for (const auto& inc : g.incident(v))
    if (inc.rel == r) out.neighbors.push_back(inc.neighbor);
  return out;
}

bool SparsePattern::contains(std::size_t i, std::size_t j) const {
  const auto first = cols.begin() + static_cast<std::ptrdiff_t>(row_ptr[i]);
  const auto last = cols.begin() + static_cast<std::ptrdiff_t>(row_ptr[i + 1]);
  return std::binary_search(first, last, static_cast<std::uint32_t>(j));
}

std::optional<std::size_t> Partition::local_index(NodeId v) const {
  auto it = std::lower_bound(node_ids.begin(), node_ids.end(), v);
  if (it == node_ids.end() || *it != v) return std::nullopt;
  return static_cast<std::size_t>(it - node_ids.begin());
}

Partition induce_partition(const HinGraph& g, std::span<const NodeId> node_ids, PartitionId id,
                           std::size_t fallback_dim) {
  Partition p;
  p.id = id;
  p.node_ids.assign(node_ids.begin(), node_ids.end());
  std::sort(p.node_ids.begin(), p.node_ids.end());
  p.node_ids.erase(std::unique(p.node_ids.begin(), p.node_ids.end()), p.node_ids.end());
  for (auto v : p.node_ids)
    if (v >= g.node_count()) throw Error(ErrorKind::UnknownNode, std::to_string(v));

  const std::size_t n = p.node_ids.size();
  auto& adj = p.adjacency;
  adj.rows = n;
  adj.row_ptr.assign(1, 0);
  std::vector<std::uint32_t> row;
  for (std::size_t i = 0; i < n; ++i) {
    row.clear();
    row.push_back(static_cast<std::uint32_t>(i));
    for (const auto& inc : g.incident(p.node_ids[i]))
      if (auto j = p.local_index(inc.neighbor)) row.push_back(static_cast<std::uint32_t>(*j));
    std::sort(row.begin(), row.end());
    row.erase(std::unique(row.begin(), row.end()), row.end());
    adj.cols.insert(adj.cols.end(), row.begin(), row.end());
    adj.row_ptr.push_back(adj.cols.size());
  }

  if (g.has_features()) {
    p.features.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(g.feature_dim()));
    for (std::size_t i = 0; i < n; ++i) {
      const auto row_values = g.features(p.node_ids[i]);
      for (std::size_t k = 0; k < row_values.size(); ++k)
        p.features(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = row_values[k];
    }
  } else {
    const std::size_t dim = std::max<std::size_t>(fallback_dim, 1);
    p.features = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(dim));
    for (std::size_t i = 0; i < n; ++i)
      p.features(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i % dim)) = 1.0;
  }
  return p;
}

}  // namespace hin

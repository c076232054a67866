#include "hin/infomax.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <unordered_set>

#include "hin/error.hpp"

namespace hin {

void WorkerConfig::validate() const {
  if (dim < 1) throw Error(ErrorKind::InvalidConfig, "dim must be >= 1");
  if (layers < 1) throw Error(ErrorKind::InvalidConfig, "layers must be >= 1");
  if (!(lr > 0.0)) throw Error(ErrorKind::InvalidConfig, "lr must be > 0");
  if (!(corruption_rate >= 0.0 && corruption_rate <= 1.0))
    throw Error(ErrorKind::InvalidConfig, "corruption_rate must lie in [0, 1]");
}

namespace {

Eigen::MatrixXd uniform_matrix(Eigen::Index rows, Eigen::Index cols, double bound, Rng& rng) {
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = rng.uniform(-bound, bound);
  return m;
}

}  // namespace

WorkerParams WorkerParams::init(std::size_t input_dim, const WorkerConfig& cfg, Rng& rng) {
  const auto d = static_cast<Eigen::Index>(cfg.dim);
  WorkerParams p;
  Eigen::Index fan_in = static_cast<Eigen::Index>(input_dim);
  for (std::size_t l = 0; l < cfg.layers; ++l) {
    p.weights.push_back(uniform_matrix(fan_in, d, 1.0 / std::sqrt(static_cast<double>(fan_in)), rng));
    p.slopes.push_back(0.25);
    fan_in = d;
  }
  p.disc_weight = uniform_matrix(2 * d, d, 1.0 / std::sqrt(2.0 * static_cast<double>(d)), rng);
  p.disc_bias = Eigen::RowVectorXd::Zero(d);
  p.projection = uniform_matrix(1, d, 1.0 / std::sqrt(static_cast<double>(d)), rng);
  p.disc_slope = 0.25;
  return p;
}

WorkerParams WorkerParams::zeros_like(const WorkerParams& like) {
  WorkerParams p;
  for (const auto& w : like.weights) p.weights.push_back(Eigen::MatrixXd::Zero(w.rows(), w.cols()));
  p.slopes.assign(like.slopes.size(), 0.0);
  p.disc_weight = Eigen::MatrixXd::Zero(like.disc_weight.rows(), like.disc_weight.cols());
  p.disc_bias = Eigen::RowVectorXd::Zero(like.disc_bias.size());
  p.projection = Eigen::RowVectorXd::Zero(like.projection.size());
  p.disc_slope = 0.0;
  return p;
}

Eigen::VectorXd WorkerParams::flatten() const {
  Eigen::Index total = 0;
  for (const auto& w : weights) total += w.size();
  total += static_cast<Eigen::Index>(slopes.size()) + disc_weight.size() + disc_bias.size() +
           projection.size() + 1;
  Eigen::VectorXd flat(total);
  Eigen::Index at = 0;
  auto put = [&](const auto& m) {
    flat.segment(at, m.size()) = Eigen::Map<const Eigen::VectorXd>(m.data(), m.size());
    at += m.size();
  };
  for (const auto& w : weights) put(w);
  for (double s : slopes) flat(at++) = s;
  put(disc_weight);
  put(disc_bias);
  put(projection);
  flat(at++) = disc_slope;
  return flat;
}

void WorkerParams::assign(const Eigen::VectorXd& flat) {
  Eigen::Index at = 0;
  auto take = [&](auto& m) {
    Eigen::Map<Eigen::VectorXd>(m.data(), m.size()) = flat.segment(at, m.size());
    at += m.size();
  };
  for (auto& w : weights) take(w);
  for (double& s : slopes) s = flat(at++);
  take(disc_weight);
  take(disc_bias);
  take(projection);
  disc_slope = flat(at++);
  if (at != flat.size()) throw Error(ErrorKind::ShapeMismatch, "flat parameter vector size");
}

SparseMatrix normalized_adjacency(const SparsePattern& a) {
  const auto n = static_cast<Eigen::Index>(a.rows);
  std::vector<double> inv_sqrt(a.rows);
  for (std::size_t i = 0; i < a.rows; ++i)
    inv_sqrt[i] = 1.0 / std::sqrt(static_cast<double>(a.row_ptr[i + 1] - a.row_ptr[i]));
  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(a.nnz());
  for (std::size_t i = 0; i < a.rows; ++i)
    for (auto k = a.row_ptr[i]; k < a.row_ptr[i + 1]; ++k)
      triplets.emplace_back(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(a.cols[k]),
                            inv_sqrt[i] * inv_sqrt[a.cols[k]]);
  SparseMatrix m(n, n);
  m.setFromTriplets(triplets.begin(), triplets.end());
  return m;
}

double prelu(double x, double slope) { return x > 0.0 ? x : slope * x; }

namespace {

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

Eigen::MatrixXd prelu(const Eigen::MatrixXd& x, double slope) {
  return x.unaryExpr([slope](double v) { return hin::prelu(v, slope); });
}

struct EncoderCache {
  std::vector<Eigen::MatrixXd> propagated;  // Â H_{k-1}
  std::vector<Eigen::MatrixXd> pre;         // Â H_{k-1} W_k
  Eigen::MatrixXd out;
};

void check_shapes(const Eigen::MatrixXd& x, const SparsePattern& a, const WorkerParams& params) {
  if (static_cast<std::size_t>(x.rows()) != a.rows)
    throw Error(ErrorKind::ShapeMismatch, "feature rows " + std::to_string(x.rows()) +
                                              " vs adjacency rows " + std::to_string(a.rows));
  if (params.weights.empty() || x.cols() != params.weights.front().rows())
    throw Error(ErrorKind::ShapeMismatch, "feature width does not match first layer");
}

EncoderCache encode(const SparseMatrix& a_hat, const Eigen::MatrixXd& x, const WorkerParams& params) {
  EncoderCache cache;
  Eigen::MatrixXd h = x;
  for (std::size_t k = 0; k < params.weights.size(); ++k) {
    cache.propagated.push_back(a_hat * h);
    cache.pre.push_back(cache.propagated.back() * params.weights[k]);
    h = prelu(cache.pre.back(), params.slopes[k]);
  }
  cache.out = std::move(h);
  return cache;
}

// Accumulates encoder gradients for upstream gradient d_out.
void encode_backward(const SparseMatrix& a_hat, const EncoderCache& cache, const WorkerParams& params,
                     Eigen::MatrixXd d_out, WorkerParams& grad) {
  for (std::size_t k = params.weights.size(); k-- > 0;) {
    const auto& pre = cache.pre[k];
    const double slope = params.slopes[k];
    Eigen::MatrixXd d_pre(pre.rows(), pre.cols());
    double d_slope = 0.0;
    for (Eigen::Index j = 0; j < pre.cols(); ++j) {
      for (Eigen::Index i = 0; i < pre.rows(); ++i) {
        const double v = pre(i, j);
        if (v > 0.0) {
          d_pre(i, j) = d_out(i, j);
        } else {
          d_pre(i, j) = slope * d_out(i, j);
          d_slope += d_out(i, j) * v;
        }
      }
    }
    grad.slopes[k] += d_slope;
    grad.weights[k].noalias() += cache.propagated[k].transpose() * d_pre;
    if (k > 0) d_out = a_hat * (d_pre * params.weights[k].transpose());
  }
}

struct DiscriminatorPass {
  Eigen::MatrixXd pre;     // [z, s] W_D + b
  Eigen::MatrixXd hidden;  // PReLU(pre)
  Eigen::VectorXd scores;
};

DiscriminatorPass discriminate(const Eigen::MatrixXd& z, const Eigen::RowVectorXd& s,
                               const WorkerParams& params) {
  const auto d = z.cols();
  DiscriminatorPass pass;
  const Eigen::RowVectorXd shared = s * params.disc_weight.bottomRows(d) + params.disc_bias;
  pass.pre = z * params.disc_weight.topRows(d);
  pass.pre.rowwise() += shared;
  pass.hidden = prelu(pass.pre, params.disc_slope);
  const Eigen::VectorXd logits = pass.hidden * params.projection.transpose();
  pass.scores = logits.unaryExpr([](double q) { return sigmoid(q); });
  return pass;
}

// d_logits -> parameter gradients; returns dZ and accumulates dS.
Eigen::MatrixXd discriminate_backward(const Eigen::MatrixXd& z, const Eigen::RowVectorXd& s,
                                      const DiscriminatorPass& pass, const Eigen::VectorXd& d_logits,
                                      const WorkerParams& params, WorkerParams& grad,
                                      Eigen::RowVectorXd& d_s) {
  const auto d = z.cols();
  grad.projection.noalias() += d_logits.transpose() * pass.hidden;
  Eigen::MatrixXd d_pre = d_logits * params.projection;
  for (Eigen::Index j = 0; j < d_pre.cols(); ++j) {
    for (Eigen::Index i = 0; i < d_pre.rows(); ++i) {
      const double v = pass.pre(i, j);
      if (v <= 0.0) {
        grad.disc_slope += d_pre(i, j) * v;
        d_pre(i, j) *= params.disc_slope;
      }
    }
  }
  const Eigen::RowVectorXd col_sum = d_pre.colwise().sum();
  grad.disc_weight.topRows(d).noalias() += z.transpose() * d_pre;
  grad.disc_weight.bottomRows(d).noalias() += s.transpose() * col_sum;
  grad.disc_bias += col_sum;
  d_s.noalias() += col_sum * params.disc_weight.bottomRows(d).transpose();
  return d_pre * params.disc_weight.topRows(d).transpose();
}

double clamp_score(double p) { return std::clamp(p, kScoreEpsilon, 1.0 - kScoreEpsilon); }

bool all_finite(const Eigen::MatrixXd& m) { return m.allFinite(); }

}  // namespace

Eigen::MatrixXd gcn_forward(const Eigen::MatrixXd& x, const SparsePattern& a,
                            const WorkerParams& params) {
  check_shapes(x, a, params);
  auto out = encode(normalized_adjacency(a), x, params).out;
  if (!all_finite(out)) throw Error(ErrorKind::NonFinite, "encoder produced a non-finite value");
  return out;
}

Eigen::RowVectorXd readout(const Eigen::MatrixXd& z) {
  const Eigen::RowVectorXd mean = z.colwise().mean();
  return mean.unaryExpr([](double v) { return sigmoid(v); });
}

double discriminator(const Eigen::RowVectorXd& z, const Eigen::RowVectorXd& s,
                     const WorkerParams& params) {
  const auto d = static_cast<Eigen::Index>(params.dim());
  if (z.size() != d || s.size() != d || params.disc_weight.rows() != 2 * d ||
      params.disc_weight.cols() != d || params.disc_bias.size() != d)
    throw Error(ErrorKind::ShapeMismatch, "discriminator inputs");
  return discriminate(Eigen::MatrixXd(z), s, params).scores(0);
}

CorruptedGraph corrupt(const SparsePattern& a, const Eigen::MatrixXd& x, double rate, Rng& rng) {
  const std::size_t n = a.rows;
  std::vector<std::pair<std::uint32_t, std::uint32_t>> edges;
  for (std::size_t i = 0; i < n; ++i)
    for (auto k = a.row_ptr[i]; k < a.row_ptr[i + 1]; ++k)
      if (a.cols[k] > i) edges.emplace_back(static_cast<std::uint32_t>(i), a.cols[k]);

  const std::size_t edge_count = edges.size();
  const auto remove =
      std::min(edge_count, static_cast<std::size_t>(std::ceil(rate * static_cast<double>(edge_count) - 1e-9)));

  std::vector<std::pair<std::uint32_t, std::uint32_t>> result;
  if (remove > 0) {
    // Partial Fisher-Yates: the first `remove` slots are the deleted edges.
    for (std::size_t i = 0; i < remove; ++i) {
      const std::size_t j = i + rng.below(edge_count - i);
      std::swap(edges[i], edges[j]);
    }
    result.assign(edges.begin() + static_cast<std::ptrdiff_t>(remove), edges.end());

    const std::size_t total_pairs = n * (n - 1) / 2;
    const std::size_t absent = total_pairs - edge_count;
    const std::size_t insert = std::min(remove, absent);
    if (insert > 0) {
      if (total_pairs <= 200000 || absent <= 4 * insert) {
        std::vector<std::pair<std::uint32_t, std::uint32_t>> candidates;
        candidates.reserve(absent);
        for (std::size_t i = 0; i < n; ++i)
          for (std::size_t j = i + 1; j < n; ++j)
            if (!a.contains(i, j))
              candidates.emplace_back(static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(j));
        for (std::size_t i = 0; i < insert; ++i) {
          const std::size_t j = i + rng.below(candidates.size() - i);
          std::swap(candidates[i], candidates[j]);
          result.push_back(candidates[i]);
        }
      } else {
        std::unordered_set<std::uint64_t> chosen;
        while (chosen.size() < insert) {
          auto u = static_cast<std::uint32_t>(rng.below(n));
          auto v = static_cast<std::uint32_t>(rng.below(n));
          if (u == v) continue;
          if (u > v) std::swap(u, v);
          if (a.contains(u, v)) continue;
          if (chosen.insert((static_cast<std::uint64_t>(u) << 32) | v).second) result.emplace_back(u, v);
        }
      }
    }
  } else {
    result = std::move(edges);
  }

  std::vector<std::vector<std::uint32_t>> adj(n);
  for (const auto& [u, v] : result) {
    adj[u].push_back(v);
    adj[v].push_back(u);
  }
  CorruptedGraph out;
  std::vector<std::uint32_t> remap(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    if (adj[i].empty()) continue;
    remap[i] = static_cast<std::uint32_t>(out.kept.size());
    out.kept.push_back(i);
  }
  auto& pat = out.adjacency;
  pat.rows = out.kept.size();
  pat.row_ptr.assign(1, 0);
  std::vector<std::uint32_t> row;
  for (auto i : out.kept) {
    row.assign(1, remap[i]);
    for (auto j : adj[i]) row.push_back(remap[j]);
    std::sort(row.begin(), row.end());
    row.erase(std::unique(row.begin(), row.end()), row.end());
    pat.cols.insert(pat.cols.end(), row.begin(), row.end());
    pat.row_ptr.push_back(pat.cols.size());
  }
  out.features.resize(static_cast<Eigen::Index>(out.kept.size()), x.cols());
  for (std::size_t r = 0; r < out.kept.size(); ++r)
    out.features.row(static_cast<Eigen::Index>(r)) = x.row(static_cast<Eigen::Index>(out.kept[r]));
  return out;
}

double dgi_loss(std::span<const double> pos_scores, std::span<const double> neg_scores) {
  const double total = static_cast<double>(pos_scores.size() + neg_scores.size());
  if (total == 0.0) return 0.0;
  double sum = 0.0;
  for (double p : pos_scores) sum += std::log(clamp_score(p));
  for (double q : neg_scores) sum += std::log(1.0 - clamp_score(q));
  return -sum / total;
}

LossAndGradient dgi_loss_and_gradient(const Eigen::MatrixXd& x, const SparsePattern& a,
                                      const CorruptedGraph& negative, const WorkerParams& params) {
  check_shapes(x, a, params);
  const auto a_hat = normalized_adjacency(a);
  const auto pos_cache = encode(a_hat, x, params);
  const Eigen::MatrixXd& z = pos_cache.out;
  const Eigen::RowVectorXd s = readout(z);
  const auto pos = discriminate(z, s, params);

  const bool has_negatives = negative.adjacency.rows > 0;
  SparseMatrix neg_hat;
  EncoderCache neg_cache;
  DiscriminatorPass neg;
  if (has_negatives) {
    neg_hat = normalized_adjacency(negative.adjacency);
    neg_cache = encode(neg_hat, negative.features, params);
    neg = discriminate(neg_cache.out, s, params);
  }

  LossAndGradient result;
  result.loss = dgi_loss(std::span<const double>(pos.scores.data(), static_cast<std::size_t>(pos.scores.size())),
                         std::span<const double>(neg.scores.data(), static_cast<std::size_t>(neg.scores.size())));
  if (!std::isfinite(result.loss)) throw Error(ErrorKind::NonFiniteLoss, "loss is not finite");

  const double total = static_cast<double>(pos.scores.size() + neg.scores.size());
  result.gradient = WorkerParams::zeros_like(params);
  auto& grad = result.gradient;
  Eigen::RowVectorXd d_s = Eigen::RowVectorXd::Zero(s.size());

  // d(-log p)/dq = -(1 - p); d(-log(1 - p))/dq = p. Clamped scores are flat.
  Eigen::VectorXd d_pos_logits = pos.scores.unaryExpr([total](double p) {
    return (p < kScoreEpsilon || p > 1.0 - kScoreEpsilon) ? 0.0 : -(1.0 - p) / total;
  });
  Eigen::MatrixXd d_z = discriminate_backward(z, s, pos, d_pos_logits, params, grad, d_s);

  if (has_negatives) {
    Eigen::VectorXd d_neg_logits = neg.scores.unaryExpr([total](double p) {
      return (p < kScoreEpsilon || p > 1.0 - kScoreEpsilon) ? 0.0 : p / total;
    });
    Eigen::MatrixXd d_neg_z =
        discriminate_backward(neg_cache.out, s, neg, d_neg_logits, params, grad, d_s);
    encode_backward(neg_hat, neg_cache, params, std::move(d_neg_z), grad);
  }

  const Eigen::RowVectorXd d_mean =
      (d_s.array() * s.array() * (1.0 - s.array())).matrix() / static_cast<double>(z.rows());
  d_z.rowwise() += d_mean;
  encode_backward(a_hat, pos_cache, params, std::move(d_z), grad);
  return result;
}

double dgi_objective(const Eigen::MatrixXd& x, const SparsePattern& a,
                     const CorruptedGraph& negative, const WorkerParams& params) {
  check_shapes(x, a, params);
  const Eigen::MatrixXd z = encode(normalized_adjacency(a), x, params).out;
  const Eigen::RowVectorXd s = readout(z);
  const auto pos = discriminate(z, s, params);
  Eigen::VectorXd neg_scores;
  if (negative.adjacency.rows > 0) {
    const auto neg_z = encode(normalized_adjacency(negative.adjacency), negative.features, params).out;
    neg_scores = discriminate(neg_z, s, params).scores;
  }
  return dgi_loss(std::span<const double>(pos.scores.data(), static_cast<std::size_t>(pos.scores.size())),
                  std::span<const double>(neg_scores.data(), static_cast<std::size_t>(neg_scores.size())));
}

EmbeddingMatrix train_worker(const Partition& p, const WorkerConfig& cfg, TrainTrace* trace) {
  cfg.validate();
  if (p.size() == 0) throw Error(ErrorKind::ShapeMismatch, "empty partition");
  Rng rng(cfg.seed ^ static_cast<std::uint64_t>(p.id));
  WorkerParams params = WorkerParams::init(static_cast<std::size_t>(p.features.cols()), cfg, rng);

  double best = std::numeric_limits<double>::infinity();
  std::size_t stalled = 0;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto negative = corrupt(p.adjacency, p.features, cfg.corruption_rate, rng);
    const auto step = dgi_loss_and_gradient(p.features, p.adjacency, negative, params);
    if (trace) trace->losses.push_back(step.loss);
    params.assign(params.flatten() - cfg.lr * step.gradient.flatten());

    if (step.loss < best - 1e-4) {
      best = step.loss;
      stalled = 0;
    } else if (++stalled >= cfg.patience) {
      if (trace) trace->early_stopped = true;
      break;
    }
  }

  EmbeddingMatrix out;
  out.partition_id = p.id;
  out.node_ids = p.node_ids;
  out.z = gcn_forward(p.features, p.adjacency, params);
  return out;
}

void write_loss_trace(const TrainTrace& trace, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::Io, "cannot write " + path.string());
  out.precision(17);
  out << "epoch,loss\n";
  for (std::size_t i = 0; i < trace.losses.size(); ++i) out << i << ',' << trace.losses[i] << '\n';
}

}  // namespace hin

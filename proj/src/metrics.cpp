#include "unisparse/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace unisparse {

namespace {

std::uint64_t ceil_log2(std::uint64_t n) {
  std::uint64_t bits = 0;
  while ((std::uint64_t(1) << bits) < n) ++bits;
  return bits;
}

// Descending by value, ties ascending by index: the selection order.
std::vector<int> argsort_desc(std::span<const double> v) {
  std::vector<int> order(v.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return v[a] > v[b]; });
  return order;
}

std::vector<double> average_ranks(std::span<const double> v) {
  const int n = int(v.size());
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return v[a] < v[b]; });
  std::vector<double> ranks(n);
  int i = 0;
  while (i < n) {
    int j = i;
    while (j + 1 < n && v[order[j + 1]] == v[order[i]]) ++j;
    const double r = 0.5 * (i + j) + 1.0;
    for (int t = i; t <= j; ++t) ranks[order[t]] = r;
    i = j + 1;
  }
  return ranks;
}

}  // namespace

FlopBreakdown selection_flops(std::uint64_t L, std::uint64_t H, std::uint64_t d_k,
                              std::uint64_t S, const CompressionConfig& cfg, ProxyTag proxy,
                              std::uint64_t stride) {
  if (L == 0 || H == 0 || d_k == 0 || S == 0 || L % S != 0)
    throw std::invalid_argument("selection_flops: bad dimensions");
  const std::uint64_t N = L / S;
  FlopBreakdown f;
  f.dense_attention = 4 * L * L * H * d_k;
  switch (proxy) {
    case ProxyTag::UniSparse: {
      const std::uint64_t cq = std::uint64_t(cfg.c_q), ck = std::uint64_t(cfg.c_k),
                          ch = std::uint64_t(cfg.c_h);
      if (cq == 0 || ck == 0 || ch == 0 || S % cq != 0 || S % ck != 0 || H % ch != 0)
        throw std::invalid_argument("selection_flops: bad compression factors");
      f.compression = 2 * L * H * d_k;
      if (ch > 1) f.compression += 2 * (L / cq + L / ck) * H * d_k;
      f.compressed_qk = 2 * (L / cq) * (L / ck) * (H / ch) * d_k;
      f.softmax_aggregation = 4 * (L / cq) * (L / ck) * (H / ch);
      f.top_p = (H / ch) * N * N * ceil_log2(N);
      break;
    }
    case ProxyTag::Antidiagonal: {
      if (stride == 0 || S % stride != 0)
        throw std::invalid_argument("selection_flops: stride must divide S");
      f.compressed_qk = 2 * L * (L / stride) * H * d_k;
      f.softmax_aggregation = 2 * L * (L / stride) * H;
      f.top_p = H * N * N * ceil_log2(N);
      break;
    }
    case ProxyTag::LastBlockProbe: {
      f.compressed_qk = 2 * S * L * H * d_k;
      f.softmax_aggregation = 2 * S * L * H;
      f.top_p = H * N * N * ceil_log2(N);
      break;
    }
  }
  return f;
}

std::uint64_t sparse_attention_flops(const BlockMask& mask, std::uint64_t S, std::uint64_t d_k) {
  return std::uint64_t(mask.selected_total()) * 4 * S * S * d_k;
}

std::vector<double> sparsity_ratio(const BlockMask& mask) {
  const double causal_total = double(mask.N) * (mask.N + 1) / 2.0;
  std::vector<double> rho(mask.H);
  for (int h = 0; h < mask.H; ++h)
    rho[h] = 1.0 - double(mask.selected_in_head(h)) / causal_total;
  return rho;
}

double sparsity_ratio_mean(const BlockMask& mask) {
  const auto rho = sparsity_ratio(mask);
  return std::accumulate(rho.begin(), rho.end(), 0.0) / double(rho.size());
}

std::optional<double> spearman_rho(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw std::invalid_argument("spearman_rho: length mismatch");
  if (a.size() < 2) throw std::invalid_argument("spearman_rho: need at least 2 values");
  const auto ra = average_ranks(a);
  const auto rb = average_ranks(b);
  const double n = double(a.size());
  const double mean = (n + 1.0) / 2.0;
  double va = 0.0, vb = 0.0, cov = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double da = ra[i] - mean, db = rb[i] - mean;
    va += da * da;
    vb += db * db;
    cov += da * db;
  }
  if (va == 0.0 || vb == 0.0) return std::nullopt;
  return cov / std::sqrt(va * vb);
}

FidelityStats output_fidelity(const HeadStack<float>& test, const HeadStack<float>& ref) {
  if (test.size() != ref.size() || test.empty())
    throw std::invalid_argument("output_fidelity: head count mismatch");
  FidelityStats s;
  double rel_sum = 0.0, cos_sum = 0.0;
  std::int64_t entries = 0, rows = 0;
  for (std::size_t h = 0; h < test.size(); ++h) {
    if (test[h].rows() != ref[h].rows() || test[h].cols() != ref[h].cols())
      throw std::invalid_argument("output_fidelity: shape mismatch");
    for (Index r = 0; r < test[h].rows(); ++r) {
      double dot = 0.0, nt = 0.0, nr = 0.0;
      for (Index c = 0; c < test[h].cols(); ++c) {
        const double t = test[h](r, c), rf = ref[h](r, c);
        const double d = std::abs(t - rf);
        s.max_abs = std::max(s.max_abs, d);
        rel_sum += d / std::max(std::abs(rf), 1e-6);
        ++entries;
        dot += t * rf;
        nt += t * t;
        nr += rf * rf;
      }
      if (nt == 0.0 && nr == 0.0)
        cos_sum += 1.0;
      else if (nt == 0.0 || nr == 0.0)
        cos_sum += 0.0;
      else
        cos_sum += dot / std::sqrt(nt * nr);
      ++rows;
    }
  }
  s.mean_rel = rel_sum / double(entries);
  s.cosine = cos_sum / double(rows);
  return s;
}

double block_recall(const BlockMask& mask, const BlockScoreMatrix& reference, int k) {
  if (int(reference.score.size()) != mask.H)
    throw std::invalid_argument("block_recall: reference must hold one plane per mask head");
  if (k < 1 || k > mask.N) throw std::invalid_argument("block_recall: k out of range");
  double sum = 0.0;
  std::int64_t rows = 0;
  std::vector<double> prefix;
  for (int h = 0; h < mask.H; ++h) {
    for (int i = 0; i < mask.N; ++i) {
      const int k_eff = std::min(k, i + 1);
      prefix.assign(reference.score[h].row(i).data(), reference.score[h].row(i).data() + i + 1);
      const auto order = argsort_desc(prefix);
      int hit = 0;
      for (int t = 0; t < k_eff; ++t) hit += mask.mask[h](i, order[t]) ? 1 : 0;
      sum += double(hit) / double(k_eff);
      ++rows;
    }
  }
  return sum / double(rows);
}

double planted_recall(const BlockMask& mask,
                      const std::vector<std::vector<std::vector<int>>>& planted) {
  if (int(planted.size()) != mask.H)
    throw std::invalid_argument("planted_recall: planted must hold one list set per head");
  double sum = 0.0;
  std::int64_t rows = 0;
  for (int h = 0; h < mask.H; ++h) {
    for (int i = 0; i < mask.N && i < int(planted[h].size()); ++i) {
      const auto& want = planted[h][i];
      if (want.empty()) continue;
      int hit = 0;
      for (int j : want) hit += mask.mask[h](i, j) ? 1 : 0;
      sum += double(hit) / double(want.size());
      ++rows;
    }
  }
  if (rows == 0) throw std::invalid_argument("planted_recall: no planted rows");
  return sum / double(rows);
}

RowSpearman mean_row_spearman(const BlockScoreMatrix& proxy, const BlockScoreMatrix& reference,
                              int c_h) {
  const int H = int(reference.score.size());
  if (c_h <= 0 || H % c_h != 0 || proxy.score.size() != std::size_t(H / c_h))
    throw std::invalid_argument("mean_row_spearman: head counts disagree");
  if (proxy.geom.N != reference.geom.N)
    throw std::invalid_argument("mean_row_spearman: block counts disagree");
  const int N = proxy.geom.N;
  RowSpearman out;
  out.per_row = MatrixRMd::Constant(H, N, std::numeric_limits<double>::quiet_NaN());
  double sum = 0.0;
  std::vector<double> a, b;
  for (int h = 0; h < H; ++h) {
    const auto& p = proxy.score[h / c_h];
    const auto& r = reference.score[h];
    for (int i = 1; i < N; ++i) {
      a.assign(p.row(i).data(), p.row(i).data() + i + 1);
      b.assign(r.row(i).data(), r.row(i).data() + i + 1);
      const auto rho = spearman_rho(a, b);
      if (rho) {
        out.per_row(h, i) = *rho;
        sum += *rho;
        ++out.defined;
      } else {
        ++out.undefined;
      }
    }
  }
  out.mean = out.defined ? sum / double(out.defined) : 0.0;
  return out;
}

SparsityReport make_sparsity_report(BlockMask mask, const FlopBreakdown& selection,
                                    std::uint64_t S, std::uint64_t d_k) {
  SparsityReport rep;
  rep.rho = sparsity_ratio(mask);
  rep.rho_mean = sparsity_ratio_mean(mask);
  rep.selected.reserve(mask.H);
  for (int h = 0; h < mask.H; ++h) rep.selected.push_back(mask.selected_in_head(h));
  rep.flops = selection;
  rep.flops.sparse_attention = sparse_attention_flops(mask, S, d_k);
  rep.mask = std::move(mask);
  return rep;
}

}  // namespace unisparse

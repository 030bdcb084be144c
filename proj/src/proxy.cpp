#include "unisparse/proxy.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

namespace unisparse {

CompressedAttention compressed_attention(const CompressedViews& views, CausalMode mode) {
  if (views.Q.empty() || views.K.empty())
    throw std::invalid_argument("compressed_attention: empty views");
  if (views.d_k <= 0) throw std::invalid_argument("compressed_attention: d_k must be positive");
  const int c_q = views.cfg.c_q;
  const int c_k = views.cfg.c_k;
  const double inv_scale = 1.0 / std::sqrt(double(views.d_k));

  CompressedAttention out;
  out.c_q = c_q;
  out.c_k = c_k;
  out.mode = mode;
  out.A.reserve(views.Q.size());
  for (std::size_t h = 0; h < views.Q.size(); ++h) {
    if (views.Q[h].cols() != views.K[h].cols())
      throw std::invalid_argument("compressed_attention: Q/K column mismatch");
    MatrixRMd logits =
        (views.Q[h].cast<double>() * views.K[h].cast<double>().transpose()) * inv_scale;
    for (Index t = 0; t < logits.rows(); ++t) {
      auto row = logits.row(t).array();
      Index live = logits.cols();
      if (mode == CausalMode::PreSoftmaxCompressedCausal) {
        // (t', s') stays live iff the last original query under t' can attend
        // the first original key under s'; the masked columns are a suffix.
        const std::int64_t last_q = std::int64_t(t + 1) * c_q - 1;
        live = std::min<Index>(live, Index(last_q / c_k) + 1);
      }
      auto head = row.head(live);
      const double m = head.maxCoeff();
      head = (head - m).exp();
      head /= head.sum();
      row.tail(logits.cols() - live).setZero();
    }
    out.A.push_back(std::move(logits));
  }
  return out;
}

BlockScoreMatrix block_aggregate(const CompressedAttention& attn, const BlockGeometry& geom) {
  if (attn.A.empty()) throw std::invalid_argument("block_aggregate: empty attention");
  if (attn.c_q != geom.c_q || attn.c_k != geom.c_k)
    throw std::invalid_argument("block_aggregate: geometry compression factors disagree");
  if (attn.A[0].rows() != geom.comp_q_len() || attn.A[0].cols() != geom.comp_k_len())
    throw std::invalid_argument("block_aggregate: attention shape disagrees with geometry");

  const int N = geom.N;
  BlockScoreMatrix out;
  out.geom = geom;
  out.score.reserve(attn.A.size());
  for (const auto& A : attn.A) {
    MatrixRMd score(N, N);
    for (int i = 0; i < N; ++i) {
      const int q0 = geom.query_region_begin(i), q1 = geom.query_region_end(i);
      for (int j = 0; j < N; ++j) {
        const int k0 = geom.key_region_begin(j), k1 = geom.key_region_end(j);
        score(i, j) = A.block(q0, k0, q1 - q0, k1 - k0).sum();
      }
      for (int j = i + 1; j < N; ++j) score(i, j) = kMaskedScore;
    }
    out.score.push_back(std::move(score));
  }
  return out;
}

void dump_scores_csv(const BlockScoreMatrix& scores, const std::filesystem::path& dir,
                     const std::string& prefix) {
  std::filesystem::create_directories(dir);
  for (std::size_t h = 0; h < scores.score.size(); ++h) {
    std::ofstream os(dir / (prefix + "_h" + std::to_string(h) + ".csv"));
    if (!os) throw std::runtime_error("dump_scores_csv: cannot open output in " + dir.string());
    const auto& m = scores.score[h];
    char buf[32];
    for (Index i = 0; i < m.rows(); ++i) {
      for (Index j = 0; j < m.cols(); ++j) {
        std::snprintf(buf, sizeof(buf), "%.9g", m(i, j));
        os << (j ? "," : "") << buf;
      }
      os << "\n";
    }
  }
}

}  // namespace unisparse

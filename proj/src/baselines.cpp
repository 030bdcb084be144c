#include "unisparse/baselines.hpp"

#include "unisparse/attention.hpp"
#include "unisparse/compression.hpp"

#include <cmath>

namespace unisparse {

BlockScoreMatrix antidiagonal_block_scores(const AttentionInputs& in, int stride) {
  CompressionConfig unit;
  unit.c_q = unit.c_k = unit.c_h = 1;
  ValidationResult v = validate_inputs(in, unit);
  if (!v.ok()) throw std::invalid_argument("antidiagonal_block_scores: " + v.joined());
  if (stride <= 0 || in.S % stride != 0)
    throw std::invalid_argument("antidiagonal_block_scores: stride must divide S");

  const int L = in.L, S = in.S, N = L / S, d_k = in.d_k;
  const double inv_scale = 1.0 / std::sqrt(double(d_k));

  BlockScoreMatrix out;
  out.geom = BlockGeometry::make(L, S, 1, 1);
  out.score.reserve(in.H);
  std::vector<double> probs;
  for (int h = 0; h < in.H; ++h) {
    MatrixRMd score = MatrixRMd::Zero(N, N);
    const MatrixRMf& K = in.K[h];
    for (int t = 0; t < L; ++t) {
      const int q = t % S;
      const int res = (S - 1 - q) % stride;
      if (res > t) continue;  // no causal sample on this row
      const int cnt = (t - res) / stride + 1;
      Eigen::Map<const MatrixRMf, Eigen::Unaligned, Eigen::OuterStride<>> sampled(
          K.data() + Index(res) * d_k, cnt, d_k, Eigen::OuterStride<>(Index(stride) * d_k));
      const VectorX<double> qd = in.Q[h].row(t).cast<double>();
      VectorX<double> logits = (sampled.cast<double>() * qd) * inv_scale;
      const double m = logits.maxCoeff();
      probs.resize(cnt);
      double den = 0.0;
      for (int s = 0; s < cnt; ++s) {
        probs[s] = std::exp(logits[s] - m);
        den += probs[s];
      }
      const int i = t / S;
      for (int s = 0; s < cnt; ++s) score(i, (res + s * stride) / S) += probs[s] / den;
    }
    for (int i = 0; i < N; ++i)
      for (int j = i + 1; j < N; ++j) score(i, j) = kMaskedScore;
    out.score.push_back(std::move(score));
  }
  return out;
}

BlockScoreMatrix last_block_probe_scores(const AttentionInputs& in) {
  CompressionConfig unit;
  unit.c_q = unit.c_k = unit.c_h = 1;
  ValidationResult v = validate_inputs(in, unit);
  if (!v.ok()) throw std::invalid_argument("last_block_probe_scores: " + v.joined());

  const int L = in.L, S = in.S, N = L / S;
  const double inv_scale = 1.0 / std::sqrt(double(in.d_k));

  BlockScoreMatrix out;
  out.geom = BlockGeometry::make(L, S, 1, 1);
  out.score.reserve(in.H);
  for (int h = 0; h < in.H; ++h) {
    MatrixRMd logits =
        (in.Q[h].bottomRows(S).cast<double>() * in.K[h].cast<double>().transpose()) * inv_scale;
    VectorX<double> colmass = VectorX<double>::Zero(N);
    for (int r = 0; r < S; ++r) {
      auto row = logits.row(r).array();
      const int live = (N - 1) * S + r + 1;
      const double m = row.head(live).maxCoeff();
      row.head(live) = (row.head(live) - m).exp();
      const double den = row.head(live).sum();
      for (int j = 0; j < N; ++j) {
        const int len = std::min(S, live - j * S);
        if (len > 0) colmass(j) += row.segment(j * S, len).sum() / den;
      }
    }
    MatrixRMd score(N, N);
    for (int i = 0; i < N; ++i)
      for (int j = 0; j < N; ++j) score(i, j) = j <= i ? colmass(j) : kMaskedScore;
    out.score.push_back(std::move(score));
  }
  return out;
}

BlockScoreMatrix proxy_scores(ProxyTag proxy, const AttentionInputs& in,
                              const CompressionConfig& cfg, int stride) {
  switch (proxy) {
    case ProxyTag::UniSparse: {
      const CompressedViews views = compress(in, cfg);
      const CompressedAttention attn = compressed_attention(views, cfg.causal_mode);
      return block_aggregate(attn, BlockGeometry::make(in.L, in.S, cfg.c_q, cfg.c_k));
    }
    case ProxyTag::Antidiagonal:
      return antidiagonal_block_scores(in, stride);
    case ProxyTag::LastBlockProbe:
      return last_block_probe_scores(in);
  }
  throw std::invalid_argument("proxy_scores: unknown proxy");
}

}  // namespace unisparse

#include "unisparse/attention.hpp"

#include <cmath>

namespace unisparse {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void require_valid(const AttentionInputs& in, const char* who) {
  CompressionConfig unit;
  unit.c_q = unit.c_k = unit.c_h = 1;
  ValidationResult v = validate_inputs(in, unit);
  if (!v.ok()) throw std::invalid_argument(std::string(who) + ": " + v.joined());
}

}  // namespace

AttentionOutput dense_attention(const AttentionInputs& in, bool causal) {
  require_valid(in, "dense_attention");
  const int L = in.L, d_k = in.d_k;
  const double inv_scale = 1.0 / std::sqrt(double(d_k));
  const int chunk = std::min(L, 128);

  AttentionOutput out;
  out.O.reserve(in.H);
  out.lse.reserve(in.H);
  for (int h = 0; h < in.H; ++h) {
    const MatrixRMd Qd = in.Q[h].cast<double>();
    const MatrixRMd Kd = in.K[h].cast<double>();
    const MatrixRMd Vd = in.V[h].cast<double>();
    MatrixRMd O(L, d_k);
    VectorX<double> lse(L);
    for (int r0 = 0; r0 < L; r0 += chunk) {
      const int rows = std::min(chunk, L - r0);
      MatrixRMd logits = (Qd.middleRows(r0, rows) * Kd.transpose()) * inv_scale;
      for (int r = 0; r < rows; ++r) {
        auto row = logits.row(r).array();
        const int live = causal ? r0 + r + 1 : L;
        const double m = row.head(live).maxCoeff();
        row.head(live) = (row.head(live) - m).exp();
        if (live < L) row.tail(L - live).setZero();
        const double den = row.head(live).sum();
        row /= den;
        lse(r0 + r) = m + std::log(den);
      }
      O.middleRows(r0, rows) = logits * Vd;
    }
    out.O.push_back(O.cast<float>());
    out.lse.push_back(std::move(lse));
  }
  return out;
}

BlockScoreMatrix exact_block_mass(const AttentionInputs& in) {
  require_valid(in, "exact_block_mass");
  const int L = in.L, S = in.S, N = L / S;
  const double inv_scale = 1.0 / std::sqrt(double(in.d_k));

  BlockScoreMatrix out;
  out.geom = BlockGeometry::make(L, S, 1, 1);
  out.score.reserve(in.H);
  for (int h = 0; h < in.H; ++h) {
    const MatrixRMd Qd = in.Q[h].cast<double>();
    const MatrixRMd Kd = in.K[h].cast<double>();
    MatrixRMd score = MatrixRMd::Zero(N, N);
    for (int i = 0; i < N; ++i) {
      MatrixRMd logits = (Qd.middleRows(i * S, S) * Kd.transpose()) * inv_scale;
      for (int r = 0; r < S; ++r) {
        auto row = logits.row(r).array();
        const int live = i * S + r + 1;
        const double m = row.head(live).maxCoeff();
        row.head(live) = (row.head(live) - m).exp();
        const double den = row.head(live).sum();
        for (int j = 0; j <= i; ++j) {
          const int k0 = j * S;
          const int len = std::min(S, live - k0);
          if (len > 0) score(i, j) += row.segment(k0, len).sum() / den;
        }
      }
      for (int j = i + 1; j < N; ++j) score(i, j) = kMaskedScore;
    }
    out.score.push_back(std::move(score));
  }
  return out;
}

AttentionOutput block_sparse_attention(const AttentionInputs& in, const BlockMask& mask) {
  require_valid(in, "block_sparse_attention");
  const int L = in.L, S = in.S, d_k = in.d_k, N = L / S;
  if (mask.H != in.H || mask.N != N)
    throw std::invalid_argument("block_sparse_attention: mask shape disagrees with inputs");
  const double inv_scale = 1.0 / std::sqrt(double(d_k));

  AttentionOutput out;
  out.O.reserve(in.H);
  out.lse.reserve(in.H);
  for (int h = 0; h < in.H; ++h) {
    const MatrixRMd Qd = in.Q[h].cast<double>();
    const MatrixRMd Kd = in.K[h].cast<double>();
    const MatrixRMd Vd = in.V[h].cast<double>();
    MatrixRMd O(L, d_k);
    VectorX<double> lse(L);
    for (int i = 0; i < N; ++i) {
      for (int j = i + 1; j < N; ++j)
        if (mask.mask[h](i, j))
          throw std::invalid_argument("block_sparse_attention: mask selects a non-causal block");
      bool any = false;
      VectorX<double> m = VectorX<double>::Constant(S, -kInf);
      VectorX<double> den = VectorX<double>::Zero(S);
      MatrixRMd acc = MatrixRMd::Zero(S, d_k);
      for (int j = 0; j <= i; ++j) {
        if (!mask.mask[h](i, j)) continue;
        any = true;
        MatrixRMd tile = (Qd.middleRows(i * S, S) * Kd.middleRows(j * S, S).transpose()) * inv_scale;
        if (j == i)
          for (int r = 0; r + 1 < S; ++r) tile.row(r).tail(S - r - 1).setConstant(-kInf);
        VectorX<double> m_new = m.cwiseMax(tile.rowwise().maxCoeff());
        VectorX<double> scale(S);
        for (int r = 0; r < S; ++r) scale(r) = den(r) == 0.0 ? 0.0 : std::exp(m(r) - m_new(r));
        MatrixRMd e = (tile.array().colwise() - m_new.array()).exp().matrix();
        den = den.cwiseProduct(scale) + e.rowwise().sum();
        acc = (acc.array().colwise() * scale.array()).matrix() + e * Vd.middleRows(j * S, S);
        m = std::move(m_new);
      }
      if (!any)
        throw std::invalid_argument("block_sparse_attention: query block " + std::to_string(i) +
                                    " has no selected key block");
      O.middleRows(i * S, S) = acc.array().colwise() / den.array();
      lse.segment(i * S, S) = m.array() + den.array().log();
    }
    out.O.push_back(O.cast<float>());
    out.lse.push_back(std::move(lse));
  }
  return out;
}

}  // namespace unisparse

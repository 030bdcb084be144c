#pragma once

#include "unisparse/selection.hpp"
#include "unisparse/types.hpp"

#include <optional>
#include <span>

namespace unisparse {

// All counts are exact 64-bit integers; one fused multiply-add counts as two
// FLOPs. dense_attention is the full-square comparison figure
// 2*L^2*H*d_k (QK^T) + 2*L^2*H*d_k (AV); sparse_attention counts selected
// blocks at 4*S^2*d_k each, i.e. the causal block-granular dense cost scaled
// by (1 - rho).
struct FlopBreakdown {
  std::uint64_t compression = 0;
  std::uint64_t compressed_qk = 0;
  std::uint64_t softmax_aggregation = 0;
  std::uint64_t top_p = 0;
  std::uint64_t sparse_attention = 0;
  std::uint64_t dense_attention = 0;

  std::uint64_t selection_total() const {
    return compression + compressed_qk + softmax_aggregation + top_p;
  }
};

// Selection-phase cost of a proxy. stride only applies to the anti-diagonal
// proxy. sparse_attention is left zero; fill it from the realized mask.
FlopBreakdown selection_flops(std::uint64_t L, std::uint64_t H, std::uint64_t d_k,
                              std::uint64_t S, const CompressionConfig& cfg, ProxyTag proxy,
                              std::uint64_t stride = 8);

std::uint64_t sparse_attention_flops(const BlockMask& mask, std::uint64_t S, std::uint64_t d_k);

// rho per head: 1 - selected / (N(N+1)/2), exact from counts.
std::vector<double> sparsity_ratio(const BlockMask& mask);
double sparsity_ratio_mean(const BlockMask& mask);

// Spearman rank correlation with average ranks for ties. nullopt when either
// side has zero rank variance. Throws on length mismatch or length < 2.
std::optional<double> spearman_rho(std::span<const double> a, std::span<const double> b);

struct FidelityStats {
  double max_abs = 0.0;
  double mean_rel = 0.0;  // |t - r| / max(|r|, 1e-6), averaged
  double cosine = 1.0;    // per-row cosine, averaged
};

FidelityStats output_fidelity(const HeadStack<float>& test, const HeadStack<float>& ref);

// Fraction of the reference top-k blocks (per causal row, k clipped to the
// row length, ties broken by ascending index) present in the mask, averaged
// over rows and heads. reference must hold one plane per mask head.
double block_recall(const BlockMask& mask, const BlockScoreMatrix& reference, int k);

// Fraction of each row's planted key blocks present in the mask, averaged
// over rows with a nonempty planted list. planted is [head][query block].
double planted_recall(const BlockMask& mask,
                      const std::vector<std::vector<std::vector<int>>>& planted);

// Per-row Spearman between proxy scores and a per-head reference over each
// causal prefix. Proxy plane g serves original heads [g*c_h, (g+1)*c_h).
// per_row holds NaN where the correlation is undefined (row 0, or tied-flat
// prefixes); mean averages the defined entries.
struct RowSpearman {
  double mean = 0.0;
  MatrixRMd per_row;  // H x N
  int defined = 0;
  int undefined = 0;
};

RowSpearman mean_row_spearman(const BlockScoreMatrix& proxy, const BlockScoreMatrix& reference,
                              int c_h);

struct SparsityReport {
  std::vector<double> rho;
  double rho_mean = 0.0;
  std::vector<std::int64_t> selected;
  FlopBreakdown flops;
  BlockMask mask;
};

SparsityReport make_sparsity_report(BlockMask mask, const FlopBreakdown& selection,
                                    std::uint64_t S, std::uint64_t d_k);

}  // namespace unisparse

#pragma once

#include "unisparse/compression.hpp"
#include "unisparse/types.hpp"

#include <filesystem>

namespace unisparse {

// Row-stochastic attention over compressed tokens, one plane per compressed
// head. Rows are softmaxed with max subtraction and double accumulation.
struct CompressedAttention {
  HeadStack<double> A;  // (L/c_q) x (L/c_k) each
  int c_q = 1;
  int c_k = 1;
  CausalMode mode = CausalMode::PostSoftmaxBlockCausal;
};

CompressedAttention compressed_attention(const CompressedViews& views, CausalMode mode);

// Block-level importance scores, one N x N plane per compressed head.
// Causal: entries with key block > query block hold kMaskedScore.
struct BlockScoreMatrix {
  HeadStack<double> score;
  BlockGeometry geom;
};

// Sums A over the compressed-index region of every (query block, key block)
// pair, then masks j > i.
BlockScoreMatrix block_aggregate(const CompressedAttention& attn, const BlockGeometry& geom);

// Debug dump, one CSV per head: row = query block, column = key block.
void dump_scores_csv(const BlockScoreMatrix& scores, const std::filesystem::path& dir,
                     const std::string& prefix);

}  // namespace unisparse

#pragma once

#include "unisparse/selection.hpp"
#include "unisparse/types.hpp"

namespace unisparse {

struct AttentionOutput {
  HeadStack<float> O;  // L x d_k per head
  // Per-row log-sum-exp of the attended logits, diagnostic.
  std::vector<VectorX<double>> lse;
};

// Exact softmax(Q K^T / sqrt(d_k)) V per head, max-subtracted and
// double-accumulated, processed in row chunks.
AttentionOutput dense_attention(const AttentionInputs& in, bool causal = true);

// Exact causal attention probabilities aggregated per (query block, key
// block): the reference ranking that compressed scores approximate. One
// N x N plane per original head; entries with j > i hold kMaskedScore.
BlockScoreMatrix exact_block_mass(const AttentionInputs& in);

// Streaming-softmax attention over the selected blocks of each query row,
// ascending key-block order, with running max, rescaled accumulators, and
// token-level causality inside diagonal blocks. Output rows match the dense
// path on their selected key set.
AttentionOutput block_sparse_attention(const AttentionInputs& in, const BlockMask& mask);

}  // namespace unisparse

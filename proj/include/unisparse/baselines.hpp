#pragma once

#include "unisparse/proxy.hpp"
#include "unisparse/types.hpp"

namespace unisparse {

// Anti-diagonal probe: per query token with in-block offset q, the sampled
// key offsets are (S - 1 - q + r) mod S for r in {0, stride, ..., S-stride},
// repeated in every causal key block. Softmax is taken over the sampled
// causal logits of the whole row, then summed per key block. stride == 1
// samples everything and reproduces exact block-aggregated attention mass.
BlockScoreMatrix antidiagonal_block_scores(const AttentionInputs& in, int stride);

// Last-block probe: exact causal attention of the final query block against
// all keys, aggregated per key block into one column-importance vector and
// replicated to every query row, clipped by causality.
BlockScoreMatrix last_block_probe_scores(const AttentionInputs& in);

// Uniform entry point used by the experiment driver. Baseline proxies emit
// one plane per original head; the compressed proxy emits H / c_h planes.
BlockScoreMatrix proxy_scores(ProxyTag proxy, const AttentionInputs& in,
                              const CompressionConfig& cfg, int stride = 8);

}  // namespace unisparse

#pragma once

#include "unisparse/attention.hpp"
#include "unisparse/baselines.hpp"
#include "unisparse/metrics.hpp"

namespace unisparse {

struct UniSparseResult {
  AttentionOutput out;
  SparsityReport report;
};

// Full pipeline: compress Q/K, score compressed attention, aggregate per
// block, select Top-P blocks per causal row, run block-sparse attention.
UniSparseResult unisparse_attn(const AttentionInputs& in, const CompressionConfig& cfg);

// Selection and report only (any proxy), without running sparse attention.
SparsityReport select_blocks(ProxyTag proxy, const AttentionInputs& in,
                             const CompressionConfig& cfg, int stride = 8);

}  // namespace unisparse

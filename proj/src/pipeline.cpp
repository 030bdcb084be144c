#include "unisparse/pipeline.hpp"

namespace unisparse {

SparsityReport select_blocks(ProxyTag proxy, const AttentionInputs& in,
                             const CompressionConfig& cfg, int stride) {
  ValidationResult v = validate_inputs(in, cfg);
  if (!v.ok()) throw std::invalid_argument("select_blocks: " + v.joined());
  const BlockScoreMatrix scores = proxy_scores(proxy, in, cfg, stride);
  const int c_h = proxy == ProxyTag::UniSparse ? cfg.c_h : 1;
  BlockMask mask = build_block_mask(scores, cfg.P, c_h, in.H);
  const FlopBreakdown flops =
      selection_flops(std::uint64_t(in.L), std::uint64_t(in.H), std::uint64_t(in.d_k),
                      std::uint64_t(in.S), cfg, proxy, std::uint64_t(stride));
  return make_sparsity_report(std::move(mask), flops, std::uint64_t(in.S),
                              std::uint64_t(in.d_k));
}

UniSparseResult unisparse_attn(const AttentionInputs& in, const CompressionConfig& cfg) {
  UniSparseResult r;
  r.report = select_blocks(ProxyTag::UniSparse, in, cfg);
  r.out = block_sparse_attention(in, r.report.mask);
  return r;
}

}  // namespace unisparse

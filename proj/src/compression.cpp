#include "unisparse/compression.hpp"

namespace unisparse {

CompressedViews compress(const AttentionInputs& in, const CompressionConfig& cfg) {
  ValidationResult v = validate_inputs(in, cfg);
  if (!v.ok()) throw std::invalid_argument("compress: " + v.joined());

  CompressedViews out;
  out.cfg = cfg;
  out.d_k = in.d_k;
  out.L = in.L;
  out.H = in.H;
  out.Q.reserve(in.H);
  out.K.reserve(in.H);
  for (int h = 0; h < in.H; ++h) {
    out.Q.push_back(
        pool_sequence(in.Q[h], cfg.c_q, cfg.strategy, chain_seed(cfg.seed, 0, std::uint64_t(h))));
    out.K.push_back(
        pool_sequence(in.K[h], cfg.c_k, cfg.strategy, chain_seed(cfg.seed, 1, std::uint64_t(h))));
  }
  out.Q = pool_heads(out.Q, cfg.c_h);
  out.K = pool_heads(out.K, cfg.c_h);
  return out;
}

}  // namespace unisparse

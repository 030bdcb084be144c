#include "unisparse/types.hpp"

#include <sstream>

namespace unisparse {

std::string to_string(PoolStrategy s) {
  switch (s) {
    case PoolStrategy::Mean: return "mean";
    case PoolStrategy::Max: return "max";
    case PoolStrategy::Stochastic: return "stochastic";
  }
  return "?";
}

std::string to_string(CausalMode m) {
  switch (m) {
    case CausalMode::PostSoftmaxBlockCausal: return "post-softmax-block-causal";
    case CausalMode::PreSoftmaxCompressedCausal: return "pre-softmax-compressed-causal";
  }
  return "?";
}

std::string to_string(ProxyTag p) {
  switch (p) {
    case ProxyTag::UniSparse: return "unisparse";
    case ProxyTag::Antidiagonal: return "antidiagonal";
    case ProxyTag::LastBlockProbe: return "last_block_probe";
  }
  return "?";
}

PoolStrategy parse_pool_strategy(const std::string& s) {
  if (s == "mean") return PoolStrategy::Mean;
  if (s == "max") return PoolStrategy::Max;
  if (s == "stochastic") return PoolStrategy::Stochastic;
  throw std::invalid_argument("unknown pool strategy: " + s);
}

CausalMode parse_causal_mode(const std::string& s) {
  if (s == "post-softmax-block-causal") return CausalMode::PostSoftmaxBlockCausal;
  if (s == "pre-softmax-compressed-causal") return CausalMode::PreSoftmaxCompressedCausal;
  throw std::invalid_argument("unknown causal mode: " + s);
}

ProxyTag parse_proxy_tag(const std::string& s) {
  if (s == "unisparse") return ProxyTag::UniSparse;
  if (s == "antidiagonal") return ProxyTag::Antidiagonal;
  if (s == "last_block_probe") return ProxyTag::LastBlockProbe;
  throw std::invalid_argument("unknown proxy: " + s);
}

BlockGeometry BlockGeometry::make(int L, int S, int c_q, int c_k) {
  if (L <= 0 || S <= 0 || c_q <= 0 || c_k <= 0)
    throw std::invalid_argument("BlockGeometry: dimensions must be positive");
  if (L % S != 0) throw std::invalid_argument("BlockGeometry: L must be divisible by S");
  if (S % c_q != 0) throw std::invalid_argument("BlockGeometry: S must be divisible by c_q");
  if (S % c_k != 0) throw std::invalid_argument("BlockGeometry: S must be divisible by c_k");
  BlockGeometry g;
  g.L = L;
  g.S = S;
  g.N = L / S;
  g.c_q = c_q;
  g.c_k = c_k;
  return g;
}

std::string ValidationResult::joined() const {
  std::ostringstream os;
  for (std::size_t i = 0; i < errors.size(); ++i) {
    if (i) os << "; ";
    os << errors[i];
  }
  return os.str();
}

namespace {

void check_stack(const HeadStack<float>& t, const char* name, int H, int L, int d_k,
                 std::vector<std::string>& errors) {
  if (int(t.size()) != H) {
    errors.push_back(std::string(name) + ": expected " + std::to_string(H) + " heads, got " +
                     std::to_string(t.size()));
    return;
  }
  for (int h = 0; h < H; ++h) {
    if (t[h].rows() != L || t[h].cols() != d_k) {
      errors.push_back(std::string(name) + "[" + std::to_string(h) + "]: expected " +
                       std::to_string(L) + "x" + std::to_string(d_k) + ", got " +
                       std::to_string(t[h].rows()) + "x" + std::to_string(t[h].cols()));
    }
  }
}

}  // namespace

ValidationResult validate_inputs(const AttentionInputs& in, const CompressionConfig& cfg) {
  ValidationResult r;
  auto& e = r.errors;
  if (in.H <= 0) e.push_back("H must be positive");
  if (in.L <= 0) e.push_back("L must be positive");
  if (in.d_k <= 0) e.push_back("d_k must be positive");
  if (in.S <= 0) e.push_back("S must be positive");
  if (in.L > 0 && in.S > 0 && in.L % in.S != 0)
    e.push_back("L=" + std::to_string(in.L) + " not divisible by S=" + std::to_string(in.S));
  if (cfg.c_q <= 0) e.push_back("c_q must be positive");
  if (cfg.c_k <= 0) e.push_back("c_k must be positive");
  if (cfg.c_h <= 0) e.push_back("c_h must be positive");
  if (in.S > 0 && cfg.c_q > 0 && in.S % cfg.c_q != 0)
    e.push_back("S=" + std::to_string(in.S) + " not divisible by c_q=" + std::to_string(cfg.c_q));
  if (in.S > 0 && cfg.c_k > 0 && in.S % cfg.c_k != 0)
    e.push_back("S=" + std::to_string(in.S) + " not divisible by c_k=" + std::to_string(cfg.c_k));
  if (in.H > 0 && cfg.c_h > 0 && in.H % cfg.c_h != 0)
    e.push_back("H=" + std::to_string(in.H) + " not divisible by c_h=" + std::to_string(cfg.c_h));
  if (!(cfg.P > 0.0) || cfg.P > 1.0)
    e.push_back("P must lie in (0, 1]");
  if (in.H > 0 && in.L > 0 && in.d_k > 0) {
    check_stack(in.Q, "Q", in.H, in.L, in.d_k, e);
    check_stack(in.K, "K", in.H, in.L, in.d_k, e);
    check_stack(in.V, "V", in.H, in.L, in.d_k, e);
  }
  return r;
}

}  // namespace unisparse

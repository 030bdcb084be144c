#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace unisparse {

using Index = Eigen::Index;

template <typename Scalar>
using MatrixRM = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using MatrixRMf = MatrixRM<float>;
using MatrixRMd = MatrixRM<double>;

// One matrix per attention head.
template <typename Scalar>
using HeadStack = std::vector<MatrixRM<Scalar>>;

using MaskPlane = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Finite stand-in for -inf in stored score matrices: sorts below any real
// score and survives arithmetic without producing NaNs.
constexpr double kMaskedScore = -std::numeric_limits<float>::max();

enum class PoolStrategy { Mean, Max, Stochastic };

enum class CausalMode {
  // Softmax over all compressed keys, causality applied to block scores only.
  PostSoftmaxBlockCausal,
  // Compressed logit (t', s') masked before softmax unless the last original
  // query under t' can attend the first original key under s'.
  PreSoftmaxCompressedCausal,
};

// Which proxy produces the block scores a mask is built from.
enum class ProxyTag { UniSparse, Antidiagonal, LastBlockProbe };

std::string to_string(PoolStrategy s);
std::string to_string(CausalMode m);
std::string to_string(ProxyTag p);
PoolStrategy parse_pool_strategy(const std::string& s);
CausalMode parse_causal_mode(const std::string& s);
ProxyTag parse_proxy_tag(const std::string& s);

struct CompressionConfig {
  int c_q = 8;
  int c_k = 8;
  int c_h = 1;
  PoolStrategy strategy = PoolStrategy::Mean;
  double P = 0.95;
  CausalMode causal_mode = CausalMode::PostSoftmaxBlockCausal;
  std::uint64_t seed = 0;
};

// Per-head Q/K/V stacks, each L x d_k, plus the block size S used for
// selection and sparse attention.
struct AttentionInputs {
  int H = 0;
  int L = 0;
  int d_k = 0;
  int S = 0;
  HeadStack<float> Q, K, V;
};

// Index maps between original tokens, compressed tokens, and blocks.
// Original token t belongs to block t / S; compressed query token t' covers
// originals [t'*c_q, (t'+1)*c_q) and therefore block (t'*c_q) / S.
struct BlockGeometry {
  int L = 0;
  int S = 0;
  int N = 0;
  int c_q = 1;
  int c_k = 1;

  static BlockGeometry make(int L, int S, int c_q, int c_k);

  int comp_q_len() const { return L / c_q; }
  int comp_k_len() const { return L / c_k; }
  int tokens_begin(int block) const { return block * S; }
  int tokens_end(int block) const { return (block + 1) * S; }
  int query_region_begin(int block) const { return block * (S / c_q); }
  int query_region_end(int block) const { return (block + 1) * (S / c_q); }
  int key_region_begin(int block) const { return block * (S / c_k); }
  int key_region_end(int block) const { return (block + 1) * (S / c_k); }
  int block_of_query(int t_comp) const { return int((std::int64_t(t_comp) * c_q) / S); }
  int block_of_key(int s_comp) const { return int((std::int64_t(s_comp) * c_k) / S); }
};

struct ValidationResult {
  std::vector<std::string> errors;
  bool ok() const { return errors.empty(); }
  std::string joined() const;
};

// Shape and divisibility checks for a pipeline run. Collects every violation
// instead of stopping at the first.
ValidationResult validate_inputs(const AttentionInputs& in, const CompressionConfig& cfg);

}  // namespace unisparse

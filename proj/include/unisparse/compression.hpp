#pragma once

#include "unisparse/rng.hpp"
#include "unisparse/types.hpp"

namespace unisparse {

// Pools every window of c consecutive rows of x (L x d) into one row,
// returning an (L/c) x d matrix. Window order is preserved. Mean pooling
// accumulates in double. Stochastic pooling keeps one row per window, drawn
// with probability proportional to its Euclidean norm (uniform when the
// whole window is zero); the draw for window w depends only on (seed, w).
template <typename Scalar>
MatrixRM<Scalar> pool_sequence(const MatrixRM<Scalar>& x, int c, PoolStrategy strategy,
                               std::uint64_t seed = 0) {
  if (c <= 0) throw std::invalid_argument("pool_sequence: c must be positive");
  if (x.rows() % c != 0)
    throw std::invalid_argument("pool_sequence: rows (" + std::to_string(x.rows()) +
                                ") not divisible by c (" + std::to_string(c) + ")");
  if (c == 1) return x;
  const Index out_rows = x.rows() / c;
  MatrixRM<Scalar> out(out_rows, x.cols());
  for (Index w = 0; w < out_rows; ++w) {
    const auto window = x.middleRows(w * c, c);
    switch (strategy) {
      case PoolStrategy::Mean:
        out.row(w) =
            (window.template cast<double>().colwise().sum() / double(c)).template cast<Scalar>();
        break;
      case PoolStrategy::Max:
        out.row(w) = window.colwise().maxCoeff();
        break;
      case PoolStrategy::Stochastic: {
        CounterRng rng(chain_seed(seed, std::uint64_t(w)));
        VectorX<double> norms = window.template cast<double>().rowwise().norm();
        const double total = norms.sum();
        Index pick = c - 1;
        if (total > 0.0) {
          const double u = rng.next_double() * total;
          double cum = 0.0;
          for (Index r = 0; r < c; ++r) {
            cum += norms[r];
            if (u < cum) {
              pick = r;
              break;
            }
          }
        } else {
          pick = Index(rng.next_u64() % std::uint64_t(c));
        }
        out.row(w) = window.row(pick);
        break;
      }
    }
  }
  return out;
}

// Mean-pools every group of c_h consecutive heads into one head. Head
// grouping is always mean regardless of the sequence pooling strategy.
template <typename Scalar>
HeadStack<Scalar> pool_heads(const HeadStack<Scalar>& heads, int c_h) {
  if (c_h <= 0) throw std::invalid_argument("pool_heads: c_h must be positive");
  if (heads.size() % std::size_t(c_h) != 0)
    throw std::invalid_argument("pool_heads: head count (" + std::to_string(heads.size()) +
                                ") not divisible by c_h (" + std::to_string(c_h) + ")");
  if (c_h == 1) return heads;
  HeadStack<Scalar> out;
  out.reserve(heads.size() / c_h);
  for (std::size_t g = 0; g < heads.size(); g += c_h) {
    MatrixRM<double> acc = heads[g].template cast<double>();
    for (int j = 1; j < c_h; ++j) acc += heads[g + j].template cast<double>();
    out.push_back((acc / double(c_h)).template cast<Scalar>());
  }
  return out;
}

// Compressed Q/K stacks: H/c_h heads of (L/c_q) x d_k and (L/c_k) x d_k.
struct CompressedViews {
  HeadStack<float> Q, K;
  CompressionConfig cfg;
  int d_k = 0;
  int L = 0;
  int H = 0;  // original head count
};

// Sequence pooling first, head grouping second. Stochastic draws are seeded
// per (tensor role, head, window) so any generation order agrees.
CompressedViews compress(const AttentionInputs& in, const CompressionConfig& cfg);

}  // namespace unisparse

#include "unisparse/compression.hpp"

#include "oracles.hpp"

#include <doctest.h>

#include <set>

using namespace unisparse;

namespace {

MatrixRMf random_matrix(int rows, int cols, unsigned seed) {
  CounterRng rng(seed);
  MatrixRMf m(rows, cols);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) m(r, c) = float(rng.next_gaussian());
  return m;
}

}  // namespace

TEST_CASE("mean pooling of a known window") {
  MatrixRMf x(2, 2);
  x << 1.0f, 2.0f, 3.0f, 4.0f;
  const MatrixRMf out = pool_sequence(x, 2, PoolStrategy::Mean);
  REQUIRE(out.rows() == 1);
  CHECK(out(0, 0) == 2.0f);
  CHECK(out(0, 1) == 3.0f);
}

TEST_CASE("max pooling of a known window") {
  MatrixRMf x(4, 2);
  x << 1.0f, -2.0f, 3.0f, -4.0f, -5.0f, 6.0f, 0.5f, 0.25f;
  const MatrixRMf out = pool_sequence(x, 2, PoolStrategy::Max);
  REQUIRE(out.rows() == 2);
  CHECK(out(0, 0) == 3.0f);
  CHECK(out(0, 1) == -2.0f);
  CHECK(out(1, 0) == 0.5f);
  CHECK(out(1, 1) == 6.0f);
}

TEST_CASE("c == 1 is a bitwise identity for every strategy") {
  const MatrixRMf x = random_matrix(64, 16, 11);
  for (const auto s : {PoolStrategy::Mean, PoolStrategy::Max, PoolStrategy::Stochastic}) {
    const MatrixRMf out = pool_sequence(x, 1, s, 99);
    CHECK(out.cwiseEqual(x).all());
  }
}

TEST_CASE("mean and max pooling agree with the naive oracles") {
  const MatrixRMf x = random_matrix(96, 8, 21);
  for (const int c : {2, 4, 8, 32}) {
    const MatrixRMf mean_lib = pool_sequence(x, c, PoolStrategy::Mean);
    const MatrixRMf mean_ref = oracles::mean_pool(x, c);
    CHECK((mean_lib - mean_ref).cwiseAbs().maxCoeff() <= 1e-6f);
    const MatrixRMf max_lib = pool_sequence(x, c, PoolStrategy::Max);
    const MatrixRMf max_ref = oracles::max_pool(x, c);
    CHECK(max_lib.cwiseEqual(max_ref).all());
  }
}

TEST_CASE("stochastic pooling keeps a member row and is seed deterministic") {
  const MatrixRMf x = random_matrix(64, 4, 31);
  const int c = 8;
  const MatrixRMf a = pool_sequence(x, c, PoolStrategy::Stochastic, 1234);
  const MatrixRMf b = pool_sequence(x, c, PoolStrategy::Stochastic, 1234);
  CHECK(a.cwiseEqual(b).all());

  for (int w = 0; w < a.rows(); ++w) {
    bool member = false;
    for (int r = 0; r < c; ++r)
      if (a.row(w).cwiseEqual(x.row(w * c + r)).all()) member = true;
    CHECK(member);
  }

  const MatrixRMf other = pool_sequence(x, c, PoolStrategy::Stochastic, 1235);
  CHECK_FALSE(a.cwiseEqual(other).all());
}

TEST_CASE("stochastic pooling favors high-norm rows") {
  // One giant row per window should be picked almost always.
  MatrixRMf x = random_matrix(400, 4, 41) * 0.001f;
  for (int w = 0; w < 100; ++w) x.row(w * 4 + (w % 4)) *= 100000.0f;
  const MatrixRMf out = pool_sequence(x, 4, PoolStrategy::Stochastic, 7);
  int hits = 0;
  for (int w = 0; w < 100; ++w)
    if (out.row(w).cwiseEqual(x.row(w * 4 + (w % 4))).all()) ++hits;
  CHECK(hits >= 99);
}

TEST_CASE("stochastic pooling of an all-zero window still returns a member") {
  MatrixRMf x = MatrixRMf::Zero(8, 3);
  const MatrixRMf out = pool_sequence(x, 4, PoolStrategy::Stochastic, 5);
  CHECK(out.cwiseEqual(MatrixRMf::Zero(2, 3)).all());
}

TEST_CASE("pool_sequence rejects non-divisible and non-positive c") {
  const MatrixRMf x = random_matrix(10, 2, 51);
  CHECK_THROWS_AS(pool_sequence(x, 3, PoolStrategy::Mean), std::invalid_argument);
  CHECK_THROWS_AS(pool_sequence(x, 0, PoolStrategy::Mean), std::invalid_argument);
}

TEST_CASE("head grouping means member heads") {
  HeadStack<float> heads;
  heads.push_back(MatrixRMf::Constant(2, 2, 1.0f));
  heads.push_back(MatrixRMf::Constant(2, 2, 3.0f));
  heads.push_back(MatrixRMf::Constant(2, 2, -2.0f));
  heads.push_back(MatrixRMf::Constant(2, 2, 4.0f));
  const HeadStack<float> out = pool_heads(heads, 2);
  REQUIRE(out.size() == 2);
  CHECK(out[0].cwiseEqual(MatrixRMf::Constant(2, 2, 2.0f)).all());
  CHECK(out[1].cwiseEqual(MatrixRMf::Constant(2, 2, 1.0f)).all());

  CHECK(pool_heads(heads, 1).size() == 4);
  CHECK_THROWS_AS(pool_heads(heads, 3), std::invalid_argument);
}

TEST_CASE("mean pooling is linear") {
  const MatrixRMf x = random_matrix(64, 8, 61);
  const MatrixRMf y = random_matrix(64, 8, 62);
  const MatrixRMf lhs = pool_sequence<float>(2.0f * x + y, 8, PoolStrategy::Mean);
  const MatrixRMf rhs = 2.0f * pool_sequence(x, 8, PoolStrategy::Mean) +
                        pool_sequence(y, 8, PoolStrategy::Mean);
  CHECK((lhs - rhs).cwiseAbs().maxCoeff() <= 1e-5f);
}

TEST_CASE("pooling windows are independent of their neighbors") {
  // Pooling a concatenation equals concatenating pooled halves.
  const MatrixRMf top = random_matrix(32, 8, 71);
  const MatrixRMf bottom = random_matrix(32, 8, 72);
  MatrixRMf joined(64, 8);
  joined << top, bottom;
  for (const auto s : {PoolStrategy::Mean, PoolStrategy::Max}) {
    const MatrixRMf whole = pool_sequence(joined, 4, s);
    const MatrixRMf a = pool_sequence(top, 4, s);
    const MatrixRMf b = pool_sequence(bottom, 4, s);
    MatrixRMf glued(16, 8);
    glued << a, b;
    CHECK((whole - glued).cwiseAbs().maxCoeff() <= 1e-6f);
  }
}

TEST_CASE("compress produces the advertised shapes and respects identity") {
  AttentionInputs in;
  in.H = 4;
  in.L = 256;
  in.d_k = 16;
  in.S = 64;
  for (int h = 0; h < 4; ++h) {
    in.Q.push_back(random_matrix(256, 16, 100 + h));
    in.K.push_back(random_matrix(256, 16, 200 + h));
    in.V.push_back(random_matrix(256, 16, 300 + h));
  }

  CompressionConfig cfg;
  cfg.c_q = 8;
  cfg.c_k = 4;
  cfg.c_h = 2;
  const CompressedViews v = compress(in, cfg);
  REQUIRE(v.Q.size() == 2);
  REQUIRE(v.K.size() == 2);
  CHECK(v.Q[0].rows() == 32);
  CHECK(v.K[0].rows() == 64);
  CHECK(v.Q[0].cols() == 16);

  CompressionConfig id;
  id.c_q = 1;
  id.c_k = 1;
  id.c_h = 1;
  const CompressedViews w = compress(in, id);
  for (int h = 0; h < 4; ++h) {
    CHECK(w.Q[h].cwiseEqual(in.Q[h]).all());
    CHECK(w.K[h].cwiseEqual(in.K[h]).all());
  }
}

TEST_CASE("compress seeds stochastic Q and K streams independently") {
  AttentionInputs in;
  in.H = 1;
  in.L = 64;
  in.d_k = 4;
  in.S = 32;
  const MatrixRMf shared = random_matrix(64, 4, 500);
  in.Q.push_back(shared);
  in.K.push_back(shared);
  in.V.push_back(shared);

  CompressionConfig cfg;
  cfg.c_q = 8;
  cfg.c_k = 8;
  cfg.strategy = PoolStrategy::Stochastic;
  cfg.seed = 9;
  const CompressedViews v = compress(in, cfg);
  // Same input matrix but distinct role streams: picks should differ somewhere.
  CHECK_FALSE(v.Q[0].cwiseEqual(v.K[0]).all());

  const CompressedViews v2 = compress(in, cfg);
  CHECK(v.Q[0].cwiseEqual(v2.Q[0]).all());
  CHECK(v.K[0].cwiseEqual(v2.K[0]).all());
}

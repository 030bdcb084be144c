#include "unisparse/rng.hpp"
#include "unisparse/tensor_io.hpp"
#include "unisparse/types.hpp"

#include <doctest.h>

#include <cstring>
#include <filesystem>
#include <fstream>

using namespace unisparse;

namespace {

AttentionInputs make_inputs(int H, int L, int d_k, int S, unsigned seed = 1) {
  AttentionInputs in;
  in.H = H;
  in.L = L;
  in.d_k = d_k;
  in.S = S;
  CounterRng rng(seed);
  for (int h = 0; h < H; ++h) {
    MatrixRMf q(L, d_k), k(L, d_k), v(L, d_k);
    for (int r = 0; r < L; ++r)
      for (int c = 0; c < d_k; ++c) {
        q(r, c) = float(rng.next_gaussian());
        k(r, c) = float(rng.next_gaussian());
        v(r, c) = float(rng.next_gaussian());
      }
    in.Q.push_back(q);
    in.K.push_back(k);
    in.V.push_back(v);
  }
  return in;
}

}  // namespace

TEST_CASE("validate_inputs accepts a well-formed instance") {
  const AttentionInputs in = make_inputs(2, 256, 32, 128);
  CHECK(validate_inputs(in, CompressionConfig{}).ok());
}

TEST_CASE("validate_inputs reports L not divisible by S") {
  AttentionInputs in = make_inputs(1, 256, 16, 128);
  in.L = 250;
  for (auto* t : {&in.Q, &in.K, &in.V}) (*t)[0].conservativeResize(250, 16);
  const ValidationResult r = validate_inputs(in, CompressionConfig{});
  REQUIRE_FALSE(r.ok());
  CHECK(r.joined().find("not divisible by S") != std::string::npos);
}

TEST_CASE("validate_inputs reports compression factor violations") {
  const AttentionInputs in = make_inputs(4, 256, 16, 128);
  CompressionConfig cfg;
  cfg.c_q = 24;
  cfg.c_h = 3;
  const ValidationResult r = validate_inputs(in, cfg);
  REQUIRE_FALSE(r.ok());
  CHECK(r.errors.size() == 2);
  CHECK(r.joined().find("c_q") != std::string::npos);
  CHECK(r.joined().find("c_h") != std::string::npos);
}

TEST_CASE("validate_inputs reports shape mismatches per tensor") {
  AttentionInputs in = make_inputs(2, 128, 16, 64);
  in.K[1].conservativeResize(128, 8);
  in.V.pop_back();
  const ValidationResult r = validate_inputs(in, CompressionConfig{});
  REQUIRE_FALSE(r.ok());
  CHECK(r.joined().find("K[1]") != std::string::npos);
  CHECK(r.joined().find("V") != std::string::npos);
}

TEST_CASE("validate_inputs rejects P outside (0, 1]") {
  const AttentionInputs in = make_inputs(1, 128, 16, 64);
  CompressionConfig cfg;
  cfg.P = 0.0;
  CHECK_FALSE(validate_inputs(in, cfg).ok());
  cfg.P = 1.25;
  CHECK_FALSE(validate_inputs(in, cfg).ok());
  cfg.P = 1.0;
  CHECK(validate_inputs(in, cfg).ok());
}

TEST_CASE("BlockGeometry maps blocks, regions, and compressed indices") {
  const BlockGeometry g = BlockGeometry::make(1024, 128, 8, 4);
  CHECK(g.N == 8);
  CHECK(g.comp_q_len() == 128);
  CHECK(g.comp_k_len() == 256);
  CHECK(g.tokens_begin(3) == 384);
  CHECK(g.tokens_end(3) == 512);
  CHECK(g.query_region_begin(3) == 48);
  CHECK(g.query_region_end(3) == 64);
  CHECK(g.key_region_begin(3) == 96);
  CHECK(g.key_region_end(3) == 128);
}

TEST_CASE("BlockGeometry region maps partition the compressed index range") {
  for (const auto& [L, S, c_q, c_k] : {std::tuple{256, 64, 4, 8}, std::tuple{512, 128, 16, 2},
                                       std::tuple{128, 128, 1, 128}}) {
    const BlockGeometry g = BlockGeometry::make(L, S, c_q, c_k);
    for (int t = 0; t < g.comp_q_len(); ++t) {
      const int b = g.block_of_query(t);
      CHECK(t >= g.query_region_begin(b));
      CHECK(t < g.query_region_end(b));
    }
    for (int s = 0; s < g.comp_k_len(); ++s) {
      const int b = g.block_of_key(s);
      CHECK(s >= g.key_region_begin(b));
      CHECK(s < g.key_region_end(b));
    }
  }
}

TEST_CASE("BlockGeometry rejects non-divisible shapes") {
  CHECK_THROWS_AS(BlockGeometry::make(1000, 128, 8, 8), std::invalid_argument);
  CHECK_THROWS_AS(BlockGeometry::make(1024, 128, 24, 8), std::invalid_argument);
  CHECK_THROWS_AS(BlockGeometry::make(0, 128, 8, 8), std::invalid_argument);
}

TEST_CASE("tensor file round-trips bit-exactly") {
  const AttentionInputs in = make_inputs(3, 64, 16, 32, 7);
  const auto dir = std::filesystem::temp_directory_path() / "unisparse_io_test";
  std::filesystem::create_directories(dir);
  write_tensor(dir / "t.bin", in.Q);
  const TensorFile t = read_tensor(dir / "t.bin");
  REQUIRE(t.H == 3);
  REQUIRE(t.L == 64);
  REQUIRE(t.d_k == 16);
  for (int h = 0; h < 3; ++h)
    CHECK(std::memcmp(t.data[h].data(), in.Q[h].data(), sizeof(float) * 64 * 16) == 0);

  const auto size = std::filesystem::file_size(dir / "t.bin");
  CHECK(size == 16 + 12 + std::uintmax_t(sizeof(float)) * 3 * 64 * 16);
}

TEST_CASE("tensor reader rejects malformed files") {
  const auto dir = std::filesystem::temp_directory_path() / "unisparse_io_test";
  std::filesystem::create_directories(dir);
  const AttentionInputs in = make_inputs(1, 32, 8, 16, 9);
  write_tensor(dir / "ok.bin", in.Q);

  SUBCASE("bad magic") {
    std::ofstream os(dir / "bad_magic.bin", std::ios::binary);
    os << "wrongmagic!!" << std::string(100, '\0');
    os.close();
    CHECK_THROWS_WITH_AS(read_tensor(dir / "bad_magic.bin"),
                         doctest::Contains("bad magic"), std::runtime_error);
  }
  SUBCASE("truncated payload") {
    auto bytes = std::filesystem::file_size(dir / "ok.bin");
    std::filesystem::copy_file(dir / "ok.bin", dir / "short.bin",
                               std::filesystem::copy_options::overwrite_existing);
    std::filesystem::resize_file(dir / "short.bin", bytes - 16);
    CHECK_THROWS_WITH_AS(read_tensor(dir / "short.bin"),
                         doctest::Contains("payload shorter"), std::runtime_error);
  }
  SUBCASE("trailing bytes") {
    std::filesystem::copy_file(dir / "ok.bin", dir / "long.bin",
                               std::filesystem::copy_options::overwrite_existing);
    std::ofstream os(dir / "long.bin", std::ios::binary | std::ios::app);
    os << "extra";
    os.close();
    CHECK_THROWS_WITH_AS(read_tensor(dir / "long.bin"),
                         doctest::Contains("trailing bytes"), std::runtime_error);
  }
  SUBCASE("missing file") {
    CHECK_THROWS_AS(read_tensor(dir / "nope.bin"), std::runtime_error);
  }
}

TEST_CASE("counter rng streams are reproducible and independent") {
  CounterRng a(chain_seed(42, 1, 2, 3));
  CounterRng b(chain_seed(42, 1, 2, 3));
  for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());

  CounterRng c(chain_seed(42, 1, 2, 4));
  CounterRng d(chain_seed(42, 1, 2, 3));
  bool all_equal = true;
  for (int i = 0; i < 10; ++i) all_equal = all_equal && (c.next_u64() == d.next_u64());
  CHECK_FALSE(all_equal);

  CHECK(chain_seed(1, 2, 3) != chain_seed(1, 3, 2));  // order-sensitive
}

TEST_CASE("counter rng gaussians have sane moments") {
  CounterRng rng(123);
  double sum = 0.0, sq = 0.0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double g = rng.next_gaussian();
    sum += g;
    sq += g * g;
  }
  const double mean = sum / n;
  const double var = sq / n - mean * mean;
  CHECK(std::abs(mean) < 0.01);
  CHECK(std::abs(var - 1.0) < 0.02);
}

TEST_CASE("counter rng doubles stay in range") {
  CounterRng rng(7);
  for (int i = 0; i < 10000; ++i) {
    const double u = rng.next_double();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
  }
  for (int i = 0; i < 10000; ++i) {
    const double u = rng.next_double_open();
    CHECK(u > 0.0);
    CHECK(u <= 1.0);
  }
}

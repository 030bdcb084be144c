#include "unisparse/selection.hpp"

#include "unisparse/attention.hpp"
#include "unisparse/rng.hpp"

#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <set>

using namespace unisparse;

namespace {

std::set<int> as_set(const SelectionSet& s) { return {s.indices.begin(), s.indices.end()}; }

BlockScoreMatrix random_scores(int H, int N, unsigned seed) {
  BlockScoreMatrix s;
  s.geom = BlockGeometry::make(N * 16, 16, 1, 1);
  CounterRng rng(seed);
  for (int h = 0; h < H; ++h) {
    MatrixRMd plane(N, N);
    for (int i = 0; i < N; ++i)
      for (int j = 0; j < N; ++j) plane(i, j) = j <= i ? rng.next_double() : kMaskedScore;
    s.score.push_back(plane);
  }
  return s;
}

}  // namespace

TEST_CASE("top_p_row picks the smallest covering prefix") {
  const std::vector<double> scores = {0.5, 0.3, 0.2};
  const SelectionSet s = top_p_row(scores, 0.7);
  CHECK(as_set(s) == std::set<int>{0, 1});
  CHECK(s.covered_fraction == doctest::Approx(0.8).epsilon(1e-12));
}

TEST_CASE("top_p_row tie break keeps ascending index order") {
  const std::vector<double> scores = {0.4, 0.4, 0.2};
  const SelectionSet s = top_p_row(scores, 0.5);
  CHECK(s.indices == std::vector<int>{0, 1});
}

TEST_CASE("top_p_row threshold hits are inclusive") {
  const std::vector<double> scores = {0.6, 0.4};
  const SelectionSet s = top_p_row(scores, 0.6);
  CHECK(s.indices == std::vector<int>{0});
}

TEST_CASE("top_p_row with P = 1 selects the whole causal prefix") {
  const std::vector<double> scores = {0.1, 0.0, 0.9, 0.0};
  const SelectionSet s = top_p_row(scores, 1.0);
  CHECK(as_set(s) == std::set<int>{0, 1, 2, 3});
  CHECK(s.covered_fraction == 1.0);
}

TEST_CASE("top_p_row on an all-zero row falls back to the diagonal block") {
  const std::vector<double> scores = {0.0, 0.0, 0.0};
  const SelectionSet s = top_p_row(scores, 0.9);
  CHECK(s.indices == std::vector<int>{2});
}

TEST_CASE("top_p_row selections are nested as P grows") {
  CounterRng rng(77);
  for (int rep = 0; rep < 20; ++rep) {
    std::vector<double> scores(12);
    for (double& x : scores) x = rng.next_double();
    std::set<int> prev;
    for (const double P : {0.1, 0.3, 0.5, 0.7, 0.9, 0.95, 1.0}) {
      const SelectionSet s = top_p_row(scores, P);
      const std::set<int> cur = as_set(s);
      CHECK(std::includes(cur.begin(), cur.end(), prev.begin(), prev.end()));
      prev = cur;

      double selected = 0.0, total = 0.0;
      for (int j : s.indices) selected += scores[j];
      for (double x : scores) total += x;
      CHECK(selected >= P * total - 1e-12);
      CHECK(s.covered_fraction == doctest::Approx(selected / total).epsilon(1e-9));
    }
  }
}

TEST_CASE("top_p_row rejects bad arguments") {
  const std::vector<double> ok = {0.5, 0.5};
  CHECK_THROWS_AS(top_p_row(ok, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(top_p_row(ok, 1.5), std::invalid_argument);
  const std::vector<double> neg = {0.5, -0.1};
  CHECK_THROWS_AS(top_p_row(neg, 0.9), std::invalid_argument);
  CHECK_THROWS_AS(top_p_row(std::vector<double>{}, 0.9), std::invalid_argument);
}

TEST_CASE("build_block_mask covers every causal row and stays causal") {
  const BlockScoreMatrix s = random_scores(2, 8, 5);
  const BlockMask m = build_block_mask(s, 0.8, 1, 2);
  REQUIRE(m.H == 2);
  REQUIRE(m.N == 8);
  REQUIRE(m.mask.size() == 2);
  for (int h = 0; h < 2; ++h)
    for (int i = 0; i < 8; ++i) {
      CHECK(m.mask[h].row(i).head(i + 1).any());        // at least one selected
      CHECK_FALSE(m.mask[h].row(i).tail(7 - i).any());  // nothing non-causal
      CHECK(bool(m.mask[h](i, i) || m.mask[h].row(i).head(i).any()));
      CHECK(m.coverage(h, i) >= 0.8 - 1e-12);
    }
}

TEST_CASE("build_block_mask broadcasts one compressed plane to member heads") {
  const BlockScoreMatrix s = random_scores(1, 6, 7);
  const BlockMask m = build_block_mask(s, 0.9, 4, 4);
  REQUIRE(m.H == 4);
  REQUIRE(m.mask.size() == 4);
  for (int h = 1; h < 4; ++h) {
    CHECK((m.mask[h] == m.mask[0]).all());
    for (int i = 0; i < 6; ++i) CHECK(m.coverage(h, i) == m.coverage(0, i));
  }
  CHECK(m.selected_total() == 4 * m.selected_in_head(0));
}

TEST_CASE("build_block_mask validates plane count against H and c_h") {
  const BlockScoreMatrix s = random_scores(2, 4, 9);
  CHECK_THROWS_AS(build_block_mask(s, 0.9, 3, 9), std::invalid_argument);
  CHECK_THROWS_AS(build_block_mask(s, 0.9, 1, 4), std::invalid_argument);
  CHECK_THROWS_AS(build_block_mask(s, 0.9, 4, 6), std::invalid_argument);
}

TEST_CASE("higher P never selects fewer blocks") {
  const BlockScoreMatrix s = random_scores(3, 12, 11);
  std::int64_t prev = 0;
  for (const double P : {0.5, 0.7, 0.9, 0.95, 1.0}) {
    const BlockMask m = build_block_mask(s, P, 1, 3);
    CHECK(m.selected_total() >= prev);
    prev = m.selected_total();
  }
  // P = 1 selects every causal block.
  const BlockMask full = build_block_mask(s, 1.0, 1, 3);
  CHECK(full.selected_total() == 3 * (12 * 13) / 2);
}

TEST_CASE("mask JSON round-trips") {
  const BlockScoreMatrix s = random_scores(2, 8, 13);
  const BlockMask m = build_block_mask(s, 0.85, 1, 2);
  const auto dir = std::filesystem::temp_directory_path() / "unisparse_mask_json";
  std::filesystem::create_directories(dir);
  save_mask_json(m, dir / "mask.json");
  const BlockMask r = load_mask_json(dir / "mask.json");
  REQUIRE(r.H == m.H);
  REQUIRE(r.N == m.N);
  CHECK(r.P_used == m.P_used);
  for (int h = 0; h < m.H; ++h) CHECK((r.mask[h] == m.mask[h]).all());
}

TEST_CASE("mask JSON encodes runs compactly") {
  BlockMask m;
  m.H = 1;
  m.N = 4;
  m.P_used = 0.5;
  MaskPlane plane = MaskPlane::Constant(4, 4, false);
  plane(3, 0) = plane(3, 1) = plane(3, 3) = true;
  plane(0, 0) = plane(1, 1) = plane(2, 2) = true;
  m.mask.push_back(plane);
  m.coverage = MatrixRMd::Ones(1, 4);
  const auto dir = std::filesystem::temp_directory_path() / "unisparse_mask_json";
  std::filesystem::create_directories(dir);
  save_mask_json(m, dir / "runs.json");
  const BlockMask r = load_mask_json(dir / "runs.json");
  CHECK((r.mask[0] == plane).all());
  CHECK(r.mask[0].row(3).count() == 3);
}

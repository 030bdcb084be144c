#pragma once

#include "unisparse/proxy.hpp"
#include "unisparse/types.hpp"

#include <filesystem>
#include <span>

namespace unisparse {

// Key blocks chosen for one query row, in descending-score order.
struct SelectionSet {
  std::vector<int> indices;
  // Selected score mass over total causal mass; 1.0 when the row had no mass.
  double covered_fraction = 1.0;
};

// Smallest prefix of the descending-score order (ties broken by ascending
// index) whose cumulative mass reaches P of the row total. scores holds the
// causal prefix of one query row; an all-zero row selects only its last
// entry, the diagonal block. P == 1 selects the whole prefix.
SelectionSet top_p_row(std::span<const double> scores, double P);

// Per-head boolean block masks. mask[h](i, j) == true means key block j is
// attended by query block i.
struct BlockMask {
  int H = 0;
  int N = 0;
  double P_used = 0.0;
  std::vector<MaskPlane> mask;
  // Covered causal score fraction per (original head, query row).
  MatrixRMd coverage;

  std::int64_t selected_in_head(int h) const;
  std::int64_t selected_total() const;
};

// Runs top_p_row on every causal row of every score plane and broadcasts
// each compressed head's selection to its c_h member heads. H is the
// original head count; scores must hold H / c_h planes.
BlockMask build_block_mask(const BlockScoreMatrix& scores, double P, int c_h, int H);

// JSON export: per head, per row, run-length encoded [start, len] spans of
// selected blocks. Round-trips through load_mask_json.
void save_mask_json(const BlockMask& mask, const std::filesystem::path& path);
BlockMask load_mask_json(const std::filesystem::path& path);

}  // namespace unisparse

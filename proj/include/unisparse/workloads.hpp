#pragma once

#include "unisparse/types.hpp"

#include <filesystem>

namespace unisparse {

enum class WorkloadKind { Gaussian, PlantedBlocks, LocalityShift };

std::string to_string(WorkloadKind k);
WorkloadKind parse_workload_kind(const std::string& s);

struct WorkloadParams {
  double sigma = 0.1;  // base noise scale for planted kinds
  double gain = 4.0;   // planted direction amplitude
  int m = 2;           // planted key blocks per query block
};

struct Workload {
  AttentionInputs inputs;
  WorkloadKind kind = WorkloadKind::Gaussian;
  std::uint64_t seed = 0;
  WorkloadParams params;
  // [head][query block] -> planted key blocks, ascending; empty for gaussian.
  std::vector<std::vector<std::vector<int>>> planted;

  bool has_planted() const { return !planted.empty(); }
};

// Deterministic synthetic inputs. Noise is drawn from streams seeded per
// (tensor role, head, block), so any block can be regenerated independently
// and regeneration with the same seed is bit-identical.
//
// planted_blocks adds, per (head, query block i), an amplified shared unit
// direction to the queries of block i and to the keys of m causal blocks
// sampled from [0, i], concentrating exact attention mass there.
// locality_shift additionally keeps every earlier row's planted set disjoint
// from the last row's, which a last-block probe cannot recover.
Workload gen_workload(WorkloadKind kind, int L, int H, int d_k, int S, std::uint64_t seed,
                      WorkloadParams params = {});

// q.bin / k.bin / v.bin in the binary tensor format plus workload.json with
// kind, dims, seed, params, and planted lists.
void save_workload(const Workload& w, const std::filesystem::path& dir);
Workload load_workload(const std::filesystem::path& dir);

}  // namespace unisparse

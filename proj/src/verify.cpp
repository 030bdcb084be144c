#include "unisparse/experiment.hpp"
#include "unisparse/tensor_io.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

namespace unisparse {

namespace {

bool same_bytes(const std::filesystem::path& a, const std::filesystem::path& b) {
  std::ifstream ia(a, std::ios::binary), ib(b, std::ios::binary);
  if (!ia || !ib) return false;
  std::ostringstream sa, sb;
  sa << ia.rdbuf();
  sb << ib.rdbuf();
  return sa.str() == sb.str();
}

bool check_tensor_roundtrip(const std::filesystem::path& dir) {
  Workload w = gen_workload(WorkloadKind::Gaussian, 64, 2, 16, 32, 5);
  const auto path = dir / "roundtrip.bin";
  write_tensor(path, w.inputs.Q);
  const TensorFile t = read_tensor(path);
  if (t.H != 2 || t.L != 64 || t.d_k != 16) return false;
  for (int h = 0; h < 2; ++h)
    if (std::memcmp(t.data[h].data(), w.inputs.Q[h].data(), sizeof(float) * 64 * 16) != 0)
      return false;
  std::ofstream bad(dir / "bad.bin", std::ios::binary);
  bad << "not a tensor";
  bad.close();
  try {
    read_tensor(dir / "bad.bin");
    return false;
  } catch (const std::runtime_error&) {
  }
  return true;
}

bool check_oracle_equivalence() {
  for (const auto& [L, H, d_k] : {std::tuple{256, 2, 32}, std::tuple{512, 1, 64}}) {
    Workload w = gen_workload(WorkloadKind::Gaussian, L, H, d_k, 128, 11 + L);
    CompressionConfig cc;
    cc.P = 1.0;
    const UniSparseResult r = unisparse_attn(w.inputs, cc);
    const AttentionOutput dense = dense_attention(w.inputs, true);
    const FidelityStats f = output_fidelity(r.out.O, dense.O);
    if (!(f.max_abs <= 1e-5) || r.report.rho_mean != 0.0) return false;
  }
  return true;
}

bool check_identity_compression() {
  Workload w = gen_workload(WorkloadKind::PlantedBlocks, 512, 1, 32, 128, 17);
  CompressionConfig cc;
  cc.c_q = cc.c_k = cc.c_h = 1;
  cc.causal_mode = CausalMode::PreSoftmaxCompressedCausal;
  const BlockScoreMatrix score = proxy_scores(ProxyTag::UniSparse, w.inputs, cc, 8);
  const BlockScoreMatrix mass = exact_block_mass(w.inputs);
  const int N = score.geom.N;
  for (int i = 0; i < N; ++i)
    for (int j = 0; j <= i; ++j)
      if (std::abs(score.score[0](i, j) - mass.score[0](i, j)) > 1e-6) return false;
  const BlockMask ma = build_block_mask(score, 0.9, 1, 1);
  const BlockMask mb = build_block_mask(mass, 0.9, 1, 1);
  return (ma.mask[0] == mb.mask[0]).all();
}

bool check_selection_monotonicity() {
  Workload w = gen_workload(WorkloadKind::Gaussian, 512, 2, 64, 128, 23);
  CompressionConfig cc;
  double prev_rho = 2.0;
  BlockMask prev;
  bool first = true;
  for (double P : {0.7, 0.8, 0.9, 0.95, 1.0}) {
    cc.P = P;
    SparsityReport rep = select_blocks(ProxyTag::UniSparse, w.inputs, cc);
    if (rep.mask.coverage.minCoeff() < P - 1e-12) return false;
    if (!(rep.rho_mean <= prev_rho + 1e-12)) return false;
    if (!first)
      for (int h = 0; h < rep.mask.H; ++h)
        if ((prev.mask[h] && !rep.mask.mask[h]).any()) return false;  // selections must nest
    if (P == 1.0 && rep.rho_mean != 0.0) return false;
    prev_rho = rep.rho_mean;
    prev = rep.mask;
    first = false;
  }
  return true;
}

bool check_flop_exactness() {
  const std::uint64_t L = 4096, H = 4, d_k = 64, S = 128;
  for (int c : {4, 8, 16, 32}) {
    CompressionConfig cc;
    cc.c_q = cc.c_k = c;
    for (int c_h : {1, 2}) {
      cc.c_h = c_h;
      const FlopBreakdown f = selection_flops(L, H, d_k, S, cc, ProxyTag::UniSparse);
      const std::uint64_t denom = std::uint64_t(c) * std::uint64_t(c) * std::uint64_t(c_h);
      if (f.compressed_qk * denom != 2 * L * L * H * d_k) return false;
    }
  }
  const FlopBreakdown fa = selection_flops(L, H, d_k, S, CompressionConfig{}, ProxyTag::Antidiagonal, 8);
  if (fa.compressed_qk != 2 * L * (L / 8) * H * d_k) return false;
  const FlopBreakdown fp = selection_flops(L, H, d_k, S, CompressionConfig{}, ProxyTag::LastBlockProbe);
  return fp.compressed_qk == 2 * S * L * H * d_k;
}

bool check_workload_determinism() {
  const Workload a = gen_workload(WorkloadKind::LocalityShift, 1024, 2, 32, 128, 99);
  const Workload b = gen_workload(WorkloadKind::LocalityShift, 1024, 2, 32, 128, 99);
  return content_hash(a.inputs) == content_hash(b.inputs) && a.planted == b.planted;
}

bool check_csv_determinism(const std::filesystem::path& dir) {
  ExperimentConfig cfg;
  cfg.workload.kind = WorkloadKind::PlantedBlocks;
  cfg.workload.L = 512;
  cfg.workload.H = 2;
  cfg.workload.d_k = 64;
  cfg.workload.S = 128;
  cfg.workload.seed = 42;
  cfg.grid.c_q = {4, 8};
  cfg.grid.c_k = {8};
  cfg.grid.P = {0.9, 0.95};
  cfg.proxies = {ProxyTag::UniSparse, ProxyTag::Antidiagonal, ProxyTag::LastBlockProbe};
  cfg.out = (dir / "a").string();
  run_experiment(cfg);
  cfg.out = (dir / "b").string();
  run_experiment(cfg);
  if (!same_bytes(dir / "a" / "metrics.csv", dir / "b" / "metrics.csv")) return false;
  std::filesystem::copy_file(dir / "a" / "metrics.csv", dir / "verify_metrics.csv",
                             std::filesystem::copy_options::overwrite_existing);
  return true;
}

}  // namespace

int run_verify(const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);
  int failures = 0;
  auto report = [&failures](const char* name, bool ok) {
    std::printf("verify: %-24s %s\n", name, ok ? "PASS" : "FAIL");
    std::fflush(stdout);
    if (!ok) ++failures;
  };
  report("tensor-roundtrip", check_tensor_roundtrip(out_dir));
  report("oracle-equivalence", check_oracle_equivalence());
  report("identity-compression", check_identity_compression());
  report("selection-monotonicity", check_selection_monotonicity());
  report("flop-exactness", check_flop_exactness());
  report("workload-determinism", check_workload_determinism());
  report("csv-determinism", check_csv_determinism(out_dir));
  return failures;
}

}  // namespace unisparse

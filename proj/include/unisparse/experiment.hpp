#pragma once

#include "unisparse/pipeline.hpp"
#include "unisparse/workloads.hpp"

#include <filesystem>

namespace unisparse {

// Exit-code mapping in the CLI: ConfigError 2, ValidationError 3, IoError 4.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ValidationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct WorkloadSpec {
  // Inline generation...
  WorkloadKind kind = WorkloadKind::Gaussian;
  int L = 1024, H = 2, d_k = 64, S = 128;
  std::uint64_t seed = 0;
  WorkloadParams params;
  // ...or a directory produced by save_workload / the gen subcommand.
  std::string dir;

  bool from_dir() const { return !dir.empty(); }
};

struct GridSpec {
  std::vector<int> c_q = {8};
  std::vector<int> c_k = {8};
  std::vector<int> c_h = {1};
  std::vector<PoolStrategy> strategy = {PoolStrategy::Mean};
  std::vector<double> P = {0.95};
  std::vector<CausalMode> causal_mode = {CausalMode::PostSoftmaxBlockCausal};
};

struct ExperimentConfig {
  int version = 1;
  WorkloadSpec workload;
  GridSpec grid;
  std::vector<ProxyTag> proxies = {ProxyTag::UniSparse};
  int stride = 8;
  int recall_k = 0;  // 0: planted m when available, else 2
  bool dump_scores = false;
  bool dump_outputs = false;
  std::string out = "runs/out";
};

ExperimentConfig parse_experiment_config(const std::string& json_text);
ExperimentConfig load_experiment_config(const std::filesystem::path& path);

// One aggregate CSV row; field order matches write_metrics_csv.
struct RunRow {
  ProxyTag proxy = ProxyTag::UniSparse;
  int c_q = 8, c_k = 8, c_h = 1;
  PoolStrategy strategy = PoolStrategy::Mean;
  double P = 0.95;
  CausalMode causal_mode = CausalMode::PostSoftmaxBlockCausal;
  double rho = 0.0;
  double spearman = 0.0;
  double recall = 0.0;
  double max_abs = 0.0;
  double cosine = 1.0;
  std::uint64_t selection_flops = 0;
  std::uint64_t attention_flops = 0;
};

void write_metrics_csv(const std::vector<RunRow>& rows, const std::filesystem::path& path);

// Dense output and exact block mass for a workload, disk-cached under
// <cache_dir>/oracle_<content hash>.bin.
struct OracleRef {
  AttentionOutput out;
  BlockScoreMatrix mass;
};

std::uint64_t content_hash(const AttentionInputs& in);
OracleRef oracle_for(const AttentionInputs& in, const std::filesystem::path& cache_dir);

// Expands the grid, runs every (grid point, proxy) pair against the shared
// dense oracle, writes records/run_*.json, metrics.csv, and run_meta.json
// under cfg.out. Worker count comes from UNISPARSE_WORKERS (default 1).
// Returns the rows in grid-major order.
std::vector<RunRow> run_experiment(const ExperimentConfig& cfg);

// Re-aggregates records/run_*.json from a previous run into a CSV.
std::vector<RunRow> collect_records(const std::filesystem::path& records_dir);

// Built-in verification battery: runs fixed-seed checks plus a small canned
// experiment under out_dir, printing one line per check. Returns the number
// of failed checks.
int run_verify(const std::filesystem::path& out_dir);

}  // namespace unisparse

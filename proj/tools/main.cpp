#include "unisparse/experiment.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>

namespace {

using namespace unisparse;

int cmd_gen(const std::string& kind, int L, int H, int d_k, int S, std::uint64_t seed,
            double sigma, double gain, int m, const std::string& out) {
  WorkloadParams params;
  params.sigma = sigma;
  params.gain = gain;
  params.m = m;
  const Workload w = gen_workload(parse_workload_kind(kind), L, H, d_k, S, seed, params);
  save_workload(w, out);
  std::printf("wrote %s: kind=%s L=%d H=%d d_k=%d S=%d seed=%llu hash=%016llx\n", out.c_str(),
              kind.c_str(), L, H, d_k, S, static_cast<unsigned long long>(seed),
              static_cast<unsigned long long>(content_hash(w.inputs)));
  return 0;
}

void apply_grid_override(ExperimentConfig& cfg, const std::string& grid_json) {
  nlohmann::json g;
  try {
    g = nlohmann::json::parse(grid_json);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("--grid: ") + e.what());
  }
  nlohmann::json wrapper;
  wrapper["grid"] = g;
  const ExperimentConfig parsed = parse_experiment_config(wrapper.dump());
  if (g.contains("c_q")) cfg.grid.c_q = parsed.grid.c_q;
  if (g.contains("c_k")) cfg.grid.c_k = parsed.grid.c_k;
  if (g.contains("c_h")) cfg.grid.c_h = parsed.grid.c_h;
  if (g.contains("strategy")) cfg.grid.strategy = parsed.grid.strategy;
  if (g.contains("P")) cfg.grid.P = parsed.grid.P;
  if (g.contains("causal_mode")) cfg.grid.causal_mode = parsed.grid.causal_mode;
}

int cmd_run(const std::string& config_path, const std::string& workload_override,
            std::int64_t seed_override, const std::string& out_override,
            const std::vector<std::string>& proxies_override, const std::string& grid_override) {
  ExperimentConfig cfg = load_experiment_config(config_path);
  if (!workload_override.empty()) {
    cfg.workload.dir.clear();
    cfg.workload.kind = parse_workload_kind(workload_override);
  }
  if (seed_override >= 0) cfg.workload.seed = std::uint64_t(seed_override);
  if (!out_override.empty()) cfg.out = out_override;
  if (!proxies_override.empty()) {
    cfg.proxies.clear();
    for (const auto& p : proxies_override) cfg.proxies.push_back(parse_proxy_tag(p));
  }
  if (!grid_override.empty()) apply_grid_override(cfg, grid_override);

  const std::vector<RunRow> rows = run_experiment(cfg);
  std::printf("completed %zu runs -> %s/metrics.csv\n", rows.size(), cfg.out.c_str());
  return 0;
}

int cmd_report(const std::string& records, const std::string& out) {
  const std::vector<RunRow> rows = collect_records(records);
  write_metrics_csv(rows, out);
  std::printf("aggregated %zu records -> %s\n", rows.size(), out.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Dynamic block-sparse attention reference and evaluation harness"};
  app.require_subcommand(1);

  auto* gen = app.add_subcommand("gen", "Generate a synthetic workload directory");
  std::string gen_kind = "gaussian", gen_out = "workload";
  int gen_L = 1024, gen_H = 2, gen_dk = 64, gen_S = 128, gen_m = 2;
  std::uint64_t gen_seed = 0;
  double gen_sigma = 0.1, gen_gain = 4.0;
  gen->add_option("--kind", gen_kind, "gaussian | planted_blocks | locality_shift");
  gen->add_option("--L", gen_L, "sequence length");
  gen->add_option("--H", gen_H, "heads");
  gen->add_option("--dk", gen_dk, "head dimension");
  gen->add_option("--S", gen_S, "block size");
  gen->add_option("--seed", gen_seed, "generator seed");
  gen->add_option("--sigma", gen_sigma, "planted base noise scale");
  gen->add_option("--gain", gen_gain, "planted direction amplitude");
  gen->add_option("--m", gen_m, "planted blocks per query block");
  gen->add_option("--out", gen_out, "output directory");

  auto* run = app.add_subcommand("run", "Run an experiment grid from a JSON config");
  std::string run_config, run_workload, run_out, run_grid;
  std::int64_t run_seed = -1;
  std::vector<std::string> run_proxies;
  run->add_option("--config", run_config, "experiment config JSON")->required();
  run->add_option("--workload", run_workload, "override workload kind");
  run->add_option("--seed", run_seed, "override workload seed");
  run->add_option("--out", run_out, "override output directory");
  run->add_option("--proxies", run_proxies, "override proxy list")->delimiter(',');
  run->add_option("--grid", run_grid, "JSON object merged over the config grid");

  auto* rep = app.add_subcommand("report", "Re-aggregate run records into a CSV");
  std::string rep_records, rep_out = "metrics.csv";
  rep->add_option("--records", rep_records, "records directory")->required();
  rep->add_option("--out", rep_out, "output CSV path");

  auto* ver = app.add_subcommand("verify", "Run the built-in verification battery");
  std::string ver_out = "verify_out";
  ver->add_option("--out", ver_out, "scratch/output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (gen->parsed())
      return cmd_gen(gen_kind, gen_L, gen_H, gen_dk, gen_S, gen_seed, gen_sigma, gen_gain, gen_m,
                     gen_out);
    if (run->parsed())
      return cmd_run(run_config, run_workload, run_seed, run_out, run_proxies, run_grid);
    if (rep->parsed()) return cmd_report(rep_records, rep_out);
    if (ver->parsed()) {
      const int failures = run_verify(ver_out);
      std::printf("verify: %s\n", failures ? "FAILED" : "OK");
      return failures ? 1 : 0;
    }
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const ValidationError& e) {
    std::fprintf(stderr, "validation error: %s\n", e.what());
    return 3;
  } catch (const IoError& e) {
    std::fprintf(stderr, "io error: %s\n", e.what());
    return 4;
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "validation error: %s\n", e.what());
    return 3;
  } catch (const std::runtime_error& e) {
    std::fprintf(stderr, "io error: %s\n", e.what());
    return 4;
  }
  return 0;
}

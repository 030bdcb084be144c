#include "unisparse/experiment.hpp"

#include "unisparse/tensor_io.hpp"

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <cctype>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <ctime>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

namespace unisparse {

namespace {

using nlohmann::json;

std::string fmt_double(double v) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

template <typename T, typename Parse>
std::vector<T> parse_list(const json& j, Parse parse) {
  std::vector<T> out;
  for (const auto& e : j) out.push_back(parse(e));
  if (out.empty()) throw ConfigError("grid axis must not be empty");
  return out;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

int env_workers() {
  const char* v = std::getenv("UNISPARSE_WORKERS");
  if (!v) return 1;
  const int n = std::atoi(v);
  return n < 1 ? 1 : (n > 64 ? 64 : n);
}

constexpr char kOracleMagic[12] = {'u', 'n', 'i', 's', 'p', 'a', 'r', 's', 'e', '.', 'o', 'r'};

}  // namespace

ExperimentConfig parse_experiment_config(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config parse: ") + e.what());
  }
  try {
    ExperimentConfig cfg;
    cfg.version = j.value("version", 1);
    if (cfg.version != 1) throw ConfigError("unsupported config version");
    if (j.contains("workload")) {
      const auto& w = j["workload"];
      if (w.contains("dir")) {
        cfg.workload.dir = w["dir"].get<std::string>();
      } else {
        cfg.workload.kind = parse_workload_kind(w.value("kind", "gaussian"));
        cfg.workload.L = w.value("L", 1024);
        cfg.workload.H = w.value("H", 2);
        cfg.workload.d_k = w.value("d_k", 64);
        cfg.workload.S = w.value("S", 128);
        cfg.workload.seed = w.value("seed", std::uint64_t(0));
        if (w.contains("params")) {
          const auto& p = w["params"];
          cfg.workload.params.sigma = p.value("sigma", 0.1);
          cfg.workload.params.gain = p.value("gain", 4.0);
          cfg.workload.params.m = p.value("m", 2);
        }
      }
    }
    if (j.contains("grid")) {
      const auto& g = j["grid"];
      if (g.contains("c_q"))
        cfg.grid.c_q = parse_list<int>(g["c_q"], [](const json& e) { return e.get<int>(); });
      if (g.contains("c_k"))
        cfg.grid.c_k = parse_list<int>(g["c_k"], [](const json& e) { return e.get<int>(); });
      if (g.contains("c_h"))
        cfg.grid.c_h = parse_list<int>(g["c_h"], [](const json& e) { return e.get<int>(); });
      if (g.contains("strategy"))
        cfg.grid.strategy = parse_list<PoolStrategy>(g["strategy"], [](const json& e) {
          return parse_pool_strategy(e.get<std::string>());
        });
      if (g.contains("P"))
        cfg.grid.P = parse_list<double>(g["P"], [](const json& e) { return e.get<double>(); });
      if (g.contains("causal_mode"))
        cfg.grid.causal_mode = parse_list<CausalMode>(g["causal_mode"], [](const json& e) {
          return parse_causal_mode(e.get<std::string>());
        });
    }
    if (j.contains("proxies"))
      cfg.proxies = parse_list<ProxyTag>(j["proxies"], [](const json& e) {
        return parse_proxy_tag(e.get<std::string>());
      });
    cfg.stride = j.value("stride", 8);
    cfg.recall_k = j.value("recall_k", 0);
    cfg.dump_scores = j.value("dump_scores", false);
    cfg.dump_outputs = j.value("dump_outputs", false);
    cfg.out = j.value("out", std::string("runs/out"));
    return cfg;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config field: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("config field: ") + e.what());
  }
}

ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
  return parse_experiment_config(read_file(path));
}

void write_metrics_csv(const std::vector<RunRow>& rows, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open " + path.string());
  os << "proxy,c_q,c_k,c_h,strategy,P,rho,spearman,recall,max_abs,cosine,"
        "selection_flops,attention_flops\n";
  for (const auto& r : rows) {
    os << to_string(r.proxy) << ',' << r.c_q << ',' << r.c_k << ',' << r.c_h << ','
       << to_string(r.strategy) << ',' << fmt_double(r.P) << ',' << fmt_double(r.rho) << ','
       << fmt_double(r.spearman) << ',' << fmt_double(r.recall) << ',' << fmt_double(r.max_abs)
       << ',' << fmt_double(r.cosine) << ',' << r.selection_flops << ',' << r.attention_flops
       << '\n';
  }
  if (!os) throw IoError("write failed: " + path.string());
}

std::uint64_t content_hash(const AttentionInputs& in) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  auto fold = [&h](const void* data, std::size_t n) {
    const unsigned char* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= p[i];
      h *= 0x100000001b3ull;
    }
  };
  const std::int32_t dims[4] = {in.H, in.L, in.d_k, in.S};
  fold(dims, sizeof(dims));
  for (const auto* stack : {&in.Q, &in.K, &in.V})
    for (const auto& m : *stack) fold(m.data(), sizeof(float) * std::size_t(m.size()));
  return h;
}

namespace {

void save_oracle(const std::filesystem::path& path, const AttentionInputs& in,
                 const OracleRef& o) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open " + path.string());
  os.write(kOracleMagic, sizeof(kOracleMagic));
  const std::uint32_t hdr[5] = {1u, std::uint32_t(in.H), std::uint32_t(in.L),
                                std::uint32_t(in.d_k), std::uint32_t(in.S)};
  os.write(reinterpret_cast<const char*>(hdr), sizeof(hdr));
  for (const auto& m : o.out.O)
    os.write(reinterpret_cast<const char*>(m.data()), sizeof(float) * std::streamsize(m.size()));
  for (const auto& l : o.out.lse)
    os.write(reinterpret_cast<const char*>(l.data()), sizeof(double) * std::streamsize(l.size()));
  for (const auto& m : o.mass.score)
    os.write(reinterpret_cast<const char*>(m.data()), sizeof(double) * std::streamsize(m.size()));
  if (!os) throw IoError("write failed: " + path.string());
}

bool load_oracle(const std::filesystem::path& path, const AttentionInputs& in, OracleRef& o) {
  std::ifstream is(path, std::ios::binary);
  if (!is) return false;
  char magic[sizeof(kOracleMagic)];
  is.read(magic, sizeof(magic));
  std::uint32_t hdr[5];
  is.read(reinterpret_cast<char*>(hdr), sizeof(hdr));
  if (!is || std::memcmp(magic, kOracleMagic, sizeof(magic)) != 0 || hdr[0] != 1u ||
      hdr[1] != std::uint32_t(in.H) || hdr[2] != std::uint32_t(in.L) ||
      hdr[3] != std::uint32_t(in.d_k) || hdr[4] != std::uint32_t(in.S))
    return false;
  const int N = in.L / in.S;
  o.out.O.assign(in.H, MatrixRMf(in.L, in.d_k));
  o.out.lse.assign(in.H, VectorX<double>(in.L));
  o.mass.score.assign(in.H, MatrixRMd(N, N));
  o.mass.geom = BlockGeometry::make(in.L, in.S, 1, 1);
  for (auto& m : o.out.O)
    is.read(reinterpret_cast<char*>(m.data()), sizeof(float) * std::streamsize(m.size()));
  for (auto& l : o.out.lse)
    is.read(reinterpret_cast<char*>(l.data()), sizeof(double) * std::streamsize(l.size()));
  for (auto& m : o.mass.score)
    is.read(reinterpret_cast<char*>(m.data()), sizeof(double) * std::streamsize(m.size()));
  is.peek();
  return bool(is) || is.eof();
}

}  // namespace

OracleRef oracle_for(const AttentionInputs& in, const std::filesystem::path& cache_dir) {
  std::filesystem::create_directories(cache_dir);
  char name[40];
  std::snprintf(name, sizeof(name), "oracle_%016llx.bin",
                static_cast<unsigned long long>(content_hash(in)));
  const auto path = cache_dir / name;
  OracleRef o;
  if (load_oracle(path, in, o)) return o;
  o.out = dense_attention(in, true);
  o.mass = exact_block_mass(in);
  save_oracle(path, in, o);
  return o;
}

namespace {

struct Task {
  int index = 0;
  ProxyTag proxy;
  CompressionConfig cc;
};

json row_to_record(const RunRow& r, const ExperimentConfig& cfg, const Workload& w,
                   const SparsityReport& rep, const FidelityStats& fid, double mean_rel,
                   int recall_k) {
  json rec;
  rec["version"] = 1;
  rec["settings"] = {{"proxy", to_string(r.proxy)},
                     {"c_q", r.c_q},
                     {"c_k", r.c_k},
                     {"c_h", r.c_h},
                     {"strategy", to_string(r.strategy)},
                     {"P", r.P},
                     {"causal_mode", to_string(r.causal_mode)},
                     {"stride", cfg.stride},
                     {"recall_k", recall_k},
                     {"workload",
                      {{"kind", to_string(w.kind)},
                       {"L", w.inputs.L},
                       {"H", w.inputs.H},
                       {"d_k", w.inputs.d_k},
                       {"S", w.inputs.S},
                       {"seed", w.seed}}}};
  rec["metrics"] = {{"rho", r.rho},
                    {"rho_per_head", rep.rho},
                    {"selected_per_head", rep.selected},
                    {"coverage_min", rep.mask.coverage.minCoeff()},
                    {"spearman", r.spearman},
                    {"recall", r.recall},
                    {"max_abs", r.max_abs},
                    {"mean_rel", mean_rel},
                    {"cosine", r.cosine}};
  rec["flops"] = {{"compression", rep.flops.compression},
                  {"compressed_qk", rep.flops.compressed_qk},
                  {"softmax_aggregation", rep.flops.softmax_aggregation},
                  {"top_p", rep.flops.top_p},
                  {"selection_total", rep.flops.selection_total()},
                  {"sparse_attention", rep.flops.sparse_attention},
                  {"dense_attention", rep.flops.dense_attention}};
  return rec;
}

std::string iso_utc_now() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace

std::vector<RunRow> run_experiment(const ExperimentConfig& cfg) {
  const auto t_start = std::chrono::steady_clock::now();
  Workload w;
  if (cfg.workload.from_dir()) {
    try {
      w = load_workload(cfg.workload.dir);
    } catch (const std::runtime_error& e) {
      throw IoError(e.what());
    }
  } else {
    try {
      w = gen_workload(cfg.workload.kind, cfg.workload.L, cfg.workload.H, cfg.workload.d_k,
                       cfg.workload.S, cfg.workload.seed, cfg.workload.params);
    } catch (const std::invalid_argument& e) {
      throw ValidationError(e.what());
    }
  }

  std::vector<Task> tasks;
  {
    int index = 0;
    for (int c_q : cfg.grid.c_q)
      for (int c_k : cfg.grid.c_k)
        for (int c_h : cfg.grid.c_h)
          for (PoolStrategy strat : cfg.grid.strategy)
            for (double P : cfg.grid.P)
              for (CausalMode mode : cfg.grid.causal_mode)
                for (ProxyTag proxy : cfg.proxies) {
                  Task t;
                  t.index = index++;
                  t.proxy = proxy;
                  t.cc.c_q = c_q;
                  t.cc.c_k = c_k;
                  t.cc.c_h = c_h;
                  t.cc.strategy = strat;
                  t.cc.P = P;
                  t.cc.causal_mode = mode;
                  t.cc.seed = w.seed;
                  tasks.push_back(t);
                }
  }
  for (const Task& t : tasks) {
    ValidationResult v = validate_inputs(w.inputs, t.cc);
    if (!v.ok()) throw ValidationError(v.joined());
    if (cfg.stride <= 0 || w.inputs.S % cfg.stride != 0)
      throw ValidationError("stride must divide S");
  }

  const std::filesystem::path out_dir(cfg.out);
  std::error_code ec;
  std::filesystem::create_directories(out_dir / "records", ec);
  if (ec) throw IoError("cannot create " + (out_dir / "records").string());
  const OracleRef oracle = oracle_for(w.inputs, out_dir / "cache");

  const int N = w.inputs.L / w.inputs.S;
  int recall_k = cfg.recall_k > 0 ? cfg.recall_k : (w.has_planted() ? w.params.m : 2);
  recall_k = std::min(recall_k, N);

  std::vector<RunRow> rows(tasks.size());
  std::vector<json> records(tasks.size());
  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::exception_ptr first_error;
  std::mutex error_mu;

  auto worker = [&]() {
    for (;;) {
      const std::size_t idx = next.fetch_add(1);
      if (idx >= tasks.size() || failed.load()) return;
      const Task& t = tasks[idx];
      try {
        const BlockScoreMatrix scores = proxy_scores(t.proxy, w.inputs, t.cc, cfg.stride);
        const int c_h_eff = t.proxy == ProxyTag::UniSparse ? t.cc.c_h : 1;
        BlockMask mask = build_block_mask(scores, t.cc.P, c_h_eff, w.inputs.H);
        CompressionConfig flop_cc = t.cc;
        flop_cc.c_h = c_h_eff;
        const FlopBreakdown flops = selection_flops(
            std::uint64_t(w.inputs.L), std::uint64_t(w.inputs.H), std::uint64_t(w.inputs.d_k),
            std::uint64_t(w.inputs.S), flop_cc, t.proxy, std::uint64_t(cfg.stride));
        SparsityReport rep = make_sparsity_report(std::move(mask), flops,
                                                  std::uint64_t(w.inputs.S),
                                                  std::uint64_t(w.inputs.d_k));
        const AttentionOutput sparse = block_sparse_attention(w.inputs, rep.mask);
        const FidelityStats fid = output_fidelity(sparse.O, oracle.out.O);
        const RowSpearman rs = mean_row_spearman(scores, oracle.mass, c_h_eff);

        RunRow row;
        row.proxy = t.proxy;
        row.c_q = t.cc.c_q;
        row.c_k = t.cc.c_k;
        row.c_h = t.cc.c_h;
        row.strategy = t.cc.strategy;
        row.P = t.cc.P;
        row.causal_mode = t.cc.causal_mode;
        row.rho = rep.rho_mean;
        row.spearman = rs.mean;
        row.recall = block_recall(rep.mask, oracle.mass, recall_k);
        row.max_abs = fid.max_abs;
        row.cosine = fid.cosine;
        row.selection_flops = rep.flops.selection_total();
        row.attention_flops = rep.flops.sparse_attention;
        rows[t.index] = row;
        records[t.index] = row_to_record(row, cfg, w, rep, fid, fid.mean_rel, recall_k);
        records[t.index]["settings"]["run_index"] = t.index;

        if (cfg.dump_scores) {
          char prefix[32];
          std::snprintf(prefix, sizeof(prefix), "run_%04d_score", t.index);
          dump_scores_csv(scores, out_dir / "scores", prefix);
        }
        if (cfg.dump_outputs) {
          char name[32];
          std::snprintf(name, sizeof(name), "run_%04d_out.bin", t.index);
          std::filesystem::create_directories(out_dir / "outputs");
          write_tensor(out_dir / "outputs" / name, sparse.O);
        }
      } catch (...) {
        std::lock_guard<std::mutex> lk(error_mu);
        if (!first_error) first_error = std::current_exception();
        failed.store(true);
        return;
      }
    }
  };

  const int n_workers = std::min<std::size_t>(env_workers(), tasks.size());
  if (n_workers <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int i = 0; i < n_workers; ++i) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  if (first_error) std::rethrow_exception(first_error);

  for (std::size_t i = 0; i < records.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof(name), "run_%04zu.json", i);
    std::ofstream os(out_dir / "records" / name, std::ios::binary);
    if (!os) throw IoError("cannot open record " + (out_dir / "records" / name).string());
    os << records[i].dump(1, '\t') << "\n";
  }
  write_metrics_csv(rows, out_dir / "metrics.csv");

  json meta;
  meta["timestamp_utc"] = iso_utc_now();
  meta["elapsed_seconds"] =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
  meta["workers"] = n_workers;
  meta["runs"] = rows.size();
  meta["workload"] = {{"kind", to_string(w.kind)}, {"L", w.inputs.L},     {"H", w.inputs.H},
                      {"d_k", w.inputs.d_k},       {"S", w.inputs.S},     {"seed", w.seed},
                      {"content_hash", content_hash(w.inputs)}};
  std::ofstream meta_os(out_dir / "run_meta.json", std::ios::binary);
  if (!meta_os) throw IoError("cannot open " + (out_dir / "run_meta.json").string());
  meta_os << meta.dump(1, '\t') << "\n";
  return rows;
}

std::vector<RunRow> collect_records(const std::filesystem::path& records_dir) {
  const auto is_record = [](const std::filesystem::path& p) {
    if (p.extension() != ".json") return false;
    const std::string stem = p.stem().string();
    if (stem.size() <= 4 || stem.compare(0, 4, "run_") != 0) return false;
    return std::all_of(stem.begin() + 4, stem.end(), [](unsigned char c) { return std::isdigit(c); });
  };
  // Accept either the records directory itself or an experiment output
  // directory that contains one.
  std::filesystem::path dir = records_dir;
  if (std::filesystem::is_directory(dir / "records")) dir /= "records";
  std::vector<std::filesystem::path> files;
  std::error_code ec;
  for (const auto& e : std::filesystem::directory_iterator(dir, ec))
    if (is_record(e.path())) files.push_back(e.path());
  if (ec) throw IoError("cannot list " + dir.string());
  if (files.empty()) throw IoError("no run records in " + dir.string());
  std::sort(files.begin(), files.end());
  std::vector<RunRow> rows;
  for (const auto& f : files) {
    json rec;
    try {
      rec = json::parse(read_file(f));
    } catch (const json::exception& e) {
      throw IoError("record " + f.string() + ": " + e.what());
    }
    try {
      RunRow r;
      const auto& s = rec.at("settings");
      const auto& m = rec.at("metrics");
      const auto& fl = rec.at("flops");
      r.proxy = parse_proxy_tag(s.at("proxy").get<std::string>());
      r.c_q = s.at("c_q").get<int>();
      r.c_k = s.at("c_k").get<int>();
      r.c_h = s.at("c_h").get<int>();
      r.strategy = parse_pool_strategy(s.at("strategy").get<std::string>());
      r.P = s.at("P").get<double>();
      r.causal_mode = parse_causal_mode(s.at("causal_mode").get<std::string>());
      r.rho = m.at("rho").get<double>();
      r.spearman = m.at("spearman").get<double>();
      r.recall = m.at("recall").get<double>();
      r.max_abs = m.at("max_abs").get<double>();
      r.cosine = m.at("cosine").get<double>();
      r.selection_flops = fl.at("selection_total").get<std::uint64_t>();
      r.attention_flops = fl.at("sparse_attention").get<std::uint64_t>();
      rows.push_back(r);
    } catch (const json::exception& e) {
      throw IoError("record " + f.string() + ": " + e.what());
    }
  }
  return rows;
}

}  // namespace unisparse

#include "unisparse/workloads.hpp"

#include "unisparse/rng.hpp"
#include "unisparse/tensor_io.hpp"

#include <json.hpp>

#include <algorithm>
#include <fstream>

namespace unisparse {

namespace {

// Stream tags: 0/1/2 noise for Q/K/V, 3/4 planted sets and directions.
enum : std::uint64_t { kTagQ = 0, kTagK = 1, kTagV = 2, kTagPlantSet = 3, kTagPlantDir = 4 };

MatrixRMf gaussian_stack(std::uint64_t seed, std::uint64_t role, int h, int L, int d_k, int S,
                         double scale) {
  MatrixRMf m(L, d_k);
  for (int b = 0; b * S < L; ++b) {
    CounterRng rng(chain_seed(seed, role, std::uint64_t(h), std::uint64_t(b)));
    for (int r = b * S; r < (b + 1) * S; ++r)
      for (int c = 0; c < d_k; ++c) m(r, c) = float(scale * rng.next_gaussian());
  }
  return m;
}

VectorX<float> unit_direction(CounterRng& rng, int d_k) {
  VectorX<double> u(d_k);
  for (int c = 0; c < d_k; ++c) u(c) = rng.next_gaussian();
  const double n = u.norm();
  if (n > 0.0) u /= n;
  return u.cast<float>();
}

// m_take distinct values from pool, ascending, via partial Fisher-Yates.
std::vector<int> sample_distinct(CounterRng& rng, std::vector<int> pool, int m_take) {
  for (int t = 0; t < m_take; ++t) {
    const int swap_with = t + int(rng.next_u64() % std::uint64_t(pool.size() - t));
    std::swap(pool[t], pool[swap_with]);
  }
  pool.resize(m_take);
  std::sort(pool.begin(), pool.end());
  return pool;
}

}  // namespace

std::string to_string(WorkloadKind k) {
  switch (k) {
    case WorkloadKind::Gaussian: return "gaussian";
    case WorkloadKind::PlantedBlocks: return "planted_blocks";
    case WorkloadKind::LocalityShift: return "locality_shift";
  }
  return "?";
}

WorkloadKind parse_workload_kind(const std::string& s) {
  if (s == "gaussian") return WorkloadKind::Gaussian;
  if (s == "planted_blocks") return WorkloadKind::PlantedBlocks;
  if (s == "locality_shift") return WorkloadKind::LocalityShift;
  throw std::invalid_argument("unknown workload kind: " + s);
}

Workload gen_workload(WorkloadKind kind, int L, int H, int d_k, int S, std::uint64_t seed,
                      WorkloadParams params) {
  if (L <= 0 || H <= 0 || d_k <= 0 || S <= 0 || L % S != 0)
    throw std::invalid_argument("gen_workload: need positive dims with L divisible by S");
  const int N = L / S;
  const bool planted_kind = kind != WorkloadKind::Gaussian;
  if (planted_kind) {
    if (params.m < 1 || params.m > N)
      throw std::invalid_argument("gen_workload: m must lie in [1, N]");
    if (kind == WorkloadKind::LocalityShift && (N < 2 || params.m > N - N / 2))
      throw std::invalid_argument(
          "gen_workload: locality_shift needs m plantable in the upper half of blocks");
    if (!(params.sigma > 0.0) || !(params.gain >= 0.0))
      throw std::invalid_argument("gen_workload: sigma must be positive, gain nonnegative");
  }

  Workload w;
  w.kind = kind;
  w.seed = seed;
  w.params = params;
  w.inputs.H = H;
  w.inputs.L = L;
  w.inputs.d_k = d_k;
  w.inputs.S = S;
  const double scale = planted_kind ? params.sigma : 1.0;
  for (int h = 0; h < H; ++h) {
    w.inputs.Q.push_back(gaussian_stack(seed, kTagQ, h, L, d_k, S, scale));
    w.inputs.K.push_back(gaussian_stack(seed, kTagK, h, L, d_k, S, scale));
    w.inputs.V.push_back(gaussian_stack(seed, kTagV, h, L, d_k, S, scale));
  }
  if (!planted_kind) return w;

  w.planted.assign(H, std::vector<std::vector<int>>(N));
  const float gain = float(params.gain);
  for (int h = 0; h < H; ++h) {
    std::vector<int> last_set;
    if (kind == WorkloadKind::LocalityShift) {
      CounterRng rng(chain_seed(seed, kTagPlantSet, std::uint64_t(h), std::uint64_t(N - 1)));
      std::vector<int> upper;
      for (int j = N / 2; j < N; ++j) upper.push_back(j);
      last_set = sample_distinct(rng, upper, params.m);
    }
    for (int i = 0; i < N; ++i) {
      std::vector<int>& set = w.planted[h][i];
      if (kind == WorkloadKind::LocalityShift && i == N - 1) {
        set = last_set;
      } else {
        CounterRng rng(chain_seed(seed, kTagPlantSet, std::uint64_t(h), std::uint64_t(i)));
        std::vector<int> pool;
        for (int j = 0; j <= i; ++j)
          if (kind != WorkloadKind::LocalityShift ||
              !std::binary_search(last_set.begin(), last_set.end(), j))
            pool.push_back(j);
        set = sample_distinct(rng, pool, std::min(params.m, int(pool.size())));
      }
      CounterRng dir_rng(chain_seed(seed, kTagPlantDir, std::uint64_t(h), std::uint64_t(i)));
      const VectorX<float> u = unit_direction(dir_rng, d_k);
      w.inputs.Q[h].middleRows(i * S, S).rowwise() += gain * u.transpose();
      for (int j : set) w.inputs.K[h].middleRows(j * S, S).rowwise() += gain * u.transpose();
    }
  }
  return w;
}

void save_workload(const Workload& w, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  write_tensor(dir / "q.bin", w.inputs.Q);
  write_tensor(dir / "k.bin", w.inputs.K);
  write_tensor(dir / "v.bin", w.inputs.V);
  nlohmann::json j;
  j["version"] = 1;
  j["kind"] = to_string(w.kind);
  j["L"] = w.inputs.L;
  j["H"] = w.inputs.H;
  j["d_k"] = w.inputs.d_k;
  j["S"] = w.inputs.S;
  j["seed"] = w.seed;
  j["params"] = {{"sigma", w.params.sigma}, {"gain", w.params.gain}, {"m", w.params.m}};
  j["planted"] = w.planted;
  std::ofstream os(dir / "workload.json");
  if (!os) throw std::runtime_error("save_workload: cannot open " + (dir / "workload.json").string());
  os << j.dump(1, '\t') << "\n";
}

Workload load_workload(const std::filesystem::path& dir) {
  std::ifstream is(dir / "workload.json");
  if (!is) throw std::runtime_error("load_workload: cannot open " + (dir / "workload.json").string());
  nlohmann::json j;
  try {
    is >> j;
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error("load_workload: " + (dir / "workload.json").string() + ": " + e.what());
  }
  Workload w;
  w.kind = parse_workload_kind(j.at("kind").get<std::string>());
  w.seed = j.at("seed").get<std::uint64_t>();
  w.params.sigma = j.at("params").at("sigma").get<double>();
  w.params.gain = j.at("params").at("gain").get<double>();
  w.params.m = j.at("params").at("m").get<int>();
  w.planted = j.at("planted").get<std::vector<std::vector<std::vector<int>>>>();

  TensorFile q = read_tensor(dir / "q.bin");
  TensorFile k = read_tensor(dir / "k.bin");
  TensorFile v = read_tensor(dir / "v.bin");
  w.inputs.H = q.H;
  w.inputs.L = q.L;
  w.inputs.d_k = q.d_k;
  w.inputs.S = j.at("S").get<int>();
  w.inputs.Q = std::move(q.data);
  w.inputs.K = std::move(k.data);
  w.inputs.V = std::move(v.data);
  if (k.H != q.H || k.L != q.L || k.d_k != q.d_k || v.H != q.H || v.L != q.L || v.d_k != q.d_k)
    throw std::runtime_error("load_workload: tensor files disagree on shape in " + dir.string());
  if (j.at("L").get<int>() != q.L || j.at("H").get<int>() != q.H ||
      j.at("d_k").get<int>() != q.d_k)
    throw std::runtime_error("load_workload: sidecar dims disagree with tensors in " + dir.string());
  return w;
}

}  // namespace unisparse

#include "unisparse/selection.hpp"

#include <json.hpp>

#include <algorithm>
#include <fstream>
#include <numeric>

namespace unisparse {

SelectionSet top_p_row(std::span<const double> scores, double P) {
  if (scores.empty()) throw std::invalid_argument("top_p_row: empty score row");
  if (!(P > 0.0) || P > 1.0) throw std::invalid_argument("top_p_row: P must lie in (0, 1]");
  for (double s : scores)
    if (!(s >= 0.0)) throw std::invalid_argument("top_p_row: scores must be nonnegative");

  const int n = int(scores.size());
  SelectionSet out;

  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return scores[a] > scores[b]; });

  // Total accumulated in the same order as the greedy walk so that the full
  // prefix reaches it exactly.
  double total = 0.0;
  for (int idx : order) total += scores[idx];
  if (total <= 0.0) {
    out.indices = {n - 1};
    out.covered_fraction = 1.0;
    return out;
  }
  if (P >= 1.0) {
    out.indices = order;
    out.covered_fraction = 1.0;
    return out;
  }

  double cum = 0.0;
  for (int idx : order) {
    out.indices.push_back(idx);
    cum += scores[idx];
    if (cum >= P * total) break;
  }
  out.covered_fraction = cum / total;
  return out;
}

std::int64_t BlockMask::selected_in_head(int h) const {
  return std::int64_t(mask[h].count());
}

std::int64_t BlockMask::selected_total() const {
  std::int64_t total = 0;
  for (int h = 0; h < H; ++h) total += selected_in_head(h);
  return total;
}

BlockMask build_block_mask(const BlockScoreMatrix& scores, double P, int c_h, int H) {
  if (c_h <= 0 || H <= 0) throw std::invalid_argument("build_block_mask: c_h and H must be positive");
  if (H % c_h != 0) throw std::invalid_argument("build_block_mask: H not divisible by c_h");
  if (scores.score.size() != std::size_t(H / c_h))
    throw std::invalid_argument("build_block_mask: expected " + std::to_string(H / c_h) +
                                " score planes, got " + std::to_string(scores.score.size()));
  const int N = scores.geom.N;

  BlockMask out;
  out.H = H;
  out.N = N;
  out.P_used = P;
  out.mask.assign(H, MaskPlane::Constant(N, N, false));
  out.coverage = MatrixRMd::Zero(H, N);
  std::vector<double> prefix;
  for (int hc = 0; hc < H / c_h; ++hc) {
    const auto& plane = scores.score[hc];
    for (int i = 0; i < N; ++i) {
      prefix.assign(plane.row(i).data(), plane.row(i).data() + i + 1);
      SelectionSet sel = top_p_row(prefix, P);
      for (int g = 0; g < c_h; ++g) {
        const int h = hc * c_h + g;
        for (int j : sel.indices) out.mask[h](i, j) = true;
        out.coverage(h, i) = sel.covered_fraction;
      }
    }
  }
  return out;
}

void save_mask_json(const BlockMask& mask, const std::filesystem::path& path) {
  nlohmann::json j;
  j["version"] = 1;
  j["H"] = mask.H;
  j["N"] = mask.N;
  j["P"] = mask.P_used;
  auto& heads = j["heads"] = nlohmann::json::array();
  for (int h = 0; h < mask.H; ++h) {
    nlohmann::json rows = nlohmann::json::array();
    for (int i = 0; i < mask.N; ++i) {
      nlohmann::json runs = nlohmann::json::array();
      int j0 = -1;
      for (int b = 0; b <= mask.N; ++b) {
        const bool on = b < mask.N && mask.mask[h](i, b);
        if (on && j0 < 0) j0 = b;
        if (!on && j0 >= 0) {
          runs.push_back({j0, b - j0});
          j0 = -1;
        }
      }
      rows.push_back(std::move(runs));
    }
    heads.push_back(std::move(rows));
  }
  std::ofstream os(path);
  if (!os) throw std::runtime_error("save_mask_json: cannot open " + path.string());
  os << j.dump(1, '\t') << "\n";
}

BlockMask load_mask_json(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("load_mask_json: cannot open " + path.string());
  nlohmann::json j;
  try {
    is >> j;
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error("load_mask_json: " + path.string() + ": " + e.what());
  }
  BlockMask out;
  out.H = j.at("H").get<int>();
  out.N = j.at("N").get<int>();
  out.P_used = j.at("P").get<double>();
  out.mask.assign(out.H, MaskPlane::Constant(out.N, out.N, false));
  out.coverage = MatrixRMd::Zero(out.H, out.N);
  const auto& heads = j.at("heads");
  for (int h = 0; h < out.H; ++h) {
    const auto& rows = heads.at(h);
    for (int i = 0; i < out.N; ++i)
      for (const auto& run : rows.at(i)) {
        const int start = run.at(0).get<int>(), len = run.at(1).get<int>();
        for (int b = start; b < start + len; ++b) out.mask[h](i, b) = true;
      }
  }
  return out;
}

}  // namespace unisparse

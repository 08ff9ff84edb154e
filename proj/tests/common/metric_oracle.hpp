#pragma once

#include <algorithm>
#include <vector>

#include "hicmd/eval.hpp"

namespace hicmd::oracle {

// Exhaustive reference: compares every gallery pair to count how many items
// precede each relevant one.
struct Brute {
  std::vector<double> cmc;
  double map = 0;
};

inline Brute brute_force(const eval::Matrix& d, const std::vector<int>& ql, const std::vector<int>& gl, int max_rank) {
  Brute out;
  out.cmc.assign(static_cast<std::size_t>(max_rank), 0.0);
  int valid = 0;
  for (std::size_t q = 0; q < d.size(); ++q) {
    auto before = [&](std::size_t a, std::size_t b) { return d[q][a] < d[q][b] || (d[q][a] == d[q][b] && a < b); };
    std::vector<int> rank_of(gl.size());
    for (std::size_t j = 0; j < gl.size(); ++j) {
      int r = 1;
      for (std::size_t k = 0; k < gl.size(); ++k) r += before(k, j) ? 1 : 0;
      rank_of[j] = r;
    }
    std::vector<int> hits;
    for (std::size_t j = 0; j < gl.size(); ++j)
      if (gl[j] == ql[q]) hits.push_back(rank_of[j]);
    if (hits.empty()) continue;
    ++valid;
    std::sort(hits.begin(), hits.end());
    double ap = 0;
    for (std::size_t i = 0; i < hits.size(); ++i) ap += double(i + 1) / hits[i];
    out.map += ap / hits.size();
    for (int k = hits[0]; k <= max_rank; ++k) out.cmc[k - 1] += 1;
  }
  if (valid > 0) {
    out.map /= valid;
    for (auto& c : out.cmc) c /= valid;
  }
  return out;
}

}  // namespace hicmd::oracle

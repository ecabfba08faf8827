#pragma once

// Independent reference computations for tests. Nothing here calls into the
// scheduling code it is used to check.

#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

namespace oracle {

struct BestSubset {
  double sum = -1.0;
  std::vector<int> hours;  // ascending
};

/// Exhaustive search over all k-subsets of `shares` in lexicographic order.
/// Keeps the first subset reaching the maximal sum, so among equal sums the
/// lexicographically smallest (earliest hours) wins. `tol` absorbs rounding
/// differences between summation orders.
inline BestSubset best_k_subset(const std::vector<double>& shares, int k, double tol = 1e-12) {
  BestSubset best;
  const int n = static_cast<int>(shares.size());
  std::vector<int> pick;
  pick.reserve(static_cast<std::size_t>(k));
  auto rec = [&](auto&& self, int start, double sum) -> void {
    if (static_cast<int>(pick.size()) == k) {
      if (best.hours.empty() || sum > best.sum + tol) {
        best.sum = sum;
        best.hours = pick;
      }
      return;
    }
    const int need = k - static_cast<int>(pick.size());
    for (int i = start; i <= n - need; ++i) {
      pick.push_back(i);
      self(self, i + 1, sum + shares[static_cast<std::size_t>(i)]);
      pick.pop_back();
    }
  };
  if (k == 0) {
    best.sum = 0.0;
    return best;
  }
  rec(rec, 0, 0.0);
  return best;
}

inline double mean(const std::vector<double>& v) {
  double s = 0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

/// Mean of the best k-subset divided by the all-hours mean, minus one.
inline double best_increase(const std::vector<double>& shares, int k) {
  auto best = best_k_subset(shares, k);
  return (best.sum / k) / mean(shares) - 1.0;
}

/// (hour, is_on) edges from contiguous runs of true slots.
inline std::vector<std::pair<int, bool>> run_edges(const std::array<bool, 24>& slots) {
  std::vector<std::pair<int, bool>> out;
  int h = 0;
  while (h < 24) {
    if (!slots[static_cast<std::size_t>(h)]) {
      ++h;
      continue;
    }
    int start = h;
    while (h < 24 && slots[static_cast<std::size_t>(h)]) ++h;
    out.emplace_back(start, true);
    out.emplace_back(h, false);
  }
  return out;
}

/// Minimal reader for fixture CSVs: date -> 24 shares, (wind+solar)/total.
inline std::map<std::string, std::vector<double>> read_shares(const std::string& path) {
  std::ifstream in(path);
  std::map<std::string, std::vector<double>> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#' || line.rfind("timestamp", 0) == 0) continue;
    std::stringstream ss(line);
    std::string ts, w, s, t;
    std::getline(ss, ts, ',');
    std::getline(ss, w, ',');
    std::getline(ss, s, ',');
    std::getline(ss, t, ',');
    auto& day = out[ts.substr(0, 10)];
    day.resize(24);
    int hour = std::stoi(ts.substr(11, 2));
    double total = std::stod(t);
    day[static_cast<std::size_t>(hour)] = total > 0 ? (std::stod(w) + std::stod(s)) / total : 0.0;
  }
  return out;
}

}  // namespace oracle

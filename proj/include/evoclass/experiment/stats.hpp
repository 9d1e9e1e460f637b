#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace evoclass::experiment {

struct CoverageReport {
  std::uint64_t totalHits = 0;
  std::uint64_t applied = 0;
  std::uint64_t notApplied = 0;
  double coverageApplied = 0.0;     // percent
  double coverageNotApplied = 0.0;  // percent
};

inline CoverageReport coverage(std::uint64_t applied, std::uint64_t notApplied) {
  const std::uint64_t total = applied + notApplied;
  if (total == 0) throw std::invalid_argument("coverage: no rule hits");
  const double t = static_cast<double>(total);
  return {total, applied, notApplied, static_cast<double>(applied) / t * 100.0,
          static_cast<double>(notApplied) / t * 100.0};
}

struct MannWhitneyResult {
  double u = 0.0;  // for the first sample: #{x > y} + 0.5 * #{x == y}
  double pValue = 1.0;
  bool exact = false;
};

namespace detail {

inline void require_nonempty(std::span<const double> xs, std::span<const double> ys, const char* who) {
  if (xs.empty() || ys.empty()) throw std::invalid_argument(std::string(who) + ": empty sample");
}

// Midranks of the pooled sample, doubled so they are integers.
inline std::vector<long> doubled_midranks(const std::vector<double>& pooled, std::vector<double>* tieSizes = nullptr) {
  const std::size_t n = pooled.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return pooled[a] < pooled[b]; });
  std::vector<long> ranks(n);
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && pooled[order[j]] == pooled[order[i]]) ++j;
    const long twice = static_cast<long>(i + 1 + j);  // (i+1) + j = 2 * midrank
    for (std::size_t k = i; k < j; ++k) ranks[order[k]] = twice;
    if (tieSizes) tieSizes->push_back(static_cast<double>(j - i));
    i = j;
  }
  return ranks;
}

}  // namespace detail

inline double u_statistic(std::span<const double> xs, std::span<const double> ys) {
  detail::require_nonempty(xs, ys, "u_statistic");
  double u = 0.0;
  for (double x : xs) {
    for (double y : ys) u += x > y ? 1.0 : (x == y ? 0.5 : 0.0);
  }
  return u;
}

inline constexpr std::size_t kExactMannWhitneyLimit = 16;

// Two-sided. Exact permutation distribution for small pooled samples (midranks
// under ties), otherwise the normal approximation with tie and continuity correction.
inline MannWhitneyResult mann_whitney(std::span<const double> xs, std::span<const double> ys) {
  detail::require_nonempty(xs, ys, "mann_whitney");
  const std::size_t n = xs.size();
  const std::size_t m = ys.size();
  const std::size_t total = n + m;
  MannWhitneyResult r;
  r.u = u_statistic(xs, ys);

  std::vector<double> pooled(xs.begin(), xs.end());
  pooled.insert(pooled.end(), ys.begin(), ys.end());
  std::vector<double> ties;
  const auto ranks = detail::doubled_midranks(pooled, &ties);

  if (total <= kExactMannWhitneyLimit) {
    r.exact = true;
    // ways[k][s]: number of k-subsets of the pooled sample whose doubled ranks sum to s.
    const long maxSum = std::accumulate(ranks.begin(), ranks.end(), 0L);
    std::vector<std::vector<double>> ways(n + 1, std::vector<double>(static_cast<std::size_t>(maxSum) + 1, 0.0));
    ways[0][0] = 1.0;
    for (std::size_t i = 0; i < total; ++i) {
      for (std::size_t k = std::min(i + 1, n); k >= 1; --k) {
        for (long s = maxSum; s >= ranks[i]; --s) {
          ways[k][static_cast<std::size_t>(s)] += ways[k - 1][static_cast<std::size_t>(s - ranks[i])];
        }
      }
    }
    long observed = 0;
    for (std::size_t i = 0; i < n; ++i) observed += ranks[i];
    const long center = static_cast<long>(n * (total + 1));  // doubled expected rank sum
    const long obsDev = std::labs(observed - center);
    double extreme = 0.0;
    double all = 0.0;
    for (long s = 0; s <= maxSum; ++s) {
      const double w = ways[n][static_cast<std::size_t>(s)];
      all += w;
      if (std::labs(s - center) >= obsDev) extreme += w;
    }
    r.pValue = std::min(1.0, extreme / all);
    return r;
  }

  const double nd = static_cast<double>(n);
  const double md = static_cast<double>(m);
  const double td = static_cast<double>(total);
  double tieTerm = 0.0;
  for (double t : ties) tieTerm += t * t * t - t;
  const double variance = nd * md / 12.0 * ((td + 1.0) - tieTerm / (td * (td - 1.0)));
  if (variance <= 0.0) {
    r.pValue = 1.0;
    return r;
  }
  const double z = std::max(0.0, std::fabs(r.u - nd * md / 2.0) - 0.5) / std::sqrt(variance);
  r.pValue = std::min(1.0, std::erfc(z / std::sqrt(2.0)));
  return r;
}

inline double vargha_delaney_a12(std::span<const double> xs, std::span<const double> ys) {
  detail::require_nonempty(xs, ys, "vargha_delaney_a12");
  return u_statistic(xs, ys) / (static_cast<double>(xs.size()) * static_cast<double>(ys.size()));
}

inline double pearson(std::span<const double> xs, std::span<const double> ys) {
  if (xs.size() != ys.size() || xs.size() < 2) throw std::invalid_argument("pearson: need two equal samples of size >= 2");
  const double n = static_cast<double>(xs.size());
  const double mx = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
  const double my = std::accumulate(ys.begin(), ys.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxy += (xs[i] - mx) * (ys[i] - my);
    sxx += (xs[i] - mx) * (xs[i] - mx);
    syy += (ys[i] - my) * (ys[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) throw std::invalid_argument("pearson: zero variance");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

}  // namespace evoclass::experiment

#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <numeric>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace evoclass::classifier {

// Positive class = success (status 200).
struct ConfusionCounts {
  std::uint64_t tp = 0;
  std::uint64_t fp = 0;
  std::uint64_t tn = 0;
  std::uint64_t fn = 0;

  std::uint64_t total() const noexcept { return tp + fp + tn + fn; }
  friend bool operator==(const ConfusionCounts&, const ConfusionCounts&) = default;
};

/// A metric whose denominator is zero has no value; std::nullopt marks it.
using Metric = std::optional<double>;

inline Metric ratio(double num, double den) {
  if (den == 0.0) return std::nullopt;
  return num / den;
}

inline Metric accuracy(const ConfusionCounts& c) {
  return ratio(static_cast<double>(c.tp + c.tn), static_cast<double>(c.total()));
}
inline Metric precision(const ConfusionCounts& c) {
  return ratio(static_cast<double>(c.tp), static_cast<double>(c.tp + c.fp));
}
inline Metric recall(const ConfusionCounts& c) {
  return ratio(static_cast<double>(c.tp), static_cast<double>(c.tp + c.fn));
}
inline Metric f1(const ConfusionCounts& c) {
  const auto p = precision(c);
  const auto r = recall(c);
  if (!p || !r) return std::nullopt;
  return ratio(2.0 * *p * *r, *p + *r);
}

inline std::string format_metric(const Metric& m, int decimals = 4) {
  if (!m) return "undefined";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, *m);
  return buf;
}

inline ConfusionCounts confusion(std::span<const int> truth, std::span<const int> predicted) {
  if (truth.size() != predicted.size()) throw std::invalid_argument("confusion: size mismatch");
  ConfusionCounts c;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (predicted[i] == 1) {
      (truth[i] == 1 ? c.tp : c.fp) += 1;
    } else {
      (truth[i] == 1 ? c.fn : c.tn) += 1;
    }
  }
  return c;
}

struct RocPoint {
  double fpr = 0.0;
  double tpr = 0.0;
};

struct RocCurve {
  std::vector<RocPoint> points;
  Metric auc;
};

// Rank-statistic AUC: P(score_pos > score_neg) + 0.5 * P(tie).
inline Metric auc(std::span<const double> scores, std::span<const int> truth) {
  if (scores.size() != truth.size()) throw std::invalid_argument("auc: size mismatch");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return scores[a] < scores[b]; });
  double rankSumPos = 0.0;
  std::uint64_t nPos = 0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
    const double midrank = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
    for (std::size_t k = i; k < j; ++k) {
      if (truth[order[k]] == 1) {
        rankSumPos += midrank;
        ++nPos;
      }
    }
    i = j;
  }
  const std::uint64_t nNeg = scores.size() - nPos;
  if (nPos == 0 || nNeg == 0) return std::nullopt;
  const double u = rankSumPos - static_cast<double>(nPos) * static_cast<double>(nPos + 1) / 2.0;
  return u / (static_cast<double>(nPos) * static_cast<double>(nNeg));
}

// One point per distinct threshold, from (0,0) to (1,1).
inline RocCurve roc_curve(std::span<const double> scores, std::span<const int> truth) {
  if (scores.size() != truth.size()) throw std::invalid_argument("roc_curve: size mismatch");
  RocCurve curve;
  curve.auc = auc(scores, truth);
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return scores[a] > scores[b]; });
  double pos = 0.0;
  double neg = 0.0;
  for (int t : truth) (t == 1 ? pos : neg) += 1.0;
  curve.points.push_back({0.0, 0.0});
  double tp = 0.0;
  double fp = 0.0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) {
      (truth[order[j]] == 1 ? tp : fp) += 1.0;
      ++j;
    }
    curve.points.push_back({neg > 0 ? fp / neg : 0.0, pos > 0 ? tp / pos : 0.0});
    i = j;
  }
  if (curve.points.back().fpr != 1.0 || curve.points.back().tpr != 1.0) curve.points.push_back({1.0, 1.0});
  return curve;
}

struct Evaluation {
  ConfusionCounts counts;
  Metric accuracy;
  Metric precision;
  Metric recall;
  Metric f1;
  RocCurve roc;
};

inline Evaluation evaluate_counts(const ConfusionCounts& c) {
  return {c, classifier::accuracy(c), classifier::precision(c), classifier::recall(c), classifier::f1(c), {}};
}

// Predictions use the 0.5 threshold on the success probability.
inline Evaluation evaluate_scores(std::span<const double> scores, std::span<const int> truth) {
  if (scores.empty()) throw std::invalid_argument("evaluate: empty test set");
  std::vector<int> predicted(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) predicted[i] = scores[i] >= 0.5 ? 1 : 0;
  auto e = evaluate_counts(confusion(truth, predicted));
  e.roc = roc_curve(scores, truth);
  return e;
}

}  // namespace evoclass::classifier

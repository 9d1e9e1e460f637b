#pragma once

#include <algorithm>
#include <cmath>
#include <memory>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "evoclass/classifier/forest.hpp"

namespace evoclass::classifier {

enum class BaselineKind { Logistic, Knn, GaussianNB };

inline std::string_view to_string(BaselineKind k) {
  switch (k) {
    case BaselineKind::Logistic: return "LogisticRegression";
    case BaselineKind::Knn: return "KNeighborsClassifier";
    case BaselineKind::GaussianNB: return "GaussianNB";
  }
  return "";
}

struct BaselineHyperparams {
  // logistic
  int iterations = 500;
  double learningRate = 0.5;
  double l2 = 1e-4;
  // knn
  int k = 5;
  // gaussian NB
  double varSmoothing = 1e-9;
};

namespace detail {

struct Standardizer {
  std::vector<double> mean;
  std::vector<double> scale;

  explicit Standardizer(const FeatureMatrix& m) : mean(m.cols, 0.0), scale(m.cols, 1.0) {
    const double n = static_cast<double>(m.rows());
    for (std::size_t i = 0; i < m.rows(); ++i) {
      for (std::size_t j = 0; j < m.cols; ++j) mean[j] += m.at(i, j) / n;
    }
    std::vector<double> var(m.cols, 0.0);
    for (std::size_t i = 0; i < m.rows(); ++i) {
      for (std::size_t j = 0; j < m.cols; ++j) var[j] += (m.at(i, j) - mean[j]) * (m.at(i, j) - mean[j]) / n;
    }
    for (std::size_t j = 0; j < m.cols; ++j) scale[j] = var[j] > 0.0 ? std::sqrt(var[j]) : 1.0;
  }

  double apply(std::size_t j, double v) const { return (v - mean[j]) / scale[j]; }
};

inline double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

}  // namespace detail

/// Full-batch gradient descent on the mean log-loss plus an L2 penalty, on standardized inputs.
class LogisticRegression final : public ProbabilisticClassifier {
 public:
  LogisticRegression(const FeatureMatrix& train, const BaselineHyperparams& hp) : scaler_(train), w_(train.cols, 0.0) {
    detail::require_both_classes(train, "LogisticRegression");
    const std::size_t n = train.rows();
    const std::size_t d = train.cols;
    std::vector<double> x(n * d);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < d; ++j) x[i * d + j] = scaler_.apply(j, train.at(i, j));
    }
    std::vector<double> grad(d);
    for (int it = 0; it < hp.iterations; ++it) {
      std::fill(grad.begin(), grad.end(), 0.0);
      double gradB = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        double z = b_;
        for (std::size_t j = 0; j < d; ++j) z += w_[j] * x[i * d + j];
        const double err = detail::sigmoid(z) - train.y[i];
        for (std::size_t j = 0; j < d; ++j) grad[j] += err * x[i * d + j];
        gradB += err;
      }
      for (std::size_t j = 0; j < d; ++j) w_[j] -= hp.learningRate * (grad[j] / static_cast<double>(n) + hp.l2 * w_[j]);
      b_ -= hp.learningRate * gradB / static_cast<double>(n);
    }
  }

  double predict_proba(std::span<const double> row) const override {
    double z = b_;
    for (std::size_t j = 0; j < w_.size(); ++j) z += w_[j] * scaler_.apply(j, row[j]);
    return detail::sigmoid(z);
  }

  std::string name() const override { return std::string(to_string(BaselineKind::Logistic)); }

 private:
  detail::Standardizer scaler_;
  std::vector<double> w_;
  double b_ = 0.0;
};

/// Majority vote among the k Euclidean-nearest training rows (raw feature scale).
/// Equal distances are resolved by training-row order.
class KNeighbors final : public ProbabilisticClassifier {
 public:
  KNeighbors(const FeatureMatrix& train, const BaselineHyperparams& hp) : train_(train), k_(hp.k) {
    detail::require_both_classes(train, "KNeighbors");
    if (k_ < 1) throw std::invalid_argument("KNeighbors: k must be >= 1");
    k_ = std::min<int>(k_, static_cast<int>(train.rows()));
  }

  double predict_proba(std::span<const double> row) const override {
    const std::size_t n = train_.rows();
    std::vector<std::pair<double, std::size_t>> dist(n);
    for (std::size_t i = 0; i < n; ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < train_.cols; ++j) {
        const double diff = train_.at(i, j) - row[j];
        s += diff * diff;
      }
      dist[i] = {s, i};
    }
    const auto k = static_cast<std::size_t>(k_);
    std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(k), dist.end());
    double pos = 0.0;
    for (std::size_t i = 0; i < k; ++i) pos += train_.y[dist[i].second];
    return pos / static_cast<double>(k);
  }

  std::string name() const override { return std::string(to_string(BaselineKind::Knn)); }

 private:
  FeatureMatrix train_;
  int k_;
};

/// Per-class independent Gaussians; variances get epsilon = varSmoothing * largest feature variance.
class GaussianNaiveBayes final : public ProbabilisticClassifier {
 public:
  GaussianNaiveBayes(const FeatureMatrix& train, const BaselineHyperparams& hp) {
    detail::require_both_classes(train, "GaussianNB");
    const std::size_t d = train.cols;
    for (auto& m : mean_) m.assign(d, 0.0);
    for (auto& v : var_) v.assign(d, 0.0);
    double count[2] = {0.0, 0.0};
    for (std::size_t i = 0; i < train.rows(); ++i) {
      const auto c = static_cast<std::size_t>(train.y[i]);
      count[c] += 1.0;
      for (std::size_t j = 0; j < d; ++j) mean_[c][j] += train.at(i, j);
    }
    for (std::size_t c = 0; c < 2; ++c) {
      for (auto& v : mean_[c]) v /= count[c];
      logPrior_[c] = std::log(count[c] / static_cast<double>(train.rows()));
    }
    for (std::size_t i = 0; i < train.rows(); ++i) {
      const auto c = static_cast<std::size_t>(train.y[i]);
      for (std::size_t j = 0; j < d; ++j) {
        const double diff = train.at(i, j) - mean_[c][j];
        var_[c][j] += diff * diff / count[c];
      }
    }
    const detail::Standardizer overall(train);
    double maxVar = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      // Standardizer reports unit scale for constant columns; those have zero variance.
      bool constant = true;
      for (std::size_t i = 1; i < train.rows() && constant; ++i) constant = train.at(i, j) == train.at(0, j);
      if (!constant) maxVar = std::max(maxVar, overall.scale[j] * overall.scale[j]);
    }
    const double eps = hp.varSmoothing * (maxVar > 0.0 ? maxVar : 1.0);
    for (auto& v : var_) {
      for (auto& x : v) x += eps;
    }
  }

  double predict_proba(std::span<const double> row) const override {
    double logp[2];
    for (std::size_t c = 0; c < 2; ++c) {
      double s = logPrior_[c];
      for (std::size_t j = 0; j < row.size(); ++j) {
        const double diff = row[j] - mean_[c][j];
        s -= 0.5 * std::log(2.0 * M_PI * var_[c][j]) + diff * diff / (2.0 * var_[c][j]);
      }
      logp[c] = s;
    }
    return detail::sigmoid(logp[1] - logp[0]);
  }

  std::string name() const override { return std::string(to_string(BaselineKind::GaussianNB)); }

 private:
  std::vector<double> mean_[2];
  std::vector<double> var_[2];
  double logPrior_[2] = {0.0, 0.0};
};

inline std::unique_ptr<ProbabilisticClassifier> train_baseline(BaselineKind kind, const FeatureMatrix& train,
                                                               const BaselineHyperparams& hp = {}) {
  switch (kind) {
    case BaselineKind::Logistic: return std::make_unique<LogisticRegression>(train, hp);
    case BaselineKind::Knn: return std::make_unique<KNeighbors>(train, hp);
    case BaselineKind::GaussianNB: return std::make_unique<GaussianNaiveBayes>(train, hp);
  }
  throw std::invalid_argument("unknown baseline");
}

}  // namespace evoclass::classifier

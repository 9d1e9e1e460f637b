#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <stdexcept>
#include <vector>

#include <json.hpp>

#include "evoclass/classifier/forest.hpp"
#include "evoclass/classifier/metrics.hpp"

namespace evoclass::classifier {

struct SearchSpace {
  std::vector<int> nEstimators{50, 100, 150, 200};
  std::vector<std::optional<int>> maxDepth{5, 8, 10, 12, 15, std::nullopt};
  std::vector<int> minSamplesSplit{2, 5, 10};
  std::vector<int> minSamplesLeaf{1, 5, 10, 20};
  std::vector<MaxFeatures> maxFeatures{{MaxFeatures::Kind::All, 0}, {MaxFeatures::Kind::Sqrt, 0}};

  void validate() const {
    if (nEstimators.empty() || maxDepth.empty() || minSamplesSplit.empty() || minSamplesLeaf.empty() ||
        maxFeatures.empty()) {
      throw std::invalid_argument("SearchSpace: every dimension needs at least one value");
    }
  }

  static SearchSpace single(const ForestHyperparams& hp) {
    return {{hp.nEstimators}, {hp.maxDepth}, {hp.minSamplesSplit}, {hp.minSamplesLeaf}, {hp.maxFeatures}};
  }
};

inline SearchSpace search_space_from_json(const nlohmann::json& j) {
  SearchSpace s;
  if (j.contains("nEstimators")) s.nEstimators = j["nEstimators"].get<std::vector<int>>();
  if (j.contains("maxDepth")) {
    s.maxDepth.clear();
    for (const auto& v : j["maxDepth"]) s.maxDepth.push_back(v.is_null() ? std::nullopt : std::optional<int>(v.get<int>()));
  }
  if (j.contains("minSamplesSplit")) s.minSamplesSplit = j["minSamplesSplit"].get<std::vector<int>>();
  if (j.contains("minSamplesLeaf")) s.minSamplesLeaf = j["minSamplesLeaf"].get<std::vector<int>>();
  if (j.contains("maxFeatures")) {
    s.maxFeatures.clear();
    for (const auto& v : j["maxFeatures"]) s.maxFeatures.push_back(max_features_from_json(v));
  }
  s.validate();
  return s;
}

struct SearchTrial {
  ForestHyperparams hyperparams;
  double validationAccuracy = 0.0;
};

struct SearchResult {
  ForestHyperparams best;
  double bestAccuracy = 0.0;
  std::vector<SearchTrial> trials;
};

namespace detail {

// Unlimited depth counts as deeper than any finite depth.
inline bool simpler(const ForestHyperparams& a, const ForestHyperparams& b) {
  if (a.nEstimators != b.nEstimators) return a.nEstimators < b.nEstimators;
  const long da = a.maxDepth ? *a.maxDepth : std::numeric_limits<int>::max();
  const long db = b.maxDepth ? *b.maxDepth : std::numeric_limits<int>::max();
  return da < db;
}

}  // namespace detail

// Random search scored by accuracy on an inner 80/20 split of `train`.
inline SearchResult hyperparameter_search(const FeatureMatrix& train, const SearchSpace& space, int trials,
                                          std::uint64_t seed) {
  if (trials < 1) throw std::invalid_argument("hyperparameter_search: trials must be >= 1");
  space.validate();
  auto [inner, validation] = features::split(train, 0.8, derive_seed(seed, 0));
  Rng rng(derive_seed(seed, 1));
  SearchResult result;
  for (int t = 0; t < trials; ++t) {
    ForestHyperparams hp;
    hp.nEstimators = rng.pick(space.nEstimators);
    hp.maxDepth = space.maxDepth[rng.below(space.maxDepth.size())];
    hp.minSamplesSplit = rng.pick(space.minSamplesSplit);
    hp.minSamplesLeaf = rng.pick(space.minSamplesLeaf);
    hp.maxFeatures = space.maxFeatures[rng.below(space.maxFeatures.size())];
    const auto model = train_forest(inner, hp, derive_seed(seed, 2, static_cast<std::uint64_t>(t)));
    std::vector<int> predicted(validation.rows());
    for (std::size_t i = 0; i < validation.rows(); ++i) predicted[i] = model.predict(validation.row(i));
    const double acc = accuracy(confusion(validation.y, predicted)).value_or(0.0);
    result.trials.push_back({hp, acc});
    if (t == 0 || acc > result.bestAccuracy || (acc == result.bestAccuracy && detail::simpler(hp, result.best))) {
      result.best = hp;
      result.bestAccuracy = acc;
    }
  }
  return result;
}

}  // namespace evoclass::classifier

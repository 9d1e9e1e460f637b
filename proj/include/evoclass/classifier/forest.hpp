#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "evoclass/core/random.hpp"
#include "evoclass/features/features.hpp"

namespace evoclass::classifier {

using json = nlohmann::json;
using features::FeatureMatrix;

/// Anything that turns a feature row into a success probability.
class ProbabilisticClassifier {
 public:
  virtual ~ProbabilisticClassifier() = default;
  virtual double predict_proba(std::span<const double> row) const = 0;
  virtual std::string name() const = 0;

  int predict(std::span<const double> row) const { return predict_proba(row) >= 0.5 ? 1 : 0; }

  std::vector<double> predict_proba_all(const FeatureMatrix& m) const {
    std::vector<double> out(m.rows());
    for (std::size_t i = 0; i < m.rows(); ++i) out[i] = predict_proba(m.row(i));
    return out;
  }
};

// Gini impurity of a class-count vector.
inline double gini(std::span<const double> counts) {
  double total = 0.0;
  for (double c : counts) {
    if (c < 0.0) throw std::invalid_argument("gini: negative count");
    total += c;
  }
  if (total <= 0.0) throw std::invalid_argument("gini: zero total");
  double sumSq = 0.0;
  for (double c : counts) sumSq += (c / total) * (c / total);
  return 1.0 - sumSq;
}

inline double gini(double n0, double n1) {
  const double c[2] = {n0, n1};
  return gini(std::span<const double>(c, 2));
}

struct MaxFeatures {
  enum class Kind { All, Sqrt, Count };
  Kind kind = Kind::All;
  int count = 0;

  std::size_t resolve(std::size_t nFeatures) const {
    switch (kind) {
      case Kind::All: return nFeatures;
      case Kind::Sqrt: return std::max<std::size_t>(1, static_cast<std::size_t>(std::sqrt(static_cast<double>(nFeatures))));
      case Kind::Count: return std::clamp<std::size_t>(static_cast<std::size_t>(count), 1, nFeatures);
    }
    return nFeatures;
  }

  friend bool operator==(const MaxFeatures&, const MaxFeatures&) = default;
};

inline json to_json_value(const MaxFeatures& m) {
  switch (m.kind) {
    case MaxFeatures::Kind::All: return "all";
    case MaxFeatures::Kind::Sqrt: return "sqrt";
    case MaxFeatures::Kind::Count: return m.count;
  }
  return "all";
}

inline MaxFeatures max_features_from_json(const json& j) {
  if (j.is_null() || j == "all") return {};
  if (j == "sqrt") return {MaxFeatures::Kind::Sqrt, 0};
  if (j.is_number_integer()) return {MaxFeatures::Kind::Count, j.get<int>()};
  throw std::invalid_argument("maxFeatures must be \"all\", \"sqrt\" or an integer");
}

struct ForestHyperparams {
  int nEstimators = 100;
  std::optional<int> maxDepth = 10;  // nullopt = unlimited
  int minSamplesSplit = 2;
  int minSamplesLeaf = 10;
  MaxFeatures maxFeatures;
  bool bootstrap = true;  // turning it off is a test hook

  void validate() const {
    if (nEstimators < 1) throw std::invalid_argument("nEstimators must be >= 1");
    if (maxDepth && *maxDepth < 1) throw std::invalid_argument("maxDepth must be >= 1 or unlimited");
    if (minSamplesSplit < 2) throw std::invalid_argument("minSamplesSplit must be >= 2");
    if (minSamplesLeaf < 1) throw std::invalid_argument("minSamplesLeaf must be >= 1");
    if (maxFeatures.kind == MaxFeatures::Kind::Count && maxFeatures.count < 1) {
      throw std::invalid_argument("maxFeatures count must be >= 1");
    }
  }

  friend bool operator==(const ForestHyperparams&, const ForestHyperparams&) = default;
};

inline json to_json_value(const ForestHyperparams& h) {
  return json{{"nEstimators", h.nEstimators},
              {"maxDepth", h.maxDepth ? json(*h.maxDepth) : json(nullptr)},
              {"minSamplesSplit", h.minSamplesSplit},
              {"minSamplesLeaf", h.minSamplesLeaf},
              {"maxFeatures", to_json_value(h.maxFeatures)},
              {"bootstrap", h.bootstrap}};
}

inline ForestHyperparams hyperparams_from_json(const json& j) {
  ForestHyperparams h;
  h.nEstimators = j.value("nEstimators", h.nEstimators);
  if (j.contains("maxDepth")) h.maxDepth = j["maxDepth"].is_null() ? std::nullopt : std::optional<int>(j["maxDepth"].get<int>());
  h.minSamplesSplit = j.value("minSamplesSplit", h.minSamplesSplit);
  h.minSamplesLeaf = j.value("minSamplesLeaf", h.minSamplesLeaf);
  if (j.contains("maxFeatures")) h.maxFeatures = max_features_from_json(j["maxFeatures"]);
  h.bootstrap = j.value("bootstrap", h.bootstrap);
  h.validate();
  return h;
}

/// Flat array encoding; node 0 is the root, feature < 0 marks a leaf.
struct DecisionTree {
  std::vector<int> feature;
  std::vector<double> threshold;
  std::vector<int> left;
  std::vector<int> right;
  std::vector<std::array<double, 2>> value;  // weighted class counts (failure, success)

  std::size_t size() const noexcept { return feature.size(); }

  int add_node(double n0, double n1) {
    feature.push_back(-1);
    threshold.push_back(0.0);
    left.push_back(-1);
    right.push_back(-1);
    value.push_back({n0, n1});
    return static_cast<int>(feature.size() - 1);
  }

  std::size_t leaf_of(std::span<const double> row) const {
    std::size_t n = 0;
    while (feature[n] >= 0) {
      n = static_cast<std::size_t>(row[static_cast<std::size_t>(feature[n])] <= threshold[n] ? left[n] : right[n]);
    }
    return n;
  }

  double predict_proba(std::span<const double> row) const {
    const auto& v = value[leaf_of(row)];
    return v[1] / (v[0] + v[1]);
  }

  std::size_t depth() const {
    std::vector<std::size_t> d(size(), 0);
    std::size_t best = 0;
    for (std::size_t n = 0; n < size(); ++n) {
      if (feature[n] >= 0) {
        d[static_cast<std::size_t>(left[n])] = d[n] + 1;
        d[static_cast<std::size_t>(right[n])] = d[n] + 1;
      }
      best = std::max(best, d[n]);
    }
    return best;
  }
};

class ModelFormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class SchemaMismatchError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr int kModelFormatVersion = 1;

class ForestModel final : public ProbabilisticClassifier {
 public:
  ForestHyperparams hyperparams;
  std::uint64_t seed = 0;
  std::size_t nFeatures = 0;
  std::string schemaFingerprint;
  std::vector<DecisionTree> trees;

  std::string name() const override { return "RandomForest"; }

  double predict_proba(std::span<const double> row) const override {
    if (row.size() != nFeatures) {
      throw SchemaMismatchError("row has " + std::to_string(row.size()) + " features, model expects " +
                                std::to_string(nFeatures));
    }
    double sum = 0.0;
    for (const auto& t : trees) sum += t.predict_proba(row);
    return sum / static_cast<double>(trees.size());
  }

  // Same as predict_proba, after checking the row was encoded with the model's schema.
  double predict_proba(const features::FeatureSchema& schema, std::span<const double> row) const {
    check_schema(schema);
    return predict_proba(row);
  }

  void check_schema(const features::FeatureSchema& schema) const {
    if (schema.fingerprint() != schemaFingerprint) {
      throw SchemaMismatchError("feature schema fingerprint " + schema.fingerprint() + " does not match model's " +
                                schemaFingerprint);
    }
  }

  // Mean decrease in impurity, normalized per tree and then overall.
  std::vector<double> feature_importances() const {
    std::vector<double> total(nFeatures, 0.0);
    for (const auto& t : trees) {
      std::vector<double> imp(nFeatures, 0.0);
      const double rootWeight = t.value[0][0] + t.value[0][1];
      for (std::size_t n = 0; n < t.size(); ++n) {
        if (t.feature[n] < 0) continue;
        auto weighted = [&](int node) {
          const auto& v = t.value[static_cast<std::size_t>(node)];
          return (v[0] + v[1]) * gini(v[0], v[1]);
        };
        const double decrease = weighted(static_cast<int>(n)) - weighted(t.left[n]) - weighted(t.right[n]);
        imp[static_cast<std::size_t>(t.feature[n])] += decrease / rootWeight;
      }
      double s = 0.0;
      for (double v : imp) s += v;
      if (s > 0.0) {
        for (std::size_t j = 0; j < nFeatures; ++j) total[j] += imp[j] / s;
      }
    }
    double s = 0.0;
    for (double v : total) s += v;
    if (s > 0.0) {
      for (double& v : total) v /= s;
    }
    return total;
  }

  json to_json() const {
    json jt = json::array();
    for (const auto& t : trees) {
      json values = json::array();
      for (const auto& v : t.value) values.push_back({v[0], v[1]});
      jt.push_back(
          {{"feature", t.feature}, {"threshold", t.threshold}, {"left", t.left}, {"right", t.right}, {"value", values}});
    }
    return json{{"format", "evoclass-forest"},
                {"version", kModelFormatVersion},
                {"seed", seed},
                {"nFeatures", nFeatures},
                {"schemaFingerprint", schemaFingerprint},
                {"hyperparams", to_json_value(hyperparams)},
                {"trees", std::move(jt)}};
  }

  static ForestModel from_json(const json& j) {
    if (!j.is_object() || j.value("format", "") != "evoclass-forest") throw ModelFormatError("not a forest model file");
    const int version = j.value("version", -1);
    if (version != kModelFormatVersion) {
      throw ModelFormatError("unsupported model format version " + std::to_string(version) + " (expected " +
                             std::to_string(kModelFormatVersion) + ")");
    }
    ForestModel m;
    try {
      m.seed = j.at("seed").get<std::uint64_t>();
      m.nFeatures = j.at("nFeatures").get<std::size_t>();
      m.schemaFingerprint = j.at("schemaFingerprint").get<std::string>();
      m.hyperparams = hyperparams_from_json(j.at("hyperparams"));
      for (const auto& jt : j.at("trees")) {
        DecisionTree t;
        t.feature = jt.at("feature").get<std::vector<int>>();
        t.threshold = jt.at("threshold").get<std::vector<double>>();
        t.left = jt.at("left").get<std::vector<int>>();
        t.right = jt.at("right").get<std::vector<int>>();
        for (const auto& v : jt.at("value")) t.value.push_back({v.at(0).get<double>(), v.at(1).get<double>()});
        m.trees.push_back(std::move(t));
      }
    } catch (const json::exception& e) {
      throw ModelFormatError(std::string("corrupt model: ") + e.what());
    }
    m.validate();
    return m;
  }

  void save(const std::filesystem::path& path) const {
    std::ofstream out(path);
    out << to_json().dump() << '\n';
    if (!out) throw std::runtime_error("cannot write model " + path.string());
  }

  static ForestModel load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read model " + path.string());
    json j;
    try {
      j = json::parse(in);
    } catch (const json::exception& e) {
      throw ModelFormatError("corrupt model file " + path.string() + ": " + e.what());
    }
    return from_json(j);
  }

 private:
  void validate() const {
    if (trees.empty()) throw ModelFormatError("model has no trees");
    for (const auto& t : trees) {
      const auto n = t.size();
      if (n == 0 || t.threshold.size() != n || t.left.size() != n || t.right.size() != n || t.value.size() != n) {
        throw ModelFormatError("tree arrays have inconsistent lengths");
      }
      for (std::size_t i = 0; i < n; ++i) {
        if (t.feature[i] >= 0) {
          if (static_cast<std::size_t>(t.feature[i]) >= nFeatures) throw ModelFormatError("feature index out of range");
          // Children always follow their parent, so traversal terminates.
          for (int c : {t.left[i], t.right[i]}) {
            if (c <= static_cast<int>(i) || static_cast<std::size_t>(c) >= n) throw ModelFormatError("bad child index");
          }
        }
        if (!(t.value[i][0] >= 0 && t.value[i][1] >= 0 && t.value[i][0] + t.value[i][1] > 0)) {
          throw ModelFormatError("leaf counts must be non-negative with a positive sum");
        }
      }
    }
  }
};

namespace detail {

// Per-feature sorted distinct values and each row's position among them.
struct BinnedColumns {
  std::vector<std::vector<double>> values;
  std::vector<std::vector<std::uint32_t>> bin;

  explicit BinnedColumns(const FeatureMatrix& m) : values(m.cols), bin(m.cols) {
    for (std::size_t j = 0; j < m.cols; ++j) {
      auto& v = values[j];
      v.reserve(m.rows());
      for (std::size_t i = 0; i < m.rows(); ++i) v.push_back(m.at(i, j));
      std::sort(v.begin(), v.end());
      v.erase(std::unique(v.begin(), v.end()), v.end());
      bin[j].resize(m.rows());
      for (std::size_t i = 0; i < m.rows(); ++i) {
        bin[j][i] = static_cast<std::uint32_t>(std::lower_bound(v.begin(), v.end(), m.at(i, j)) - v.begin());
      }
    }
  }
};

class TreeBuilder {
 public:
  TreeBuilder(const FeatureMatrix& m, const BinnedColumns& cols, const ForestHyperparams& hp, Rng& rng)
      : m_(m), cols_(cols), hp_(hp), rng_(rng) {}

  DecisionTree build(const std::vector<double>& weight) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < m_.rows(); ++i) {
      if (weight[i] > 0) idx.push_back(i);
    }
    weight_ = &weight;
    DecisionTree tree;
    struct Item {
      int node;
      std::size_t begin, end, depth;
    };
    auto counts = [&](std::size_t b, std::size_t e) {
      std::array<double, 2> c{0.0, 0.0};
      for (std::size_t k = b; k < e; ++k) c[static_cast<std::size_t>(m_.y[idx[k]])] += weight[idx[k]];
      return c;
    };
    auto c = counts(0, idx.size());
    tree.add_node(c[0], c[1]);
    std::vector<Item> stack{{0, 0, idx.size(), 0}};
    while (!stack.empty()) {
      const Item it = stack.back();
      stack.pop_back();
      const auto& v = tree.value[static_cast<std::size_t>(it.node)];
      const double total = v[0] + v[1];
      if ((hp_.maxDepth && it.depth >= static_cast<std::size_t>(*hp_.maxDepth)) || total < hp_.minSamplesSplit ||
          v[0] == 0.0 || v[1] == 0.0) {
        continue;
      }
      const auto split = best_split(idx, it.begin, it.end, v);
      if (!split) continue;
      const auto mid = std::partition(idx.begin() + static_cast<std::ptrdiff_t>(it.begin),
                                      idx.begin() + static_cast<std::ptrdiff_t>(it.end),
                                      [&](std::size_t r) { return cols_.bin[split->feature][r] <= split->bin; }) -
                       idx.begin();
      const auto midU = static_cast<std::size_t>(mid);
      const auto lc = counts(it.begin, midU);
      const auto rc = counts(midU, it.end);
      const int l = tree.add_node(lc[0], lc[1]);
      const int r = tree.add_node(rc[0], rc[1]);
      const auto n = static_cast<std::size_t>(it.node);
      tree.feature[n] = static_cast<int>(split->feature);
      tree.threshold[n] = split->threshold;
      tree.left[n] = l;
      tree.right[n] = r;
      stack.push_back({r, midU, it.end, it.depth + 1});
      stack.push_back({l, it.begin, midU, it.depth + 1});
    }
    return tree;
  }

 private:
  struct Split {
    std::size_t feature;
    std::uint32_t bin;
    double threshold;
    double gain;
  };

  std::optional<Split> best_split(const std::vector<std::size_t>& idx, std::size_t begin, std::size_t end,
                                  const std::array<double, 2>& parent) {
    const std::size_t nf = m_.cols;
    std::vector<std::size_t> candidates(nf);
    for (std::size_t j = 0; j < nf; ++j) candidates[j] = j;
    const std::size_t k = hp_.maxFeatures.resolve(nf);
    if (k < nf) {
      // Partial Fisher-Yates: the first k entries are a uniform sample.
      for (std::size_t i = 0; i < k; ++i) std::swap(candidates[i], candidates[i + rng_.below(nf - i)]);
      candidates.resize(k);
      std::sort(candidates.begin(), candidates.end());
    }
    const double total = parent[0] + parent[1];
    const double parentImpurity = gini(parent[0], parent[1]);
    const double minLeaf = hp_.minSamplesLeaf;
    std::optional<Split> best;
    for (auto f : candidates) {
      const auto& vals = cols_.values[f];
      if (vals.size() < 2) continue;
      hist_.assign(vals.size(), {0.0, 0.0});
      const auto& bins = cols_.bin[f];
      for (std::size_t q = begin; q < end; ++q) {
        const auto r = idx[q];
        hist_[bins[r]][static_cast<std::size_t>(m_.y[r])] += (*weight_)[r];
      }
      double l0 = 0.0, l1 = 0.0;
      std::optional<std::uint32_t> prev;
      for (std::uint32_t b = 0; b < vals.size(); ++b) {
        const auto& h = hist_[b];
        if (h[0] + h[1] == 0.0) continue;
        if (prev) {
          const double wl = l0 + l1;
          const double wr = total - wl;
          if (wl >= minLeaf && wr >= minLeaf) {
            const double child = (wl * gini(l0, l1) + wr * gini(parent[0] - l0, parent[1] - l1)) / total;
            const double gain = parentImpurity - child;
            if (gain > 1e-12 && (!best || gain > best->gain + 1e-12)) {
              best = Split{f, *prev, (vals[*prev] + vals[b]) / 2.0, gain};
            }
          }
        }
        l0 += h[0];
        l1 += h[1];
        prev = b;
      }
    }
    return best;
  }

  const FeatureMatrix& m_;
  const BinnedColumns& cols_;
  const ForestHyperparams& hp_;
  Rng& rng_;
  const std::vector<double>* weight_ = nullptr;
  std::vector<std::array<double, 2>> hist_;
};

inline void require_both_classes(const FeatureMatrix& m, const char* who) {
  if (m.rows() == 0) throw std::invalid_argument(std::string(who) + ": empty training set");
  bool has0 = false, has1 = false;
  for (int v : m.y) (v == 1 ? has1 : has0) = true;
  if (!has0 || !has1) throw std::invalid_argument(std::string(who) + ": training set has a single class");
}

}  // namespace detail

inline ForestModel train_forest(const FeatureMatrix& train, const ForestHyperparams& hp, std::uint64_t seed,
                                std::string schemaFingerprint = {}) {
  hp.validate();
  detail::require_both_classes(train, "train_forest");
  const detail::BinnedColumns cols(train);
  ForestModel model;
  model.hyperparams = hp;
  model.seed = seed;
  model.nFeatures = train.cols;
  model.schemaFingerprint = std::move(schemaFingerprint);
  const std::size_t n = train.rows();
  for (int t = 0; t < hp.nEstimators; ++t) {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(t)));
    std::vector<double> weight(n, hp.bootstrap ? 0.0 : 1.0);
    if (hp.bootstrap) {
      for (std::size_t i = 0; i < n; ++i) weight[rng.below(n)] += 1.0;
    }
    detail::TreeBuilder builder(train, cols, hp, rng);
    model.trees.push_back(builder.build(weight));
  }
  return model;
}

}  // namespace evoclass::classifier

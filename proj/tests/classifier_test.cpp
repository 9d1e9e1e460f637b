#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>

#include "evoclass/classifier/baselines.hpp"
#include "evoclass/classifier/metrics.hpp"
#include "evoclass/classifier/search.hpp"
#include "evoclass/core/random.hpp"

using namespace evoclass;
using namespace evoclass::classifier;
using features::FeatureMatrix;

namespace {

// Two informative features (x0 > 0.5 and x1 > 0.5 both required) plus one noise column.
FeatureMatrix and_dataset(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  FeatureMatrix m;
  m.cols = 3;
  for (std::size_t i = 0; i < n; ++i) {
    const double r[] = {rng.uniform(), rng.uniform(), rng.uniform()};
    m.push_row(r, r[0] > 0.5 && r[1] > 0.5 ? 1 : 0);
  }
  return m;
}

FeatureMatrix blobs(std::size_t nPerClass, double separation, std::uint64_t seed) {
  Rng rng(seed);
  FeatureMatrix m;
  m.cols = 2;
  for (std::size_t i = 0; i < nPerClass; ++i) {
    for (int c = 0; c < 2; ++c) {
      const double r[] = {rng.normal() + c * separation, rng.normal() - c * separation};
      m.push_row(r, c);
    }
  }
  return m;
}

double accuracy_on(const ProbabilisticClassifier& model, const FeatureMatrix& m) {
  std::size_t correct = 0;
  for (std::size_t i = 0; i < m.rows(); ++i) correct += model.predict(m.row(i)) == m.y[i];
  return static_cast<double>(correct) / static_cast<double>(m.rows());
}

ForestHyperparams memorizing() {
  ForestHyperparams hp;
  hp.nEstimators = 5;
  hp.maxDepth = std::nullopt;
  hp.minSamplesLeaf = 1;
  hp.minSamplesSplit = 2;
  hp.bootstrap = false;
  return hp;
}

std::filesystem::path temp_file(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / "evoclass_classifier_test";
  std::filesystem::create_directories(dir);
  return dir / name;
}

}  // namespace

TEST(Gini, KnownValues) {
  EXPECT_DOUBLE_EQ(gini(2, 2), 0.5);
  EXPECT_DOUBLE_EQ(gini(4, 0), 0.0);
  EXPECT_DOUBLE_EQ(gini(3, 1), 0.375);
  EXPECT_THROW(gini(0, 0), std::invalid_argument);
  EXPECT_THROW(gini(-1, 2), std::invalid_argument);
}

TEST(Forest, MemorizesTrainingDataWithoutBootstrap) {
  const auto train = and_dataset(300, 1);
  const auto model = train_forest(train, memorizing(), 3);
  EXPECT_DOUBLE_EQ(accuracy_on(model, train), 1.0);
}

TEST(Forest, SameSeedSameModel) {
  const auto train = and_dataset(500, 2);
  ForestHyperparams hp;
  hp.nEstimators = 20;
  const auto a = train_forest(train, hp, 11);
  const auto b = train_forest(train, hp, 11);
  EXPECT_EQ(a.to_json().dump(), b.to_json().dump());
  const auto c = train_forest(train, hp, 12);
  EXPECT_NE(a.to_json().dump(), c.to_json().dump());
}

TEST(Forest, ProbabilityIsTheMeanOfTreeVotes) {
  // 87 trees vote success with certainty, 13 vote failure.
  ForestModel model;
  model.nFeatures = 1;
  for (int t = 0; t < 100; ++t) {
    DecisionTree tree;
    if (t < 87) {
      tree.add_node(0, 5);
    } else {
      tree.add_node(5, 0);
    }
    model.trees.push_back(tree);
  }
  const double row[] = {0.0};
  EXPECT_DOUBLE_EQ(model.predict_proba(row), 0.87);
  EXPECT_EQ(model.predict(row), 1);
  const double wide[] = {0.0, 1.0};
  EXPECT_THROW(model.predict_proba(wide), SchemaMismatchError);
}

TEST(Forest, GeneralizesOnHeldOutData) {
  const auto train = and_dataset(2000, 3);
  const auto test = and_dataset(500, 4);
  const auto model = train_forest(train, ForestHyperparams{}, 5);
  EXPECT_GT(accuracy_on(model, test), 0.97);
  const auto ev = evaluate_scores(model.predict_proba_all(test), test.y);
  EXPECT_GT(*ev.recall, 0.95);
}

TEST(Forest, RejectsSingleClassTraining) {
  FeatureMatrix m;
  m.cols = 1;
  for (int i = 0; i < 10; ++i) {
    const double r[] = {static_cast<double>(i)};
    m.push_row(r, 1);
  }
  EXPECT_THROW(train_forest(m, ForestHyperparams{}, 1), std::invalid_argument);
}

TEST(Importances, SumToOneAndIgnoreUnusedFeatures) {
  FeatureMatrix m;
  m.cols = 3;
  Rng rng(9);
  for (int i = 0; i < 400; ++i) {
    const double r[] = {rng.uniform(), 7.0, rng.uniform()};
    m.push_row(r, r[0] > 0.3 ? 1 : 0);
  }
  ForestHyperparams hp;
  hp.nEstimators = 10;
  const auto model = train_forest(m, hp, 1);
  const auto imp = model.feature_importances();
  double sum = 0;
  for (double v : imp) sum += v;
  EXPECT_NEAR(sum, 1.0, 1e-12);
  EXPECT_EQ(imp[1], 0.0);  // constant column can never split
  EXPECT_GT(imp[0], 0.9);
}

TEST(Importances, MatchHandComputedImpurityDecrease) {
  // Root: 4 failures, 4 successes on x0. Left child (x0 <= t) is pure failure;
  // the right child (0 failures, 4 successes) is pure too. Only feature 0 is used.
  ForestModel model;
  model.nFeatures = 2;
  DecisionTree tree;
  tree.add_node(4, 4);
  tree.add_node(4, 0);
  tree.add_node(0, 4);
  tree.feature[0] = 0;
  tree.threshold[0] = 0.5;
  tree.left[0] = 1;
  tree.right[0] = 2;
  // A second tree that splits on feature 1 with a partial decrease.
  DecisionTree second;
  second.add_node(4, 4);
  second.add_node(3, 1);
  second.add_node(1, 3);
  second.feature[0] = 1;
  second.threshold[0] = 0.5;
  second.left[0] = 1;
  second.right[0] = 2;
  model.trees = {tree, second};
  const auto imp = model.feature_importances();
  // Each tree is normalized to 1 on its only feature, then averaged.
  EXPECT_DOUBLE_EQ(imp[0], 0.5);
  EXPECT_DOUBLE_EQ(imp[1], 0.5);

  // Brute force the raw decrease of the second tree: 8*0.5 - 4*0.375 - 4*0.375 = 1.0
  const double raw = 8 * gini(4, 4) - 4 * gini(3, 1) - 4 * gini(1, 3);
  EXPECT_DOUBLE_EQ(raw, 1.0);
}

TEST(Baselines, SeparateEasyData) {
  const auto train = blobs(200, 3.0, 1);
  const auto test = blobs(100, 3.0, 2);
  for (auto kind : {BaselineKind::Logistic, BaselineKind::Knn, BaselineKind::GaussianNB}) {
    const auto model = train_baseline(kind, train);
    EXPECT_GT(accuracy_on(*model, test), 0.95) << model->name();
    for (double p : model->predict_proba_all(test)) {
      EXPECT_GE(p, 0.0);
      EXPECT_LE(p, 1.0);
    }
  }
}

TEST(Baselines, OneNeighborRecallsTrainingLabels) {
  const auto train = blobs(50, 0.5, 3);
  BaselineHyperparams hp;
  hp.k = 1;
  const auto knn = train_baseline(BaselineKind::Knn, train, hp);
  EXPECT_DOUBLE_EQ(accuracy_on(*knn, train), 1.0);
}

TEST(Metrics, ReferenceCountsReproduce) {
  // 47,471 generated; 32,664 executed, 4,137 of them failed; 14,807 withheld; no false negatives.
  ConfusionCounts c{32664 - 4137, 4137, 14807, 0};
  const auto e = evaluate_counts(c);
  EXPECT_NEAR(*e.accuracy * 100, 91.28, 0.01);
  EXPECT_NEAR(*e.precision * 100, 87.33, 0.01);
  EXPECT_NEAR(*e.recall * 100, 100.0, 1e-9);
  EXPECT_NEAR(*e.f1 * 100, 93.23, 0.01);
}

TEST(Metrics, UndefinedRatiosAreMarked) {
  const auto e = evaluate_counts(ConfusionCounts{0, 0, 5, 0});
  EXPECT_FALSE(e.precision.has_value());
  EXPECT_FALSE(e.recall.has_value());
  EXPECT_FALSE(e.f1.has_value());
  EXPECT_DOUBLE_EQ(*e.accuracy, 1.0);
  EXPECT_EQ(format_metric(e.precision), "undefined");
  EXPECT_FALSE(accuracy(ConfusionCounts{}).has_value());
}

TEST(Metrics, AucEdgeCases) {
  const std::vector<int> y = {0, 0, 1, 1};
  const std::vector<double> perfect = {0.1, 0.2, 0.8, 0.9};
  const std::vector<double> flat = {0.5, 0.5, 0.5, 0.5};
  EXPECT_DOUBLE_EQ(*auc(perfect, y), 1.0);
  EXPECT_DOUBLE_EQ(*auc(flat, y), 0.5);
  std::vector<double> inverted(perfect.size());
  std::transform(perfect.begin(), perfect.end(), inverted.begin(), [](double s) { return 1 - s; });
  EXPECT_DOUBLE_EQ(*auc(inverted, y), 0.0);
  const std::vector<int> single = {1, 1, 1, 1};
  EXPECT_FALSE(auc(perfect, single).has_value());
}

TEST(Metrics, AucComplementAndOrderInvariance) {
  Rng rng(21);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> s(30);
    std::vector<int> y(30);
    for (std::size_t i = 0; i < s.size(); ++i) {
      s[i] = static_cast<double>(rng.below(6));  // many ties
      y[i] = static_cast<int>(i % 3 == 0);
    }
    std::vector<double> neg(s.size());
    std::transform(s.begin(), s.end(), neg.begin(), [](double v) { return -v; });
    EXPECT_NEAR(*auc(s, y) + *auc(neg, y), 1.0, 1e-12);

    std::vector<std::size_t> order(s.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    rng.shuffle(order);
    std::vector<double> s2;
    std::vector<int> y2;
    for (auto i : order) {
      s2.push_back(s[i]);
      y2.push_back(y[i]);
    }
    EXPECT_NEAR(*auc(s, y), *auc(s2, y2), 1e-12);
  }
}

TEST(Metrics, RocCurveIsMonotone) {
  const std::vector<int> y = {0, 1, 0, 1, 1, 0};
  const std::vector<double> s = {0.1, 0.9, 0.4, 0.4, 0.7, 0.2};
  const auto roc = roc_curve(s, y);
  ASSERT_GE(roc.points.size(), 2u);
  EXPECT_EQ(roc.points.front().fpr, 0.0);
  EXPECT_EQ(roc.points.back().tpr, 1.0);
  for (std::size_t i = 1; i < roc.points.size(); ++i) {
    EXPECT_GE(roc.points[i].fpr, roc.points[i - 1].fpr);
    EXPECT_GE(roc.points[i].tpr, roc.points[i - 1].tpr);
  }
}

TEST(Search, SinglePointSpaceReturnsThatPoint) {
  ForestHyperparams hp;
  hp.nEstimators = 7;
  hp.maxDepth = 4;
  const auto r = hyperparameter_search(and_dataset(300, 5), SearchSpace::single(hp), 3, 1);
  EXPECT_EQ(r.best.nEstimators, 7);
  EXPECT_EQ(r.best.maxDepth, 4);
  EXPECT_EQ(r.trials.size(), 3u);
}

TEST(Search, IsDeterministic) {
  SearchSpace space;
  space.nEstimators = {5, 10};
  const auto data = and_dataset(300, 6);
  const auto a = hyperparameter_search(data, space, 6, 4);
  const auto b = hyperparameter_search(data, space, 6, 4);
  EXPECT_EQ(to_json_value(a.best), to_json_value(b.best));
  EXPECT_EQ(a.bestAccuracy, b.bestAccuracy);
  EXPECT_THROW(hyperparameter_search(data, space, 0, 4), std::invalid_argument);
}

TEST(Persistence, SaveLoadRoundTrip) {
  const auto train = and_dataset(300, 7);
  ForestHyperparams hp;
  hp.nEstimators = 8;
  const auto model = train_forest(train, hp, 3, "abc123");
  const auto path = temp_file("model.json");
  model.save(path);
  const auto back = ForestModel::load(path);
  EXPECT_EQ(back.schemaFingerprint, "abc123");
  EXPECT_EQ(back.predict_proba_all(train), model.predict_proba_all(train));
}

TEST(Persistence, CorruptFilesAreRejected) {
  const auto train = and_dataset(200, 8);
  ForestHyperparams hp;
  hp.nEstimators = 3;
  const auto model = train_forest(train, hp, 1);
  const auto text = model.to_json().dump();

  const auto truncated = temp_file("truncated.json");
  std::ofstream(truncated) << text.substr(0, text.size() / 2);
  EXPECT_THROW(ForestModel::load(truncated), ModelFormatError);

  auto j = model.to_json();
  j["version"] = 99;
  EXPECT_THROW(ForestModel::from_json(j), ModelFormatError);

  j = model.to_json();
  j["trees"][0]["left"][0] = 0;  // a cycle back to the root
  ASSERT_GE(j["trees"][0]["feature"][0].get<int>(), 0);
  EXPECT_THROW(ForestModel::from_json(j), ModelFormatError);

  EXPECT_THROW(ForestModel::load(temp_file("missing.json")), std::runtime_error);
}

TEST(Persistence, SchemaFingerprintIsChecked) {
  features::FeatureSchema schema;
  schema.features = {{"is_no_auth", features::Encoder::Binary, {}}};
  ForestModel model;
  model.schemaFingerprint = schema.fingerprint();
  EXPECT_NO_THROW(model.check_schema(schema));
  schema.features.push_back({"cancerMessagesNr", features::Encoder::Count, {}});
  EXPECT_THROW(model.check_schema(schema), SchemaMismatchError);
}

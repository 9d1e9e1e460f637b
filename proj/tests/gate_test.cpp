#include <gtest/gtest.h>

#include "evoclass/gate/gate.hpp"
#include "evoclass/rules/catalog.hpp"

using namespace evoclass;
using namespace evoclass::gate;

namespace {

features::FeatureSchema auth_schema() {
  features::FeatureSchema s;
  s.features = {{"is_no_auth", features::Encoder::Binary, {}}};
  return s;
}

// One stump per model: a constant leaf, or a split on is_no_auth.
classifier::ForestModel constant_model(double success) {
  classifier::ForestModel m;
  m.nFeatures = 1;
  m.schemaFingerprint = auth_schema().fingerprint();
  classifier::DecisionTree t;
  t.add_node(1.0 - success, success);
  m.trees.push_back(t);
  return m;
}

classifier::ForestModel auth_model() {
  auto m = constant_model(0.5);
  auto& t = m.trees[0];
  t.add_node(0, 10);  // authenticated
  t.add_node(10, 0);  // no auth
  t.feature[0] = 0;
  t.threshold[0] = 0.5;
  t.left[0] = 1;
  t.right[0] = 2;
  return m;
}

struct Registry {
  std::shared_ptr<const rules::RuleSet> rs =
      std::make_shared<const rules::RuleSet>(rules::generate_catalog(7).at("v1", rules::Environment::Dev));
  registry::RegistryService service{rs, registry::ServiceConfig{"v1", rules::Environment::Dev, "evoclass-dev-token"}};
  registry::InProcessTransport transport{service};
};

generator::RequestGenerator make_generator(double noAuth, std::size_t budget, std::uint64_t seed = 5) {
  generator::GeneratorConfig c;
  c.seed = seed;
  c.budget = budget;
  c.mix.noAuth = noAuth;
  return {generator::default_schema(), c};
}

}  // namespace

TEST(CostReduction, ReferenceExamples) {
  EXPECT_NEAR(cost_reduction(47471, 32664), 31.19, 0.005);
  EXPECT_NEAR(cost_reduction(54149, 37302), 31.11, 0.005);
  EXPECT_DOUBLE_EQ(cost_reduction(10, 10), 0.0);
  EXPECT_THROW(cost_reduction(0, 0), ZeroTotalError);
}

TEST(Gate, AlwaysSuccessExecutesEverything) {
  Registry reg;
  const auto model = constant_model(1.0);
  const auto schema = auth_schema();
  const auto r = run_filtered_campaign(make_generator(0.2, 100), Gate(&model, &schema), reg.transport, {});
  EXPECT_EQ(r.stats.predictedSuccess, 100u);
  EXPECT_EQ(r.stats.predictedFailure, 0u);
  EXPECT_EQ(reg.transport.calls(), 100u);
  EXPECT_DOUBLE_EQ(cost_reduction(r.stats), 0.0);
  EXPECT_EQ(r.stats.executedButFailed, r.stats.statusTallies.at(302));
}

TEST(Gate, AlwaysFailureExecutesNothing) {
  Registry reg;
  const auto model = constant_model(0.0);
  const auto schema = auth_schema();
  const auto r = run_filtered_campaign(make_generator(0.2, 100), Gate(&model, &schema), reg.transport, {});
  EXPECT_EQ(r.stats.predictedFailure, 100u);
  EXPECT_EQ(reg.transport.calls(), 0u);
  EXPECT_DOUBLE_EQ(cost_reduction(r.stats), 100.0);
  EXPECT_EQ(reg.service.snapshot_counters().totalHits, 0u);
}

TEST(Gate, FilteredRequestsNeverReachTheTransport) {
  Registry reg, shadow;
  const auto model = auth_model();
  const auto schema = auth_schema();
  const auto r = run_filtered_campaign(make_generator(0.3, 400), Gate(&model, &schema), reg.transport, {},
                                       &shadow.transport);
  EXPECT_EQ(reg.transport.calls(), r.stats.predictedSuccess);
  EXPECT_EQ(shadow.transport.calls(), r.stats.predictedFailure);
  EXPECT_EQ(r.stats.totalGenerated, 400u);
  EXPECT_GT(r.stats.predictedFailure, 80u);
  // The auth stump is a perfect predictor on an otherwise valid stream.
  EXPECT_EQ(r.stats.executedButFailed, 0u);
  EXPECT_EQ(*r.stats.filteredButSuccessful, 0u);
  for (const auto& f : r.filtered) EXPECT_EQ(f.shadowStatus, 302);
  const auto c = r.stats.confusion();
  EXPECT_EQ(c.fp, 0u);
  EXPECT_EQ(c.fn, 0u);
}

TEST(Gate, NullModelIsTheUnfilteredBaseline) {
  Registry reg;
  const Gate open(nullptr, nullptr);
  EXPECT_FALSE(open.enabled());
  const auto r = run_filtered_campaign(make_generator(0.1, 50), open, reg.transport, {});
  EXPECT_EQ(r.stats.predictedSuccess, 50u);
  EXPECT_FALSE(r.stats.filteredButSuccessful.has_value());
}

TEST(Gate, RejectsAMismatchedSchema) {
  const auto model = constant_model(1.0);
  auto schema = auth_schema();
  schema.features.push_back({"cancerMessagesNr", features::Encoder::Count, {}});
  EXPECT_THROW(Gate(&model, &schema), classifier::SchemaMismatchError);
  EXPECT_THROW(Gate(&model, nullptr), std::invalid_argument);
}

TEST(Gate, CampaignsAreDeterministic) {
  const auto model = auth_model();
  const auto schema = auth_schema();
  Registry a, b;
  const auto ra = run_filtered_campaign(make_generator(0.25, 300, 77), Gate(&model, &schema), a.transport, {});
  const auto rb = run_filtered_campaign(make_generator(0.25, 300, 77), Gate(&model, &schema), b.transport, {});
  EXPECT_EQ(ra.stats, rb.stats);
  ASSERT_EQ(ra.executed.size(), rb.executed.size());
  for (std::size_t i = 0; i < ra.executed.size(); ++i) {
    EXPECT_EQ(nlohmann::json(ra.executed[i]), nlohmann::json(rb.executed[i]));
  }
  EXPECT_EQ(a.service.snapshot_counters().totalHits, b.service.snapshot_counters().totalHits);
}

TEST(Gate, CsvRowFollowsTheTableLayout) {
  FilterStats s;
  s.totalGenerated = 47471;
  s.predictedSuccess = 32664;
  s.predictedFailure = 14807;
  s.executedButFailed = 4137;
  EXPECT_EQ(filter_stats_csv_row("dev", "v1", s), "dev,v1,47471,32664,14807,4137,91.29,87.33,100.00,93.24,31.19");
  s.predictedFailure = 1;
  EXPECT_THROW(s.check(), std::logic_error);
}

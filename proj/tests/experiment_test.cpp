#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "evoclass/experiment/experiment.hpp"

using namespace evoclass;
using namespace evoclass::experiment;
namespace fs = std::filesystem;

namespace {

RunResult row(Approach a, int rep, std::uint64_t executed, std::uint64_t applied, std::uint64_t notApplied) {
  RunResult r;
  r.approach = a;
  r.version = "v5";
  r.environment = rules::Environment::Test;
  r.repetition = rep;
  r.seed = 100 + static_cast<std::uint64_t>(rep);
  r.stats.totalGenerated = 1000;
  r.stats.predictedSuccess = executed;
  r.stats.predictedFailure = 1000 - executed;
  r.stats.executedButFailed = a == Approach::Filtered ? 60 : 400;
  if (a == Approach::Filtered) r.stats.filteredButSuccessful = 0;
  r.counters = {applied + notApplied, applied, notApplied};
  return r;
}

features::FeatureSchema auth_schema() {
  features::FeatureSchema s;
  s.features = {{"is_no_auth", features::Encoder::Binary, {}}};
  return s;
}

classifier::ForestModel auth_model() {
  classifier::ForestModel m;
  m.nFeatures = 1;
  m.schemaFingerprint = auth_schema().fingerprint();
  classifier::DecisionTree t;
  t.add_node(5, 5);
  t.add_node(0, 10);
  t.add_node(10, 0);
  t.feature[0] = 0;
  t.threshold[0] = 0.5;
  t.left[0] = 1;
  t.right[0] = 2;
  m.trees.push_back(t);
  return m;
}

ExperimentConfig small_config() {
  ExperimentConfig c;
  c.versions = {"v1", "v2"};
  c.environments = {rules::Environment::Dev, rules::Environment::Prod};
  c.repetitions = 2;
  c.budget = 60;
  c.masterSeed = 99;
  c.generator.mix.noAuth = 0.2;
  c.generator.mix.formatInvalidDate = 0.1;
  return c;
}

std::string csv_of(const ResultStore& s) {
  std::ostringstream out;
  s.write_csv(out);
  return out.str();
}

}  // namespace

TEST(Stats, SeparatedSamples) {
  const std::vector<double> xs = {1, 2, 3}, ys = {4, 5, 6};
  const auto r = mann_whitney(xs, ys);
  EXPECT_DOUBLE_EQ(r.u, 0.0);
  EXPECT_TRUE(r.exact);
  EXPECT_NEAR(r.pValue, 0.1, 1e-12);
  EXPECT_DOUBLE_EQ(vargha_delaney_a12(xs, ys), 0.0);
  EXPECT_DOUBLE_EQ(vargha_delaney_a12(ys, xs), 1.0);
}

TEST(Stats, IdenticalSamplesAreIndistinguishable) {
  const std::vector<double> xs(10, 14.2);
  const auto r = mann_whitney(xs, xs);
  EXPECT_DOUBLE_EQ(r.pValue, 1.0);
  EXPECT_DOUBLE_EQ(vargha_delaney_a12(xs, xs), 0.5);

  const std::vector<double> a = {1, 2, 3, 4, 5, 6, 7, 8, 9, 10}, b = a;
  EXPECT_DOUBLE_EQ(mann_whitney(a, b).pValue, 1.0);
}

TEST(Stats, NormalApproximationForLargerSamples) {
  std::vector<double> xs, ys;
  for (int i = 0; i < 20; ++i) {
    xs.push_back(i);
    ys.push_back(i + 30);
  }
  const auto r = mann_whitney(xs, ys);
  EXPECT_FALSE(r.exact);
  EXPECT_LT(r.pValue, 1e-6);
  EXPECT_DOUBLE_EQ(r.u, 0.0);
}

TEST(Stats, A12WithTies) {
  const std::vector<double> xs = {1, 2, 2}, ys = {2, 3};
  // pairs: (1,2)=0 (1,3)=0 (2,2)=.5 (2,3)=0 (2,2)=.5 (2,3)=0
  EXPECT_DOUBLE_EQ(vargha_delaney_a12(xs, ys), 1.0 / 6.0);
  EXPECT_THROW(vargha_delaney_a12({}, ys), std::invalid_argument);
}

TEST(Stats, Pearson) {
  const std::vector<double> x = {1, 2, 3, 4}, up = {2, 4, 6, 8}, down = {8, 6, 4, 2}, flat = {1, 1, 1, 1};
  EXPECT_DOUBLE_EQ(pearson(x, up), 1.0);
  EXPECT_DOUBLE_EQ(pearson(x, down), -1.0);
  EXPECT_NEAR(pearson(x, std::vector<double>{1, 3, 2, 4}), 0.8, 1e-12);
  EXPECT_THROW(pearson(x, flat), std::invalid_argument);
}

TEST(Stats, Coverage) {
  const auto c = coverage(77259, 456739);
  EXPECT_NEAR(c.coverageApplied, 14.47, 0.005);
  EXPECT_NEAR(c.coverageApplied + c.coverageNotApplied, 100.0, 1e-9);
  EXPECT_DOUBLE_EQ(coverage(0, 5).coverageApplied, 0.0);
  EXPECT_THROW(coverage(0, 0), std::invalid_argument);
}

TEST(Cells, SumRunsAndPoolCoverage) {
  ResultStore store;
  store.rows = {row(Approach::Filtered, 0, 700, 100, 400), row(Approach::Unfiltered, 0, 1000, 140, 560),
                row(Approach::Filtered, 1, 680, 120, 380), row(Approach::Unfiltered, 1, 1000, 150, 550)};
  const auto cells = cell_totals(store);
  ASSERT_EQ(cells.size(), 1u);
  const auto& cell = cells.begin()->second;
  const auto& f = cell.at(Approach::Filtered);
  const auto& u = cell.at(Approach::Unfiltered);
  EXPECT_EQ(f.stats.totalGenerated, 2000u);
  EXPECT_EQ(f.stats.predictedSuccess, 1380u);
  EXPECT_EQ(f.stats.executedButFailed, 120u);
  EXPECT_EQ(*f.stats.filteredButSuccessful, 0u);
  EXPECT_EQ(f.counters.applied, 220u);
  EXPECT_EQ(u.counters.totalHits, 1400u);
  EXPECT_EQ(f.coverageApplied, (std::vector<double>{20.0, 24.0}));
  EXPECT_EQ(u.coverageApplied, (std::vector<double>{20.0, 150.0 / 700.0 * 100.0}));

  const auto st = cell_statistics(store);
  ASSERT_EQ(st.size(), 1u);
  EXPECT_EQ(st[0].version, "v5");
  EXPECT_DOUBLE_EQ(st[0].a12, (0.5 + 0 + 1 + 1) / 4.0);
  EXPECT_DOUBLE_EQ(st[0].meanFiltered, 22.0);
}

TEST(Cells, FailedRunsAreExcluded) {
  ResultStore store;
  store.rows = {row(Approach::Filtered, 0, 700, 100, 400), row(Approach::Unfiltered, 0, 1000, 140, 560)};
  store.rows[0].error = "boom";
  const auto cells = cell_totals(store);
  EXPECT_FALSE(cells.begin()->second.count(Approach::Filtered));
  EXPECT_TRUE(cell_statistics(store).empty());
}

TEST(Store, CsvRoundTrip) {
  ResultStore store;
  store.rows = {row(Approach::Filtered, 0, 700, 100, 400), row(Approach::Unfiltered, 0, 1000, 140, 560)};
  store.rows[1].error = "transport down";
  const auto path = fs::temp_directory_path() / "evoclass_experiment_test" / "results.csv";
  store.save(path);
  const auto back = ResultStore::load(path);
  EXPECT_EQ(csv_of(back), csv_of(store));
}

TEST(Experiment, SameSeedSameResults) {
  const auto catalog = rules::generate_catalog(3);
  const auto model = auth_model();
  const auto schema = auth_schema();
  const auto cfg = small_config();
  const auto a = run_experiment(cfg, catalog, {&model, &schema});
  const auto b = run_experiment(cfg, catalog, {&model, &schema});
  EXPECT_EQ(a.rows.size(), 16u);
  EXPECT_EQ(csv_of(a), csv_of(b));
  for (const auto& r : a.rows) EXPECT_TRUE(r.ok()) << r.error;
}

TEST(Experiment, ApproachesShareTheRequestStream) {
  const auto catalog = rules::generate_catalog(3);
  const auto model = auth_model();
  const auto schema = auth_schema();
  const auto store = run_experiment(small_config(), catalog, {&model, &schema});
  for (std::size_t i = 0; i + 1 < store.rows.size(); i += 2) {
    const auto& f = store.rows[i];
    const auto& u = store.rows[i + 1];
    ASSERT_EQ(f.approach, Approach::Filtered);
    ASSERT_EQ(u.approach, Approach::Unfiltered);
    EXPECT_EQ(f.seed, u.seed);
    // The auth stump withholds exactly the 302s, which never reach the rule engine.
    EXPECT_EQ(f.counters.totalHits, u.counters.totalHits);
    EXPECT_EQ(f.stats.predictedFailure, u.stats.statusTallies.at(302));
  }
}

TEST(Experiment, FilteredRunWithoutModelIsRecordedAsError) {
  const auto catalog = rules::generate_catalog(3);
  const auto r = run_single(catalog, small_config(), {}, Approach::Filtered, rules::Environment::Dev, "v1", 0);
  EXPECT_FALSE(r.ok());
}

TEST(Reports, RenderAllFiles) {
  ResultStore store;
  store.rows = {row(Approach::Filtered, 0, 700, 100, 400), row(Approach::Unfiltered, 0, 1000, 140, 560),
                row(Approach::Filtered, 1, 680, 120, 380), row(Approach::Unfiltered, 1, 1000, 150, 550)};
  const auto dir = fs::temp_directory_path() / "evoclass_experiment_test" / "reports";
  fs::remove_all(dir);
  std::ostringstream warnings;
  const auto paths = render_reports(store, dir, warnings);
  for (const auto& p : {paths.costReduction, paths.ruleHits, paths.statistics, paths.correlation}) {
    EXPECT_TRUE(fs::exists(p)) << p;
  }
  std::ifstream rh(paths.ruleHits);
  std::string header, line;
  std::getline(rh, header);
  std::getline(rh, line);
  EXPECT_EQ(line, "test,v5,1380,2000,1000,1400,220,290,780,1110,22.00,20.71,78.00,79.29");
  std::ifstream cr(paths.costReduction);
  std::getline(cr, header);
  std::getline(cr, line);
  EXPECT_EQ(line.substr(0, 30), "test,v5,2000,1380,620,120,94.0");
  EXPECT_TRUE(warnings.str().empty());
  EXPECT_THROW(render_reports(ResultStore{}, dir, warnings), std::invalid_argument);
}

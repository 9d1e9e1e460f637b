#pragma once

#include <filesystem>
#include <fstream>
#include <memory>
#include <ostream>
#include <string>
#include <vector>

#include "evoclass/app/config.hpp"
#include "evoclass/classifier/baselines.hpp"
#include "evoclass/classifier/search.hpp"
#include "evoclass/experiment/experiment.hpp"
#include "evoclass/features/features.hpp"
#include "evoclass/gate/gate.hpp"
#include "evoclass/rules/catalog.hpp"

namespace evoclass::app {

/// A registry instance for one (version, environment) cell.
struct LocalRegistry {
  std::shared_ptr<const rules::RuleSet> ruleset;
  std::unique_ptr<registry::RegistryService> service;
  std::unique_ptr<registry::InProcessTransport> transport;

  LocalRegistry(const rules::Catalog& catalog, const std::string& version, rules::Environment env,
                const std::string& authToken)
      : ruleset(std::make_shared<const rules::RuleSet>(catalog.at(version, env))),
        service(std::make_unique<registry::RegistryService>(ruleset,
                                                            registry::ServiceConfig{version, env, authToken})),
        transport(std::make_unique<registry::InProcessTransport>(*service)) {}
};

inline generator::ExecutionContext context(const AppConfig& cfg, const std::string& version, rules::Environment env,
                                           std::string runId) {
  return {std::string(rules::to_string(env)), version, cfg.authToken, std::move(runId)};
}

// Runs the collection budget and returns the executed records (timestamps left empty).
inline std::vector<generator::RequestRecord> collect_records(const AppConfig& cfg, registry::Transport& transport) {
  const generator::RequestGenerator gen(generator::default_schema(), cfg.generator);
  const auto ctx = context(cfg, cfg.collectVersion, cfg.collectEnvironment, "collect");
  std::vector<generator::RequestRecord> out;
  out.reserve(cfg.generator.budget);
  for (std::size_t i = 0; i < cfg.generator.budget; ++i) out.push_back(generator::execute_request(gen.generate(i), transport, ctx));
  return out;
}

struct PreparedData {
  features::FeatureMatrix matrix;
  features::FeatureSchema schema;
  std::vector<std::string> dropped;
};

// Featurization followed by iterative zero-importance feature elimination.
inline PreparedData prepare(const std::vector<features::FlatRecord>& records, const AppConfig& cfg) {
  auto [matrix, schema] = features::build_features(records);
  const auto before = schema.names();
  auto [reduced, reducedSchema] =
      features::select_features_iteratively(std::move(matrix), std::move(schema), [&](const features::FeatureMatrix& m) {
        return classifier::train_forest(m, cfg.hyperparams, cfg.selectionSeed).feature_importances();
      });
  PreparedData out{std::move(reduced), std::move(reducedSchema), {}};
  const auto after = out.schema.names();
  for (const auto& n : before) {
    if (std::find(after.begin(), after.end(), n) == after.end()) out.dropped.push_back(n);
  }
  return out;
}

inline std::vector<features::FlatRecord> refine_records(const std::vector<generator::RequestRecord>& records) {
  std::vector<features::FlatRecord> out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back(features::refine_record(json(r)));
  return out;
}

struct TrainTestSplit {
  features::FeatureMatrix train;
  features::FeatureMatrix test;
};

inline TrainTestSplit split(const PreparedData& data, const AppConfig& cfg) {
  auto [train, test] = features::split(data.matrix, cfg.splitRatio, cfg.splitSeed);
  return {std::move(train), std::move(test)};
}

inline classifier::ForestModel train_model(const features::FeatureMatrix& train, const features::FeatureSchema& schema,
                                           const classifier::ForestHyperparams& hp, const AppConfig& cfg) {
  return classifier::train_forest(train, hp, cfg.forestSeed, schema.fingerprint());
}

inline std::vector<experiment::ModelComparisonRow> compare_models(const classifier::ForestModel& forest,
                                                                  const TrainTestSplit& data) {
  std::vector<experiment::ModelComparisonRow> rows;
  rows.push_back({forest.name(), classifier::evaluate_scores(forest.predict_proba_all(data.test), data.test.y)});
  for (auto kind : {classifier::BaselineKind::Logistic, classifier::BaselineKind::Knn,
                    classifier::BaselineKind::GaussianNB}) {
    const auto model = classifier::train_baseline(kind, data.train);
    rows.push_back({model->name(), classifier::evaluate_scores(model->predict_proba_all(data.test), data.test.y)});
  }
  return rows;
}

struct CampaignOptions {
  bool filter = true;
  std::string version = "v1";
  rules::Environment environment = rules::Environment::Dev;
  std::size_t budget = 5000;
  std::uint64_t seed = 1011;
  bool shadow = true;  // count false negatives against a second registry instance
};

inline gate::CampaignResult run_campaign(const AppConfig& cfg, const rules::Catalog& catalog,
                                         const classifier::ForestModel* model, const features::FeatureSchema* schema,
                                         const CampaignOptions& opt) {
  LocalRegistry target(catalog, opt.version, opt.environment, cfg.authToken);
  LocalRegistry shadow(catalog, opt.version, opt.environment, cfg.authToken);
  auto gcfg = cfg.generator;
  gcfg.seed = opt.seed;
  gcfg.budget = opt.budget;
  const generator::RequestGenerator gen(generator::default_schema(), gcfg);
  const gate::Gate g = opt.filter ? gate::Gate(model, schema) : gate::Gate(nullptr, nullptr);
  if (opt.filter && !model) throw std::invalid_argument("a filtered campaign needs a trained model");
  const auto ctx = context(cfg, opt.version, opt.environment, opt.filter ? "filtered" : "unfiltered");
  return gate::run_filtered_campaign(gen, g, *target.transport, ctx,
                                     opt.filter && opt.shadow ? shadow.transport.get() : nullptr);
}

}  // namespace evoclass::app

#pragma once

#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "evoclass/classifier/search.hpp"
#include "evoclass/experiment/experiment.hpp"
#include "evoclass/generator/generator.hpp"

namespace evoclass::app {

using json = nlohmann::json;
namespace fs = std::filesystem;

inline constexpr const char* kAuthTokenEnv = "EVOCLASS_AUTH_TOKEN";
inline constexpr const char* kDefaultAuthToken = "evoclass-dev-token";

struct Paths {
  fs::path catalogDir = "out/catalog";
  fs::path rawLog = "out/raw_log.jsonl";
  fs::path dataset = "out/dataset.csv";
  fs::path featureSchema = "out/feature_schema.json";
  fs::path model = "out/model.json";
  fs::path campaignDir = "out/campaigns";
  fs::path results = "out/results.csv";
  fs::path reports = "out/reports";
};

struct AppConfig {
  std::uint64_t masterSeed = 20240601;
  std::uint64_t catalogSeed = 2024;
  Paths paths;
  std::string authToken = kDefaultAuthToken;

  generator::GeneratorConfig generator;  // collection run
  std::string collectVersion = "v1";
  rules::Environment collectEnvironment = rules::Environment::Dev;

  double splitRatio = 0.8;
  std::uint64_t splitSeed = 3;
  std::uint64_t selectionSeed = 5;
  std::uint64_t forestSeed = 7;
  classifier::ForestHyperparams hyperparams;
  classifier::SearchSpace searchSpace;
  int searchTrials = 50;
  std::uint64_t searchSeed = 13;

  std::size_t campaignBudget = 5000;
  std::uint64_t campaignSeed = 1011;

  experiment::ExperimentConfig experiment;

  std::string serverHost = "127.0.0.1";
  int serverPort = 8080;
};

inline std::vector<std::string> all_versions() {
  std::vector<std::string> out;
  for (const auto& v : rules::kVersions) out.emplace_back(v.id);
  return out;
}

// Relative entries under "paths" are resolved against `base` when it is given,
// otherwise against the working directory.
inline AppConfig parse_config(const json& j, const fs::path& base = {}) {
  AppConfig c;
  c.masterSeed = j.value("masterSeed", c.masterSeed);
  c.catalogSeed = j.value("catalogSeed", c.catalogSeed);
  if (j.contains("paths")) {
    const auto& p = j["paths"];
    auto path = [&](const char* key, fs::path& target) {
      if (p.contains(key)) target = p[key].get<std::string>();
      if (!base.empty() && target.is_relative()) target = base / target;
    };
    path("catalogDir", c.paths.catalogDir);
    path("rawLog", c.paths.rawLog);
    path("dataset", c.paths.dataset);
    path("featureSchema", c.paths.featureSchema);
    path("model", c.paths.model);
    path("campaignDir", c.paths.campaignDir);
    path("results", c.paths.results);
    path("reports", c.paths.reports);
  }
  if (j.contains("generator")) c.generator = j["generator"].get<generator::GeneratorConfig>();
  if (j.contains("collection")) {
    c.collectVersion = j["collection"].value("version", c.collectVersion);
    c.collectEnvironment = rules::parse_environment(j["collection"].value("environment", "dev"));
  }
  if (j.contains("training")) {
    const auto& t = j["training"];
    c.splitRatio = t.value("splitRatio", c.splitRatio);
    c.splitSeed = t.value("splitSeed", c.splitSeed);
    c.selectionSeed = t.value("selectionSeed", c.selectionSeed);
    c.forestSeed = t.value("forestSeed", c.forestSeed);
    if (t.contains("hyperparams")) c.hyperparams = classifier::hyperparams_from_json(t["hyperparams"]);
    if (t.contains("searchSpace")) c.searchSpace = classifier::search_space_from_json(t["searchSpace"]);
    c.searchTrials = t.value("searchTrials", c.searchTrials);
    c.searchSeed = t.value("searchSeed", c.searchSeed);
  }
  if (j.contains("campaign")) {
    c.campaignBudget = j["campaign"].value("budget", c.campaignBudget);
    c.campaignSeed = j["campaign"].value("seed", c.campaignSeed);
  }
  auto& e = c.experiment;
  e.versions = all_versions();
  e.environments = {rules::kEnvironments[0], rules::kEnvironments[1], rules::kEnvironments[2]};
  e.masterSeed = c.masterSeed;
  if (j.contains("experiment")) {
    const auto& x = j["experiment"];
    if (x.contains("versions")) e.versions = x["versions"].get<std::vector<std::string>>();
    if (x.contains("environments")) {
      e.environments.clear();
      for (const auto& env : x["environments"]) e.environments.push_back(rules::parse_environment(env.get<std::string>()));
    }
    if (x.contains("approaches")) {
      e.approaches.clear();
      for (const auto& a : x["approaches"]) e.approaches.push_back(experiment::parse_approach(a.get<std::string>()));
    }
    e.repetitions = x.value("repetitions", e.repetitions);
    e.budget = x.value("budget", e.budget);
  }
  e.generator = c.generator;
  if (j.contains("server")) {
    c.serverHost = j["server"].value("host", c.serverHost);
    c.serverPort = j["server"].value("port", c.serverPort);
  }
  if (const char* token = std::getenv(kAuthTokenEnv); token && *token) c.authToken = token;
  e.authToken = c.authToken;
  e.validate();
  return c;
}

inline AppConfig load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read config " + path.string());
  json j;
  try {
    j = json::parse(in, nullptr, true, true);
  } catch (const json::exception& e) {
    throw std::runtime_error("config " + path.string() + ": " + e.what());
  }
  return parse_config(j);
}

}  // namespace evoclass::app

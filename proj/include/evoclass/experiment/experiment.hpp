#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "evoclass/experiment/stats.hpp"
#include "evoclass/gate/gate.hpp"
#include "evoclass/rules/catalog.hpp"

namespace evoclass::experiment {

enum class Approach { Filtered, Unfiltered };

inline std::string_view to_string(Approach a) { return a == Approach::Filtered ? "filtered" : "unfiltered"; }

inline Approach parse_approach(std::string_view s) {
  if (s == "filtered") return Approach::Filtered;
  if (s == "unfiltered") return Approach::Unfiltered;
  throw std::invalid_argument("unknown approach '" + std::string(s) + "'");
}

struct ExperimentConfig {
  std::vector<std::string> versions;
  std::vector<rules::Environment> environments;
  int repetitions = 10;
  std::size_t budget = 3000;
  std::uint64_t masterSeed = 1;
  std::vector<Approach> approaches{Approach::Filtered, Approach::Unfiltered};
  generator::GeneratorConfig generator;  // seed and budget are replaced per run
  std::string authToken = "evoclass-dev-token";

  void validate() const {
    if (repetitions < 1) throw std::invalid_argument("ExperimentConfig: repetitions must be >= 1");
    if (budget < 1) throw std::invalid_argument("ExperimentConfig: budget must be >= 1");
    if (versions.empty() || environments.empty() || approaches.empty()) {
      throw std::invalid_argument("ExperimentConfig: versions, environments and approaches must be non-empty");
    }
    for (const auto& v : versions) rules::version_index(v);
  }
};

// Both approaches of a repetition share the request stream, so their difference
// is the gate and nothing else.
inline std::uint64_t run_seed(std::uint64_t master, rules::Environment env, std::string_view version, int rep) {
  return derive_seed(master, static_cast<std::uint64_t>(env), rules::version_index(version),
                     static_cast<std::uint64_t>(rep));
}

struct RunResult {
  Approach approach = Approach::Filtered;
  std::string version;
  rules::Environment environment = rules::Environment::Dev;
  int repetition = 0;
  std::uint64_t seed = 0;
  gate::FilterStats stats;
  registry::CounterSnapshot counters;
  std::string error;  // empty on success

  bool ok() const { return error.empty(); }
  std::optional<CoverageReport> coverage_report() const {
    if (!ok() || counters.totalHits == 0) return std::nullopt;
    return coverage(counters.applied, counters.notApplied);
  }
};

struct ResultStore {
  std::vector<RunResult> rows;

  static constexpr const char* kHeader =
      "approach,environment,version,repetition,seed,total_req,pred_success,pred_failure,pred_success_failure,"
      "false_negatives,total_hits,applied,not_applied,coverage_applied,coverage_not_applied,error";

  void write_csv(std::ostream& out) const {
    out << kHeader << '\n';
    for (const auto& r : rows) {
      const auto cov = r.coverage_report();
      char ca[32] = "", cn[32] = "";
      if (cov) {
        std::snprintf(ca, sizeof ca, "%.6f", cov->coverageApplied);
        std::snprintf(cn, sizeof cn, "%.6f", cov->coverageNotApplied);
      }
      out << to_string(r.approach) << ',' << rules::to_string(r.environment) << ',' << r.version << ','
          << r.repetition << ',' << r.seed << ',' << r.stats.totalGenerated << ',' << r.stats.predictedSuccess << ','
          << r.stats.predictedFailure << ',' << r.stats.executedButFailed << ','
          << (r.stats.filteredButSuccessful ? std::to_string(*r.stats.filteredButSuccessful) : "") << ','
          << r.counters.totalHits << ',' << r.counters.applied << ',' << r.counters.notApplied << ',' << ca << ','
          << cn << ',' << r.error << '\n';
    }
  }

  void save(const std::filesystem::path& path) const {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path);
    write_csv(out);
    if (!out) throw std::runtime_error("cannot write result store " + path.string());
  }

  static ResultStore load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read result store " + path.string());
    std::string line;
    std::getline(in, line);
    if (line != kHeader) throw std::runtime_error("result store header mismatch in " + path.string());
    ResultStore store;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      std::vector<std::string> c;
      std::stringstream ss(line);
      std::string cell;
      while (std::getline(ss, cell, ',')) c.push_back(cell);
      while (c.size() < 16) c.emplace_back();
      RunResult r;
      r.approach = parse_approach(c[0]);
      r.environment = rules::parse_environment(c[1]);
      r.version = c[2];
      r.repetition = std::stoi(c[3]);
      r.seed = std::stoull(c[4]);
      r.stats.totalGenerated = std::stoull(c[5]);
      r.stats.predictedSuccess = std::stoull(c[6]);
      r.stats.predictedFailure = std::stoull(c[7]);
      r.stats.executedButFailed = std::stoull(c[8]);
      if (!c[9].empty()) r.stats.filteredButSuccessful = std::stoull(c[9]);
      r.counters.totalHits = std::stoull(c[10]);
      r.counters.applied = std::stoull(c[11]);
      r.counters.notApplied = std::stoull(c[12]);
      r.error = c[15];
      store.rows.push_back(std::move(r));
    }
    return store;
  }
};

struct ModelRef {
  const classifier::ForestModel* model = nullptr;
  const features::FeatureSchema* schema = nullptr;
};

inline RunResult run_single(const rules::Catalog& catalog, const ExperimentConfig& cfg, const ModelRef& model,
                            Approach approach, rules::Environment env, const std::string& version, int rep) {
  RunResult r;
  r.approach = approach;
  r.version = version;
  r.environment = env;
  r.repetition = rep;
  r.seed = run_seed(cfg.masterSeed, env, version, rep);
  try {
    auto rs = std::make_shared<const rules::RuleSet>(catalog.at(version, env));
    registry::ServiceConfig sc{version, env, cfg.authToken};
    registry::RegistryService service(rs, sc);
    registry::RegistryService shadowService(rs, sc);
    registry::InProcessTransport transport(service);
    registry::InProcessTransport shadow(shadowService);

    auto gcfg = cfg.generator;
    gcfg.seed = r.seed;
    gcfg.budget = cfg.budget;
    const generator::RequestGenerator gen(generator::default_schema(), gcfg);
    const generator::ExecutionContext ctx{std::string(rules::to_string(env)), version, cfg.authToken,
                                          std::string(to_string(approach))};
    const gate::Gate g = approach == Approach::Filtered ? gate::Gate(model.model, model.schema)
                                                        : gate::Gate(nullptr, nullptr);
    if (approach == Approach::Filtered && !model.model) throw std::invalid_argument("filtered run needs a model");
    auto result = gate::run_filtered_campaign(gen, g, transport, ctx, g.enabled() ? &shadow : nullptr);
    r.stats = result.stats;
    r.counters = service.snapshot_counters();
  } catch (const std::exception& e) {
    r.error = e.what();
    for (auto& ch : r.error) {
      if (ch == ',' || ch == '\n') ch = ';';
    }
  }
  return r;
}

inline ResultStore run_experiment(const ExperimentConfig& cfg, const rules::Catalog& catalog, const ModelRef& model,
                                  std::ostream* progress = nullptr) {
  cfg.validate();
  ResultStore store;
  for (auto env : cfg.environments) {
    for (const auto& version : cfg.versions) {
      for (int rep = 0; rep < cfg.repetitions; ++rep) {
        for (auto approach : cfg.approaches) {
          store.rows.push_back(run_single(catalog, cfg, model, approach, env, version, rep));
          if (!store.rows.back().ok() && progress) {
            *progress << "warning: " << rules::to_string(env) << '/' << version << " rep " << rep << ' '
                      << to_string(approach) << " failed: " << store.rows.back().error << '\n';
          }
        }
      }
      if (progress) *progress << "  done " << rules::to_string(env) << '/' << version << '\n';
    }
  }
  return store;
}

// ---------------------------------------------------------------------------
// Reports.

struct CellKey {
  rules::Environment environment;
  std::size_t versionIndex;
  friend auto operator<=>(const CellKey&, const CellKey&) = default;
};

struct CellTotals {
  gate::FilterStats stats;
  registry::CounterSnapshot counters;
  std::vector<double> coverageApplied;
  std::vector<double> hits;
  std::vector<double> executed;
  std::size_t runs = 0;
};

inline std::map<CellKey, std::map<Approach, CellTotals>> cell_totals(const ResultStore& store) {
  std::map<CellKey, std::map<Approach, CellTotals>> cells;
  for (const auto& r : store.rows) {
    if (!r.ok()) continue;
    auto& t = cells[{r.environment, rules::version_index(r.version)}][r.approach];
    t.stats.totalGenerated += r.stats.totalGenerated;
    t.stats.predictedSuccess += r.stats.predictedSuccess;
    t.stats.predictedFailure += r.stats.predictedFailure;
    t.stats.executedButFailed += r.stats.executedButFailed;
    if (r.stats.filteredButSuccessful) {
      t.stats.filteredButSuccessful = t.stats.filteredButSuccessful.value_or(0) + *r.stats.filteredButSuccessful;
    }
    t.counters.totalHits += r.counters.totalHits;
    t.counters.applied += r.counters.applied;
    t.counters.notApplied += r.counters.notApplied;
    if (auto cov = r.coverage_report()) t.coverageApplied.push_back(cov->coverageApplied);
    t.hits.push_back(static_cast<double>(r.counters.totalHits));
    t.executed.push_back(static_cast<double>(r.stats.predictedSuccess));
    ++t.runs;
  }
  return cells;
}

struct CellStatistics {
  rules::Environment environment;
  std::string version;
  MannWhitneyResult mw;
  double a12 = 0.5;
  double meanFiltered = 0.0;
  double meanUnfiltered = 0.0;
  std::size_t n = 0;
  std::size_t m = 0;
};

// Mann-Whitney and A12 on per-repetition applied coverage, filtered vs unfiltered.
inline std::vector<CellStatistics> cell_statistics(const ResultStore& store) {
  std::vector<CellStatistics> out;
  for (const auto& [key, byApproach] : cell_totals(store)) {
    auto f = byApproach.find(Approach::Filtered);
    auto u = byApproach.find(Approach::Unfiltered);
    if (f == byApproach.end() || u == byApproach.end() || f->second.coverageApplied.empty() ||
        u->second.coverageApplied.empty()) {
      continue;
    }
    const auto& xs = f->second.coverageApplied;
    const auto& ys = u->second.coverageApplied;
    CellStatistics s{key.environment, std::string(rules::kVersions[key.versionIndex].id), mann_whitney(xs, ys),
                     vargha_delaney_a12(xs, ys), 0.0, 0.0, xs.size(), ys.size()};
    for (double x : xs) s.meanFiltered += x / static_cast<double>(xs.size());
    for (double y : ys) s.meanUnfiltered += y / static_cast<double>(ys.size());
    out.push_back(s);
  }
  return out;
}

struct ModelComparisonRow {
  std::string model;
  classifier::Evaluation evaluation;
};

inline void write_model_comparison_csv(const std::vector<ModelComparisonRow>& rows, std::ostream& out) {
  out << "model,accuracy,precision,recall,f1,auc\n";
  for (const auto& r : rows) {
    const auto& e = r.evaluation;
    out << r.model << ',' << gate::percent(e.accuracy) << ',' << gate::percent(e.precision) << ','
        << gate::percent(e.recall) << ',' << gate::percent(e.f1) << ',' << gate::percent(e.roc.auc) << '\n';
  }
}

inline void write_roc_csv(const std::vector<ModelComparisonRow>& rows, std::ostream& out) {
  out << "model,fpr,tpr\n";
  for (const auto& r : rows) {
    for (const auto& p : r.evaluation.roc.points) out << r.model << ',' << p.fpr << ',' << p.tpr << '\n';
  }
}

inline std::string fixed(double v, int decimals = 2) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
  return buf;
}

struct ReportPaths {
  std::filesystem::path costReduction;
  std::filesystem::path ruleHits;
  std::filesystem::path statistics;
  std::filesystem::path correlation;
};

inline ReportPaths render_reports(const ResultStore& store, const std::filesystem::path& outDir,
                                  std::ostream& warnings = std::cerr) {
  if (store.rows.empty()) throw std::invalid_argument("render_reports: empty result store");
  std::filesystem::create_directories(outDir);
  ReportPaths paths{outDir / "cost_reduction.csv", outDir / "rule_hits.csv", outDir / "statistics.csv",
                    outDir / "correlation.csv"};
  const auto cells = cell_totals(store);

  std::ofstream tv(paths.costReduction);
  tv << gate::kFilterStatsCsvHeader << '\n';
  for (const auto& [key, byApproach] : cells) {
    auto it = byApproach.find(Approach::Filtered);
    const auto version = rules::kVersions[key.versionIndex].id;
    if (it == byApproach.end() || it->second.stats.totalGenerated == 0) {
      warnings << "warning: no filtered runs for " << rules::to_string(key.environment) << '/' << version
               << "; row omitted\n";
      continue;
    }
    tv << gate::filter_stats_csv_row(rules::to_string(key.environment), version, it->second.stats) << '\n';
  }

  std::ofstream tvi(paths.ruleHits);
  tvi << "environment,version,requests_filtered,requests_unfiltered,rule_hits_filtered,rule_hits_unfiltered,"
         "applied_filtered,applied_unfiltered,not_applied_filtered,not_applied_unfiltered,"
         "coverage_applied_filtered,coverage_applied_unfiltered,coverage_not_applied_filtered,"
         "coverage_not_applied_unfiltered\n";
  for (const auto& [key, byApproach] : cells) {
    auto f = byApproach.find(Approach::Filtered);
    auto u = byApproach.find(Approach::Unfiltered);
    const auto version = rules::kVersions[key.versionIndex].id;
    if (f == byApproach.end() || u == byApproach.end() || f->second.counters.totalHits == 0 ||
        u->second.counters.totalHits == 0) {
      warnings << "warning: incomplete cell " << rules::to_string(key.environment) << '/' << version
               << "; rule-hit row omitted\n";
      continue;
    }
    const auto cf = coverage(f->second.counters.applied, f->second.counters.notApplied);
    const auto cu = coverage(u->second.counters.applied, u->second.counters.notApplied);
    tvi << rules::to_string(key.environment) << ',' << version << ',' << f->second.stats.predictedSuccess << ','
        << u->second.stats.predictedSuccess << ',' << cf.totalHits << ',' << cu.totalHits << ',' << cf.applied << ','
        << cu.applied << ',' << cf.notApplied << ',' << cu.notApplied << ',' << fixed(cf.coverageApplied) << ','
        << fixed(cu.coverageApplied) << ',' << fixed(cf.coverageNotApplied) << ',' << fixed(cu.coverageNotApplied)
        << '\n';
  }

  std::ofstream st(paths.statistics);
  st << "environment,version,runs_filtered,runs_unfiltered,mean_coverage_applied_filtered,"
        "mean_coverage_applied_unfiltered,mann_whitney_u,p_value,exact,a12\n";
  for (const auto& s : cell_statistics(store)) {
    st << rules::to_string(s.environment) << ',' << s.version << ',' << s.n << ',' << s.m << ','
       << fixed(s.meanFiltered, 4) << ',' << fixed(s.meanUnfiltered, 4) << ',' << fixed(s.mw.u, 1) << ','
       << fixed(s.mw.pValue, 6) << ',' << (s.mw.exact ? "yes" : "no") << ',' << fixed(s.a12, 4) << '\n';
  }

  // Rule hits against executed requests, per approach, across all runs.
  std::ofstream pc(paths.correlation);
  pc << "approach,runs,pearson_hits_vs_executed\n";
  for (auto approach : {Approach::Filtered, Approach::Unfiltered}) {
    std::vector<double> hits, executed;
    for (const auto& [key, byApproach] : cells) {
      auto it = byApproach.find(approach);
      if (it == byApproach.end()) continue;
      hits.insert(hits.end(), it->second.hits.begin(), it->second.hits.end());
      executed.insert(executed.end(), it->second.executed.begin(), it->second.executed.end());
    }
    if (hits.empty()) continue;
    std::string r = "undefined";
    try {
      r = fixed(pearson(hits, executed), 4);
    } catch (const std::invalid_argument&) {
    }
    pc << to_string(approach) << ',' << hits.size() << ',' << r << '\n';
  }
  return paths;
}

}  // namespace evoclass::experiment

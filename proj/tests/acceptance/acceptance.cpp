// Acceptance checks. Prints one PASS/FAIL line per criterion on stdout; details go to stderr.
// Exit status is non-zero if any selected criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include <CLI11.hpp>

#include "evoclass/app/pipeline.hpp"

using namespace evoclass;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

// ---------------------------------------------------------------------------
// Reference data.

struct RefCostRow {
  const char* env;
  const char* version;
  std::uint64_t total;
  std::uint64_t predSuccess;
  std::uint64_t predFailure;
  std::uint64_t predSuccessFailed;
  double accuracy, precision, recall, f1, costReduction;  // percent
};

struct RefCoverageRow {
  const char* env;
  const char* version;
  std::uint64_t appliedOurs, notAppliedOurs;
  double covAppliedOurs, covNotAppliedOurs;
  std::uint64_t appliedEm, notAppliedEm;
  double covAppliedEm, covNotAppliedEm;
};

// The dev/v4 false-positive cell is printed as "43 14" in the source; read as 4314.
const RefCostRow kCostRows[] = {
    {"dev", "v1", 47471, 32664, 14807, 4137, 91.28, 87.33, 100, 93.23, 31.19},
    {"dev", "v2", 48323, 33432, 14891, 4295, 91.11, 87.15, 100, 93.13, 30.82},
    {"dev", "v3", 47508, 32753, 14755, 4395, 90.75, 86.58, 100, 92.80, 31.06},
    {"dev", "v4", 47020, 32533, 14487, 4314, 90.83, 86.73, 100, 92.90, 30.81},
    {"dev", "v5", 37078, 25577, 11501, 3307, 91.08, 87.07, 100, 93.08, 31.02},
    {"dev", "v6", 39953, 27378, 12575, 3614, 90.95, 86.79, 100, 92.93, 31.47},
    {"dev", "v7", 32031, 21983, 10048, 2917, 90.89, 86.73, 100, 92.90, 31.37},
    {"dev", "v8", 32108, 22255, 9853, 2806, 91.26, 87.39, 100, 93.27, 30.69},
    {"dev", "v9", 33866, 23303, 10563, 3078, 90.91, 86.79, 100, 92.92, 31.19},
    {"dev", "v10", 35138, 24217, 10921, 3105, 91.16, 87.17, 100, 93.15, 31.08},
    {"test", "v1", 48290, 33173, 15117, 4338, 91.02, 86.92, 100, 93.02, 31.30},
    {"test", "v2", 47854, 32932, 14922, 4255, 91.11, 87.11, 100, 92.96, 31.18},
    {"test", "v3", 44010, 30239, 13771, 3945, 91.03, 86.96, 100, 93.38, 31.29},
    {"test", "v4", 41231, 28382, 12849, 3635, 91.18, 87.19, 100, 92.29, 31.17},
    {"test", "v5", 55488, 38164, 17324, 4940, 91.09, 87.19, 100, 92.29, 31.22},
    {"test", "v6", 45569, 31551, 14018, 4080, 91.04, 87.01, 100, 93.22, 30.76},
    {"test", "v7", 55287, 37914, 17373, 4936, 91.07, 87.12, 100, 92.40, 31.42},
    {"test", "v8", 54149, 37302, 16847, 4896, 91.78, 86.51, 100, 93.07, 31.11},
    {"test", "v9", 43884, 30228, 13655, 4004, 91.87, 86.78, 100, 93.37, 31.12},
    {"test", "v10", 53261, 36693, 16568, 4801, 90.98, 86.92, 100, 93.35, 31.10},
    {"prod", "v1", 41211, 28411, 12800, 3730, 90.95, 86.87, 100, 92.97, 31.05},
    {"prod", "v2", 33584, 23169, 10415, 3021, 91.00, 86.96, 100, 93.02, 31.00},
    {"prod", "v3", 43137, 29870, 13267, 3797, 91.20, 87.29, 100, 93.21, 30.75},
    {"prod", "v4", 33370, 22930, 10440, 2989, 91.05, 86.96, 100, 93.02, 31.28},
    {"prod", "v5", 38077, 26192, 11885, 3444, 90.95, 86.85, 100, 92.96, 31.21},
    {"prod", "v6", 37938, 26184, 11754, 3469, 90.85, 86.75, 100, 92.90, 30.98},
    {"prod", "v7", 35500, 24545, 10955, 3151, 91.12, 87.16, 100, 93.14, 30.85},
    {"prod", "v8", 32412, 22330, 10082, 2989, 90.77, 86.61, 100, 92.82, 31.11},
    {"prod", "v9", 36148, 24946, 11202, 3255, 91.00, 86.95, 100, 93.02, 30.98},
    {"prod", "v10", 39047, 26913, 12134, 3462, 91.13, 87.13, 100, 93.12, 31.07},
};

const RefCoverageRow kCoverageRows[] = {
    {"dev", "v1", 77259, 456739, 14.47, 85.53, 158134, 895507, 15.01, 84.99},
    {"dev", "v2", 82266, 479455, 14.65, 85.35, 118778, 775624, 13.28, 86.72},
    {"dev", "v3", 85075, 656407, 11.47, 88.53, 110074, 885142, 11.06, 88.94},
    {"dev", "v4", 82132, 656407, 11.12, 88.88, 129862, 1020247, 11.29, 88.71},
    {"dev", "v5", 64888, 572575, 10.18, 89.82, 81775, 691424, 10.58, 89.42},
    {"dev", "v6", 69933, 617864, 10.17, 89.83, 141945, 1255538, 10.16, 89.84},
    {"dev", "v7", 55051, 593326, 8.49, 91.51, 154161, 1594767, 8.81, 91.19},
    {"dev", "v8", 55650, 623684, 8.19, 91.81, 86739, 926093, 8.56, 91.44},
    {"dev", "v9", 58092, 658845, 8.10, 91.90, 89670, 960540, 8.54, 91.46},
    {"dev", "v10", 61241, 680762, 8.25, 91.75, 73042, 860166, 7.83, 92.17},
    {"test", "v1", 74133, 262185, 22.04, 77.96, 135978, 492828, 21.62, 78.38},
    {"test", "v2", 75678, 272589, 21.73, 78.27, 151389, 544981, 21.81, 78.19},
    {"test", "v3", 70034, 402085, 14.83, 85.17, 145070, 783839, 15.97, 84.03},
    {"test", "v4", 66337, 372399, 15.15, 84.85, 130867, 710708, 15.55, 84.45},
    {"test", "v5", 89512, 550464, 13.98, 86.02, 130082, 759504, 14.62, 85.38},
    {"test", "v6", 76208, 474705, 13.83, 86.17, 151298, 937574, 13.89, 86.11},
    {"test", "v7", 86802, 725858, 10.68, 89.32, 128884, 1006950, 11.34, 88.66},
    {"test", "v8", 92333, 713139, 11.46, 88.54, 124791, 1025248, 10.85, 89.15},
    {"test", "v9", 73626, 588845, 11.11, 88.89, 152027, 1259957, 10.76, 89.24},
    {"test", "v10", 88676, 725467, 10.89, 89.11, 145903, 1232825, 10.58, 89.42},
    {"prod", "v1", 64118, 221848, 22.42, 77.58, 145123, 515907, 21.95, 78.05},
    {"prod", "v2", 53848, 196784, 21.48, 78.52, 134858, 488982, 21.62, 78.38},
    {"prod", "v3", 71304, 371866, 16.09, 83.91, 138218, 764097, 15.32, 84.68},
    {"prod", "v4", 51914, 288287, 15.26, 84.74, 154461, 865251, 15.15, 84.85},
    {"prod", "v5", 61894, 375697, 14.14, 85.86, 131708, 798639, 14.16, 85.84},
    {"prod", "v6", 62771, 405534, 13.40, 86.60, 153969, 972341, 13.67, 86.33},
    {"prod", "v7", 60764, 466383, 11.53, 88.47, 154658, 1209036, 11.34, 88.66},
    {"prod", "v8", 53359, 455428, 10.49, 89.51, 110392, 875105, 11.20, 88.80},
    {"prod", "v9", 59557, 491798, 10.80, 89.20, 149276, 1223340, 10.88, 89.12},
    {"prod", "v10", 62900, 545606, 10.34, 89.66, 113411, 947408, 10.69, 89.31},
};

struct RuleCount {
  const char* version;
  int validation;
  int aggregation;
};

const RuleCount kRuleCounts[] = {
    {"v1", 30, 32}, {"v2", 31, 33}, {"v3", 48, 35}, {"v4", 49, 35}, {"v5", 53, 37},
    {"v6", 56, 37}, {"v7", 66, 38}, {"v8", 69, 43}, {"v9", 69, 43}, {"v10", 70, 43},
};

constexpr double kPpTolerance = 0.01;

// ---------------------------------------------------------------------------

struct Verdict {
  bool pass = false;
  std::string summary;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

bool near_pp(double computed, double expected) { return std::fabs(computed - expected) <= kPpTolerance + 1e-9; }

double seconds_since(Clock::time_point t) { return std::chrono::duration<double>(Clock::now() - t).count(); }

// 1. Cost-table metrics from count quadruples.
Verdict metric_oracle() {
  int ok = 0;
  for (const auto& r : kCostRows) {
    gate::FilterStats s;
    s.totalGenerated = r.total;
    s.predictedSuccess = r.predSuccess;
    s.predictedFailure = r.predFailure;
    s.executedButFailed = r.predSuccessFailed;
    s.filteredButSuccessful = 0;
    std::vector<std::string> problems;
    if (r.total != r.predSuccess + r.predFailure) {
      problems.push_back("total " + std::to_string(r.total) + " != " + std::to_string(r.predSuccess + r.predFailure));
    }
    const auto e = classifier::evaluate_counts(s.confusion());
    const std::pair<const char*, std::pair<double, double>> checks[] = {
        {"accuracy", {*e.accuracy * 100, r.accuracy}},
        {"precision", {*e.precision * 100, r.precision}},
        {"recall", {*e.recall * 100, r.recall}},
        {"f1", {*e.f1 * 100, r.f1}},
        {"cost_reduction", {gate::cost_reduction(r.total, r.predSuccess), r.costReduction}},
    };
    for (const auto& [name, v] : checks) {
      if (!near_pp(v.first, v.second)) {
        problems.push_back(std::string(name) + " " + fmt("%.4f", v.first) + " vs " + fmt("%.2f", v.second));
      }
    }
    if (problems.empty()) {
      ++ok;
    } else {
      std::cerr << "  [1] " << r.env << '/' << r.version << ":";
      for (const auto& p : problems) std::cerr << ' ' << p << ';';
      std::cerr << '\n';
    }
  }
  const int n = static_cast<int>(std::size(kCostRows));
  return {ok == n, std::to_string(ok) + "/" + std::to_string(n) + " rows reproduce within 0.01pp"};
}

// 2. Coverage pairs from applied / not-applied counts.
Verdict coverage_oracle() {
  int ok = 0, total = 0;
  auto check = [&](const RefCoverageRow& r, const char* who, std::uint64_t a, std::uint64_t na, double pa,
                   double pn) {
    ++total;
    const auto c = experiment::coverage(a, na);
    const bool good = near_pp(c.coverageApplied, pa) && near_pp(c.coverageNotApplied, pn) &&
                      std::fabs(pa + pn - 100.0) < 1e-9 && std::fabs(c.coverageApplied + c.coverageNotApplied - 100.0) < 1e-9;
    if (good) {
      ++ok;
    } else {
      std::cerr << "  [2] " << r.env << '/' << r.version << ' ' << who << ": computed " << fmt("%.4f", c.coverageApplied)
                << '/' << fmt("%.4f", c.coverageNotApplied) << " vs reference " << fmt("%.2f", pa) << '/'
                << fmt("%.2f", pn) << '\n';
    }
  };
  for (const auto& r : kCoverageRows) {
    check(r, "filtered", r.appliedOurs, r.notAppliedOurs, r.covAppliedOurs, r.covNotAppliedOurs);
    check(r, "unfiltered", r.appliedEm, r.notAppliedEm, r.covAppliedEm, r.covNotAppliedEm);
  }
  return {ok == total, std::to_string(ok) + "/" + std::to_string(total) + " coverage pairs reproduce and sum to 100%"};
}

std::map<std::string, std::string> rule_texts(const rules::RuleSet& rs) {
  std::map<std::string, std::string> out;
  for (const auto* rules : {&rs.validationRules, &rs.aggregationRules}) {
    for (const auto& r : *rules) out[r.ruleId] = r.scope + "|" + r.text();
  }
  return out;
}

// 3. Catalog counts, version deltas, test/prod divergence.
Verdict catalog_fidelity(const app::AppConfig& cfg) {
  const auto start = Clock::now();
  const auto catalog = rules::generate_catalog(cfg.catalogSeed);
  int countMismatches = 0, emptyDeltas = 0, identicalEnvPairs = 0;
  for (auto env : rules::kEnvironments) {
    for (std::size_t i = 0; i < std::size(kRuleCounts); ++i) {
      const auto& rc = kRuleCounts[i];
      const auto& rs = catalog.at(rc.version, env);
      if (static_cast<int>(rs.validationRules.size()) != rc.validation ||
          static_cast<int>(rs.aggregationRules.size()) != rc.aggregation) {
        ++countMismatches;
        std::cerr << "  [3] " << rules::to_string(env) << '/' << rc.version << ": " << rs.validationRules.size() << '/'
                  << rs.aggregationRules.size() << " rules, expected " << rc.validation << '/' << rc.aggregation << '\n';
      }
      if (i + 1 < std::size(kRuleCounts)) {
        const std::string from = rc.version, to = kRuleCounts[i + 1].version;
        const auto logged = std::count_if(catalog.deltas.begin(), catalog.deltas.end(), [&](const auto& d) {
          return d.versionFrom == from && d.versionTo == to && d.envFrom == env && d.envTo == env;
        });
        if (logged == 0) {
          ++emptyDeltas;
          std::cerr << "  [3] no logged changes " << from << "->" << to << " in " << rules::to_string(env) << '\n';
        }
      }
    }
  }
  for (const auto& rc : kRuleCounts) {
    if (rule_texts(catalog.at(rc.version, rules::Environment::Test)) ==
        rule_texts(catalog.at(rc.version, rules::Environment::Prod))) {
      ++identicalEnvPairs;
      std::cerr << "  [3] " << rc.version << ": test and prod rule sets are identical\n";
    }
  }
  const double secs = seconds_since(start);
  const bool pass = countMismatches == 0 && emptyDeltas == 0 && identicalEnvPairs == 0 && secs < 5.0;
  return {pass, "count mismatches " + std::to_string(countMismatches) + ", empty version deltas " +
                    std::to_string(emptyDeltas) + ", identical test/prod pairs " + std::to_string(identicalEnvPairs) +
                    ", " + fmt("%.2fs", secs)};
}

// Shared by criteria 4, 5 and 7.
struct TrainedArtifacts {
  app::PreparedData data;
  classifier::ForestModel model;
  std::vector<experiment::ModelComparisonRow> comparison;
};

TrainedArtifacts collect_and_train(const app::AppConfig& cfg) {
  const auto catalog = rules::generate_catalog(cfg.catalogSeed);
  app::LocalRegistry reg(catalog, cfg.collectVersion, cfg.collectEnvironment, cfg.authToken);
  const auto records = app::collect_records(cfg, *reg.transport);
  auto data = app::prepare(app::refine_records(records), cfg);
  const auto parts = app::split(data, cfg);
  auto model = app::train_model(parts.train, data.schema, cfg.hyperparams, cfg);
  auto comparison = app::compare_models(model, parts);
  return {std::move(data), std::move(model), std::move(comparison)};
}

// 4. Desk-scale effectiveness of the classifier and the gate.
Verdict rq1(const app::AppConfig& cfg, std::optional<TrainedArtifacts>& artifacts) {
  const auto start = Clock::now();
  if (!artifacts) artifacts = collect_and_train(cfg);
  const auto& a = *artifacts;
  const double rfAuc = *a.comparison.front().evaluation.roc.auc;
  bool rfBest = true;
  std::string baselines;
  for (std::size_t i = 1; i < a.comparison.size(); ++i) {
    const double b = a.comparison[i].evaluation.roc.auc.value_or(0.0);
    rfBest = rfBest && rfAuc >= b;
    baselines += " " + a.comparison[i].model + "=" + fmt("%.4f", b);
  }
  app::CampaignOptions opt;
  opt.filter = true;
  opt.version = cfg.collectVersion;
  opt.environment = cfg.collectEnvironment;
  opt.budget = cfg.campaignBudget;
  opt.seed = cfg.campaignSeed;
  opt.shadow = true;
  const auto campaign = app::run_campaign(cfg, rules::generate_catalog(cfg.catalogSeed), &a.model, &a.data.schema, opt);
  const auto gateEval = classifier::evaluate_counts(campaign.stats.confusion());
  const double recall = gateEval.recall.value_or(0.0);
  const double cr = gate::cost_reduction(campaign.stats);
  const double secs = seconds_since(start);
  std::cerr << "  [4] features:";
  for (const auto& n : a.data.schema.names()) std::cerr << ' ' << n;
  std::cerr << "\n  [4] campaign: " << gate::filter_stats_csv_row(rules::to_string(opt.environment), opt.version, campaign.stats)
            << ", false negatives " << campaign.stats.filteredButSuccessful.value_or(0) << '\n';
  const bool pass = rfAuc >= 0.95 && rfBest && recall >= 0.99 && cr >= 28.0 && cr <= 34.0 && secs < 600.0;
  return {pass, "RF AUC " + fmt("%.4f", rfAuc) + " (>= 0.95; baselines" + baselines + "), gate recall " +
                    fmt("%.4f", recall) + " (>= 0.99), cost reduction " + fmt("%.2f%%", cr) + " (28-34), " +
                    fmt("%.1fs", secs)};
}

experiment::ExperimentConfig rq2_config(const app::AppConfig& cfg) {
  auto e = cfg.experiment;
  e.versions = {"v1", "v5", "v10"};
  e.environments = {rules::Environment::Dev, rules::Environment::Test, rules::Environment::Prod};
  e.approaches = {experiment::Approach::Filtered, experiment::Approach::Unfiltered};
  e.repetitions = 10;
  return e;
}

// 5. Coverage parity between filtered and unfiltered campaigns.
Verdict rq2(const app::AppConfig& cfg, std::optional<TrainedArtifacts>& artifacts) {
  const auto start = Clock::now();
  if (!artifacts) artifacts = collect_and_train(cfg);
  const auto catalog = rules::generate_catalog(cfg.catalogSeed);
  const auto store =
      experiment::run_experiment(rq2_config(cfg), catalog, {&artifacts->model, &artifacts->data.schema});
  int good = 0, cells = 0, failedRuns = 0;
  for (const auto& r : store.rows) failedRuns += !r.ok();
  for (const auto& s : experiment::cell_statistics(store)) {
    ++cells;
    const bool ok = s.mw.pValue > 0.05 && s.a12 >= 0.3 && s.a12 <= 0.7;
    good += ok;
    std::cerr << "  [5] " << rules::to_string(s.environment) << '/' << s.version << ": p=" << fmt("%.4f", s.mw.pValue)
              << " A12=" << fmt("%.3f", s.a12) << " mean coverage " << fmt("%.3f", s.meanFiltered) << " vs "
              << fmt("%.3f", s.meanUnfiltered) << (ok ? "" : "  <-- outside") << '\n';
  }
  const double secs = seconds_since(start);
  const bool pass = cells == 9 && good >= 8 && failedRuns == 0 && secs < 1200.0;
  return {pass, std::to_string(good) + "/" + std::to_string(cells) +
                    " cells with p > 0.05 and A12 in [0.3, 0.7] (need >= 8/9), failed runs " +
                    std::to_string(failedRuns) + ", " + fmt("%.1fs", secs)};
}

// Brute-force two-sided permutation p-value: enumerate every split of the pooled
// sample into groups of the original sizes and compare |U - nm/2|.
double permutation_p(const std::vector<int>& xs, const std::vector<int>& ys) {
  std::vector<int> pooled(xs);
  pooled.insert(pooled.end(), ys.begin(), ys.end());
  const int n = static_cast<int>(xs.size()), total = static_cast<int>(pooled.size());
  auto u_of = [&](unsigned mask) {
    double u = 0;
    for (int i = 0; i < total; ++i) {
      if (!(mask >> i & 1u)) continue;
      for (int j = 0; j < total; ++j) {
        if (mask >> j & 1u) continue;
        u += pooled[i] > pooled[j] ? 1.0 : pooled[i] == pooled[j] ? 0.5 : 0.0;
      }
    }
    return u;
  };
  const double half = static_cast<double>(xs.size() * ys.size()) / 2.0;
  const double observed = std::fabs(u_of((1u << n) - 1u) - half);
  double extreme = 0, all = 0;
  for (unsigned mask = 0; mask < (1u << total); ++mask) {
    if (__builtin_popcount(mask) != n) continue;
    all += 1;
    if (std::fabs(u_of(mask) - half) >= observed - 1e-9) extreme += 1;
  }
  return extreme / all;
}

// 6. Statistics kernels against brute-force oracles.
Verdict stats_oracle() {
  const auto start = Clock::now();
  Rng rng(606);
  int mwBad = 0, mwChecked = 0, a12Bad = 0, identityBad = 0;
  auto ints = [&](std::size_t k, int hi) {
    std::vector<int> v(k);
    for (auto& x : v) x = static_cast<int>(rng.below(static_cast<std::uint64_t>(hi)));
    return v;
  };
  auto doubles = [](const std::vector<int>& v) { return std::vector<double>(v.begin(), v.end()); };

  for (std::size_t n = 1; n <= 8; ++n) {
    for (std::size_t m = 1; m <= 8; ++m) {
      for (int s = 0; s < 100; ++s) {
        const auto xs = ints(n, 6), ys = ints(m, 6);
        const auto r = experiment::mann_whitney(doubles(xs), doubles(ys));
        const double oracle = permutation_p(xs, ys);
        ++mwChecked;
        if (!r.exact || std::fabs(r.pValue - oracle) > 1e-9) {
          if (++mwBad <= 5) {
            std::cerr << "  [6] mann_whitney n=" << n << " m=" << m << ": " << r.pValue << " vs " << oracle << '\n';
          }
        }
      }
    }
  }

  for (int s = 0; s < 100; ++s) {
    const auto xs = ints(1 + rng.below(20), 10), ys = ints(1 + rng.below(20), 10);
    double wins = 0;
    for (int x : xs) {
      for (int y : ys) wins += x > y ? 1.0 : x == y ? 0.5 : 0.0;
    }
    const double oracle = wins / static_cast<double>(xs.size() * ys.size());
    if (std::fabs(experiment::vargha_delaney_a12(doubles(xs), doubles(ys)) - oracle) > 1e-12) ++a12Bad;
  }

  for (int s = 0; s < 1000; ++s) {
    const auto xs = doubles(ints(1 + rng.below(40), 15)), ys = doubles(ints(1 + rng.below(40), 15));
    const double nm = static_cast<double>(xs.size() * ys.size());
    bool ok = std::fabs(experiment::u_statistic(xs, ys) + experiment::u_statistic(ys, xs) - nm) < 1e-9;
    ok = ok && std::fabs(experiment::vargha_delaney_a12(xs, ys) + experiment::vargha_delaney_a12(ys, xs) - 1.0) < 1e-12;
    // AUC of the pooled scores with xs as positives is A12(xs, ys); flipping labels gives the complement.
    std::vector<double> scores(xs);
    scores.insert(scores.end(), ys.begin(), ys.end());
    std::vector<int> labels(scores.size(), 0), flipped(scores.size(), 1);
    std::fill(labels.begin(), labels.begin() + static_cast<long>(xs.size()), 1);
    std::fill(flipped.begin(), flipped.begin() + static_cast<long>(xs.size()), 0);
    const auto auc = classifier::auc(scores, labels);
    const auto inv = classifier::auc(scores, flipped);
    ok = ok && auc && inv && std::fabs(*auc + *inv - 1.0) < 1e-12 &&
         std::fabs(*auc - experiment::vargha_delaney_a12(xs, ys)) < 1e-12;
    if (!ok) ++identityBad;
  }

  const double secs = seconds_since(start);
  const bool pass = mwBad == 0 && a12Bad == 0 && identityBad == 0 && secs < 30.0;
  return {pass, "exact Mann-Whitney mismatches " + std::to_string(mwBad) + "/" + std::to_string(mwChecked) +
                    ", A12 mismatches " + std::to_string(a12Bad) + "/100, identity violations " +
                    std::to_string(identityBad) + "/1000, " + fmt("%.1fs", secs)};
}

std::string strip_timestamps(const fs::path& log) {
  std::ifstream in(log);
  std::string line, out;
  while (std::getline(in, line)) {
    auto j = nlohmann::json::parse(line);
    j.erase("timestamp");
    out += j.dump() + '\n';
  }
  return out;
}

std::string campaign_output(const app::AppConfig& cfg, const TrainedArtifacts& a) {
  app::CampaignOptions opt;
  opt.budget = cfg.campaignBudget;
  opt.seed = cfg.campaignSeed;
  const auto r = app::run_campaign(cfg, rules::generate_catalog(cfg.catalogSeed), &a.model, &a.data.schema, opt);
  std::string out = gate::filter_stats_csv_row("dev", "v1", r.stats) + '\n';
  for (const auto& rec : r.executed) out += nlohmann::json(rec).dump() + '\n';
  for (const auto& f : r.filtered) out += std::to_string(f.index) + ',' + fmt("%.17g", f.probability) + '\n';
  return out;
}

std::string experiment_output(const app::AppConfig& cfg, const TrainedArtifacts& a) {
  auto e = cfg.experiment;
  e.versions = {"v1", "v10"};
  e.repetitions = 2;
  e.budget = 500;
  const auto store = experiment::run_experiment(e, rules::generate_catalog(cfg.catalogSeed), {&a.model, &a.data.schema});
  std::ostringstream out;
  store.write_csv(out);
  return out.str();
}

// 7. Two runs with the same seeds give identical outputs.
Verdict determinism(const app::AppConfig& cfg) {
  const auto start = Clock::now();
  const auto dir = fs::temp_directory_path() / ("evoclass_acceptance_" + std::to_string(::getpid()));
  fs::create_directories(dir);
  std::vector<std::string> differing;

  std::string logs[2];
  for (int run = 0; run < 2; ++run) {
    const auto catalog = rules::generate_catalog(cfg.catalogSeed);
    app::LocalRegistry reg(catalog, cfg.collectVersion, cfg.collectEnvironment, cfg.authToken);
    const auto path = dir / ("collect_" + std::to_string(run) + ".jsonl");
    fs::remove(path);
    const generator::RequestGenerator gen(generator::default_schema(), cfg.generator);
    generator::run_collection(gen, *reg.transport, path,
                              app::context(cfg, cfg.collectVersion, cfg.collectEnvironment, "collect"));
    logs[run] = strip_timestamps(path);
  }
  if (logs[0] != logs[1]) differing.push_back("collect");

  const auto a = collect_and_train(cfg);
  const auto b = collect_and_train(cfg);
  if (a.model.to_json().dump() != b.model.to_json().dump() || a.data.schema.to_json() != b.data.schema.to_json()) {
    differing.push_back("train");
  }
  if (campaign_output(cfg, a) != campaign_output(cfg, b)) differing.push_back("campaign");
  if (experiment_output(cfg, a) != experiment_output(cfg, b)) differing.push_back("experiment");
  fs::remove_all(dir);

  const double secs = seconds_since(start);
  std::string which;
  for (const auto& d : differing) which += " " + d;
  return {differing.empty() && secs < 600.0,
          (differing.empty() ? std::string("collect, train, campaign, experiment identical across runs")
                             : "differing:" + which) +
              ", " + fmt("%.1fs", secs)};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App cli{"Acceptance checks"};
  std::string configPath = "config/default.json";
  std::vector<int> only;
  cli.add_option("-c,--config", configPath, "Configuration file")->check(CLI::ExistingFile);
  cli.add_option("criteria", only, "Run only these criteria (1-7)")->check(CLI::Range(1, 7));
  CLI11_PARSE(cli, argc, argv);

  app::AppConfig cfg;
  try {
    cfg = app::load_config(configPath);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  std::optional<TrainedArtifacts> artifacts;

  const std::vector<std::pair<const char*, std::function<Verdict()>>> criteria = {
      {"metric oracle", [] { return metric_oracle(); }},
      {"coverage oracle", [] { return coverage_oracle(); }},
      {"catalog fidelity", [&] { return catalog_fidelity(cfg); }},
      {"desk-scale classifier and gate", [&] { return rq1(cfg, artifacts); }},
      {"desk-scale coverage parity", [&] { return rq2(cfg, artifacts); }},
      {"statistics kernels", [] { return stats_oracle(); }},
      {"determinism", [&] { return determinism(cfg); }},
  };

  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i + 1);
    if (!only.empty() && std::find(only.begin(), only.end(), id) == only.end()) continue;
    Verdict v;
    try {
      v = criteria[i].second();
    } catch (const std::exception& e) {
      v = {false, std::string("error: ") + e.what()};
    }
    failures += !v.pass;
    std::cout << (v.pass ? "PASS" : "FAIL") << " criterion " << id << " (" << criteria[i].first << "): " << v.summary
              << std::endl;
  }
  return failures == 0 ? 0 : 1;
}

#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "evoclass/classifier/forest.hpp"
#include "evoclass/classifier/metrics.hpp"
#include "evoclass/features/features.hpp"
#include "evoclass/generator/generator.hpp"

namespace evoclass::gate {

using generator::RequestRecord;

struct FilterStats {
  std::uint64_t totalGenerated = 0;
  std::uint64_t predictedSuccess = 0;   // executed
  std::uint64_t predictedFailure = 0;   // filtered, never sent
  std::uint64_t executedButFailed = 0;  // false positives among executed
  std::map<int, std::uint64_t> statusTallies;
  // Filtered requests that would have succeeded. Only known when a shadow service is attached.
  std::optional<std::uint64_t> filteredButSuccessful;

  void check() const {
    if (totalGenerated != predictedSuccess + predictedFailure || executedButFailed > predictedSuccess) {
      throw std::logic_error("FilterStats accounting violated");
    }
  }

  // Gate confusion counts. Without a shadow measurement, false negatives are taken as zero.
  classifier::ConfusionCounts confusion() const {
    return {predictedSuccess - executedButFailed, executedButFailed, predictedFailure - filteredButSuccessful.value_or(0),
            filteredButSuccessful.value_or(0)};
  }

  friend bool operator==(const FilterStats&, const FilterStats&) = default;
};

class ZeroTotalError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

inline double cost_reduction(std::uint64_t totalGenerated, std::uint64_t executed) {
  if (totalGenerated == 0) throw ZeroTotalError("cost_reduction: no requests generated");
  return static_cast<double>(totalGenerated - executed) / static_cast<double>(totalGenerated) * 100.0;
}

inline double cost_reduction(const FilterStats& s) { return cost_reduction(s.totalGenerated, s.predictedSuccess); }

/// Predict-before-execute interception point. A null model executes everything.
class Gate {
 public:
  Gate(const classifier::ForestModel* model, const features::FeatureSchema* schema) : model_(model), schema_(schema) {
    if (model_) {
      if (!schema_) throw std::invalid_argument("Gate: a model needs its feature schema");
      model_->check_schema(*schema_);
    }
  }

  // Success probability from pre-execution information only.
  double score(const generator::GeneratedRequest& req, const generator::ExecutionContext& ctx) const {
    if (!model_) return 1.0;
    const auto row = features::featurize(features::pre_execution_record(req, ctx.environment, ctx.versionId), *schema_);
    return model_->predict_proba(row);
  }

  bool enabled() const noexcept { return model_ != nullptr; }

 private:
  const classifier::ForestModel* model_;
  const features::FeatureSchema* schema_;
};

struct GateDecision {
  bool executed = false;
  double probability = 1.0;
  std::optional<RequestRecord> record;
};

inline GateDecision gated_execute(const generator::GeneratedRequest& req, const Gate& gate,
                                  registry::Transport& transport, const generator::ExecutionContext& ctx) {
  GateDecision d;
  d.probability = gate.score(req, ctx);
  if (d.probability >= 0.5) {
    d.executed = true;
    d.record = generator::execute_request(req, transport, ctx);
  }
  return d;
}

struct FilteredEntry {
  std::size_t index = 0;
  double probability = 0.0;
  std::optional<int> shadowStatus;
};

struct CampaignResult {
  FilterStats stats;
  std::vector<RequestRecord> executed;
  std::vector<FilteredEntry> filtered;
};

// `shadow`, if given, receives the filtered requests so false negatives can be counted.
// It must be backed by a separate service instance so the campaign's own counters stay clean.
inline CampaignResult run_filtered_campaign(const generator::RequestGenerator& gen, const Gate& gate,
                                            registry::Transport& transport, const generator::ExecutionContext& ctx,
                                            registry::Transport* shadow = nullptr) {
  CampaignResult result;
  if (shadow) result.stats.filteredButSuccessful = 0;
  for (std::size_t i = 0; i < gen.config().budget; ++i) {
    const auto req = gen.generate(i);
    auto d = gated_execute(req, gate, transport, ctx);
    ++result.stats.totalGenerated;
    if (d.executed) {
      ++result.stats.predictedSuccess;
      const int status = d.record->statusCode;
      ++result.stats.statusTallies[status];
      if (status != 200) ++result.stats.executedButFailed;
      result.executed.push_back(std::move(*d.record));
    } else {
      ++result.stats.predictedFailure;
      FilteredEntry entry{i, d.probability, std::nullopt};
      if (shadow) {
        entry.shadowStatus = shadow->send(generator::to_api_request(req, ctx)).statusCode;
        if (*entry.shadowStatus == 200) ++*result.stats.filteredButSuccessful;
      }
      result.filtered.push_back(entry);
    }
  }
  result.stats.check();
  return result;
}

inline const char* kFilterStatsCsvHeader =
    "environment,version,total_req,pred_success,pred_failure,pred_success_failure,accuracy,precision,recall,f1,"
    "cost_reduction";

inline std::string percent(const classifier::Metric& m) {
  if (!m) return "undefined";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", *m * 100.0);
  return buf;
}

// One row in the column order of the cost-reduction table.
inline std::string filter_stats_csv_row(std::string_view environment, std::string_view version, const FilterStats& s) {
  const auto e = classifier::evaluate_counts(s.confusion());
  char cr[32];
  std::snprintf(cr, sizeof cr, "%.2f", cost_reduction(s));
  return std::string(environment) + "," + std::string(version) + "," + std::to_string(s.totalGenerated) + "," +
         std::to_string(s.predictedSuccess) + "," + std::to_string(s.predictedFailure) + "," +
         std::to_string(s.executedButFailed) + "," + percent(e.accuracy) + "," + percent(e.precision) + "," +
         percent(e.recall) + "," + percent(e.f1) + "," + cr;
}

}  // namespace evoclass::gate

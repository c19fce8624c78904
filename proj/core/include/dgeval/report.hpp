#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "dgeval/alignment.hpp"
#include "dgeval/dataset.hpp"
#include "dgeval/fact_model.hpp"
#include "dgeval/stats.hpp"

namespace dgeval {

// ===== Cost estimation =====

struct PricingEntry {
  std::string model;
  std::string kind;  // "api" or "self_hosted"
  double input_per_1m = 0.0;
  double output_per_1m = 0.0;
  double hourly_rate = 0.0;
  double queries_per_hour = 0.0;

  bool operator==(const PricingEntry&) const = default;
};

struct PricingTable {
  std::vector<PricingEntry> entries;
  std::string reference;         // model reported as 1.0x
  double prompt_tokens = 200.0;  // per-query token assumptions
  double response_tokens = 500.0;

  static PricingTable load(const std::filesystem::path& path);
  const PricingEntry* find(const std::string& model) const;
};

struct CostLine {
  std::string model;
  double per_query = 0.0;
  double absolute = 0.0;
  double relative = 0.0;  // per-query cost over the reference model's

  bool operator==(const CostLine&) const = default;
};

struct CostBlock {
  std::string reference;
  std::size_t queries = 0;
  std::vector<CostLine> lines;

  bool operator==(const CostBlock&) const = default;
};

// Absolute and reference-relative cost for each listed model. Throws
// ValidationError for a model without a price entry, a missing reference
// entry, or a non-positive reference cost.
CostBlock cost_estimate(const PricingTable& pricing, const std::vector<std::string>& models,
                        std::size_t n_queries);

// ===== Report =====

struct ModelAggregate {
  std::string model;
  std::size_t records = 0;  // all EvalRecords for this model
  std::size_t alignment_records = 0;
  double recall = 0.0;  // means over scored records, as fractions
  double precision = 0.0;
  double f1 = 0.0;
  std::size_t specificity_records = 0;
  double specific_rate = 0.0;  // fraction classified specific
  std::size_t relevance_records = 0;
  double relevance = 0.0;  // mean percentage, 0-100
  std::size_t conversationality_records = 0;
  double conversationality = 0.0;  // mean overall, 1-5

  bool operator==(const ModelAggregate&) const = default;
};

struct MatrixCell {
  std::size_t count = 0;
  double f1 = 0.0;  // mean fraction; meaningless when insufficient
  bool sufficient = false;

  bool operator==(const MatrixCell&) const = default;
};

struct CropTopicMatrix {
  std::string model;
  std::size_t min_cell = 5;
  std::vector<std::string> crops;   // sorted row labels
  std::vector<std::string> topics;  // sorted column labels
  std::vector<std::vector<MatrixCell>> cells;  // [crop][topic]
  std::vector<MatrixCell> row_avg;
  std::vector<MatrixCell> col_avg;
  MatrixCell overall;

  bool operator==(const CropTopicMatrix&) const = default;
};

struct ModelStat {
  std::string model;
  std::size_t n = 0;
  double f1_mean = 0.0;
  double f1_sd = 0.0;  // sample standard deviation, 0 when n < 2

  bool operator==(const ModelStat&) const = default;
};

struct PairedComparison {
  std::string model_a;
  std::string model_b;
  std::size_t n = 0;  // shared queries with alignment scores on both sides
  double t = 0.0;
  double p = 1.0;
  bool zero_variance = false;

  bool operator==(const PairedComparison&) const = default;
};

struct StatsBlock {
  std::vector<ModelStat> models;
  std::optional<PairedComparison> paired;
  std::optional<PreferenceSummary> preference;

  bool operator==(const StatsBlock&) const = default;
};

struct ReportProvenance {
  std::string judge_model;
  std::string judge_mode;
  std::string fixture_digest;
  std::vector<std::string> warnings;

  bool operator==(const ReportProvenance&) const = default;
};

struct Report {
  std::vector<ModelAggregate> models;  // sorted by model name
  CropTopicMatrix matrix;
  std::map<std::string, ContradictionReport> contradictions;
  StatsBlock stats;
  std::optional<CostBlock> cost;
  ReportProvenance provenance;

  bool operator==(const Report&) const = default;
};

struct ReportOptions {
  std::size_t min_cell = 5;
  std::string matrix_model;  // default: first model name in sorted order
  std::string judge_model;
  std::string judge_mode;
  std::string fixture_digest;
  // When both names are set, adds the paired t comparison and (with votes)
  // the preference summary.
  std::string compare_a;
  std::string compare_b;
  std::vector<PreferenceVote> preferences;
  std::optional<PricingTable> pricing;
  std::vector<std::string> cost_models;  // default: every pricing entry
};

// Aggregates EvalRecords into a Report. Pure in the records: ordering does
// not matter, records are keyed by (model, query id) internally.
Report build_report(const std::vector<EvalRecord>& records, const Dataset& dataset,
                    const ReportOptions& options);

enum class ReportFormat { Markdown, Csv, Json };

ReportFormat report_format_from_string(const std::string& s);

// Renders with half-up rounding: percentages to 1 decimal, scores to 2.
// Insufficient matrix cells print "---". Output carries no timestamps.
std::string render_report(const Report& report, ReportFormat format);

void to_json(json& j, const PreferenceSummary& p);
void from_json(const json& j, PreferenceSummary& p);
void to_json(json& j, const Report& r);
void from_json(const json& j, Report& r);

}  // namespace dgeval

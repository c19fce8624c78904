#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "dgeval/dataset.hpp"
#include "dgeval/judge.hpp"
#include "dgeval/normalize.hpp"
#include "dgeval/report.hpp"

namespace dgeval {

struct PipelineConfig {
  std::size_t workers = 1;   // record-level parallelism
  std::filesystem::path checkpoint;  // empty disables checkpointing
  ReportOptions report;  // judge provenance fields are filled from the judge
};

struct EvalOutcome {
  std::vector<EvalRecord> records;  // sorted by query id
  Report report;
  bool partial = false;      // batch stopped early or records carry failures
  std::string stop_reason;   // set when the batch stopped on transport failure
};

// Runs the full per-query evaluation for one model: fact extraction from the
// model output, specificity / relevance / conversationality scoring, golden
// fact matching with recall / precision / F1, and contradiction screening
// against the golden facts. Per-query judge failures mark the record with
// unevaluated_* flags and the batch continues; a transport failure stops the
// batch at the checkpoint, which a rerun resumes. Requires at least one
// output for the model.
EvalOutcome evaluate(const Dataset& dataset, const std::string& model, Judge& judge,
                     const UnitTable& table, const PipelineConfig& config);

// Checkpoint helpers (JSONL of EvalRecords). Loading tolerates a missing
// file and returns an empty list.
std::vector<EvalRecord> load_checkpoint(const std::filesystem::path& path);

}  // namespace dgeval

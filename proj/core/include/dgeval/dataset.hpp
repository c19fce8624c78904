#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "dgeval/fact_model.hpp"
#include "dgeval/stats.hpp"

namespace dgeval {

struct GoldenAnswer {
  std::string query_id;
  std::string text;

  bool operator==(const GoldenAnswer&) const = default;
};

struct GoldenFactRecord {
  std::string query_id;
  AtomicFact fact;

  bool operator==(const GoldenFactRecord&) const = default;
};

struct ModelOutput {
  std::string model;
  std::string query_id;
  std::string text;

  bool operator==(const ModelOutput&) const = default;
};

struct Dataset {
  std::vector<Query> queries;
  std::vector<GoldenAnswer> answers;
  std::vector<GoldenFactRecord> golden_facts;
  std::vector<ModelOutput> outputs;

  const Query* find_query(const std::string& id) const;
  const GoldenAnswer* answer_for(const std::string& query_id) const;
  std::vector<const AtomicFact*> facts_for(const std::string& query_id) const;
  const ModelOutput* output_for(const std::string& model, const std::string& query_id) const;
  std::vector<std::string> models() const;  // sorted, unique
};

struct DatasetPaths {
  std::filesystem::path queries;       // required
  std::filesystem::path answers;       // optional
  std::filesystem::path golden_facts;  // optional
  std::filesystem::path outputs;       // optional
};

// Loads and cross-validates the JSONL dataset files. Malformed lines are
// reported with file and line number; duplicate ids and dangling query
// references are rejected.
Dataset load_dataset(const DatasetPaths& paths);

std::vector<PreferenceVote> load_preferences(const std::filesystem::path& path);

void write_golden_facts(const std::filesystem::path& path,
                        const std::vector<GoldenFactRecord>& facts);

void to_json(json& j, const GoldenAnswer& a);
void from_json(const json& j, GoldenAnswer& a);
void to_json(json& j, const GoldenFactRecord& f);
void from_json(const json& j, GoldenFactRecord& f);
void to_json(json& j, const ModelOutput& o);
void from_json(const json& j, ModelOutput& o);

struct SplitResult {
  std::vector<Query> train;
  std::vector<Query> validation;
  std::vector<Query> test;
  std::vector<std::string> warnings;
};

// Deterministic stratified three-way split. Strata come from the requested
// Query fields (crop / topic / language / region); strata smaller than the
// split count merge into an overflow stratum with a warning. The partition
// is exact, per-stratum allocations stay within one record of the stratum's
// share of each ratio, and global sizes stay within one record of the
// largest-remainder targets.
SplitResult stratified_split(const std::vector<Query>& queries,
                             const std::array<double, 3>& ratios,
                             const std::vector<std::string>& keys, std::uint64_t seed);

}  // namespace dgeval

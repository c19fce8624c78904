#pragma once

#include <string>
#include <vector>

#include "dgeval/fact_model.hpp"
#include "dgeval/normalize.hpp"

namespace dgeval {

class Judge;

// Decomposes an answer into atomic facts via the fact-generation prompt,
// snaps confidences to bands, and fills components (deterministic quantity /
// polarity plus judge-supplied slots). Fact ids are "<id_prefix>-f<n>".
// Returns an empty list for an effectively empty answer; a judge failure on
// the generation call itself propagates so the record can be marked
// unevaluated.
std::vector<AtomicFact> extract_atomic_facts(const std::string& answer, Judge& judge,
                                             const UnitTable& table,
                                             const std::string& id_prefix,
                                             Provenance provenance = Provenance::ModelOutput);

struct FactGroup {
  std::vector<AtomicFact> members;      // sorted by id
  std::size_t representative = 0;       // index into members
};

struct GroupingResult {
  std::vector<FactGroup> groups;
  bool degraded = false;  // judge unavailable; only exact-duplicate merging ran
};

// Partitions facts into semantic-equivalence groups. Exact normalized-text
// duplicates always merge (no judge involved); remaining pairs are merged on
// judge-confirmed equivalence at the match threshold. If any pair judgment
// fails, judge-based merging is abandoned for the whole call and the result
// is flagged degraded. Representative = most filled component slots, then
// longest text, then lowest id.
GroupingResult semantic_group(const std::vector<AtomicFact>& facts, Judge& judge);

// Runs the deterministic contradiction rules over all unordered pairs,
// ordered by ids so the verdict list is permutation-independent.
std::vector<ContradictionVerdict> screen_contradictions(const std::vector<AtomicFact>& facts);

// One representative per group with re-issued ids "<id_prefix>-k<n>" and a
// provenance chain (source_ids) covering every member.
std::vector<AtomicFact> finalize_facts(const std::vector<FactGroup>& groups,
                                       const std::string& id_prefix);

struct QualityThresholds {
  double confidence = 0.6;
  double completeness = 0.6;
  double actionability = 0.6;
};

// Judge-scored quality gate for synthetic facts; passed iff every dimension
// meets its threshold. Judge failures propagate (the fact stays unscored and
// the caller excludes it with the error as reason).
QualityScore score_quality(const AtomicFact& fact, Judge& judge,
                           const QualityThresholds& thresholds = {});

}  // namespace dgeval

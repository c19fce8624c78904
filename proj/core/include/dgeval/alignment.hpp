#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "dgeval/fact_model.hpp"

namespace dgeval {

class Judge;

// Matching confidence below this means no match.
inline constexpr double kMatchThreshold = 0.7;

struct MatchOutcome {
  MatchSet set;
  bool partial = false;  // at least one pair judgment failed and counted as no-match
  std::vector<std::string> errors;
};

// Scores golden x generated candidate pairs for semantic equivalence (facts
// with identical normalized text pair at confidence 1.0 without a judge
// call), drops pairs under the threshold, then resolves one-to-one greedily
// by descending confidence with (golden id, generated id) tie-breaks.
MatchOutcome match_facts(const std::vector<AtomicFact>& golden,
                         const std::vector<AtomicFact>& generated, Judge& judge);

// recall = |pairs| / golden_size, precision = |pairs| / generated_size,
// f1 via fact_model. Throws ValidationError when golden_size is zero; an
// empty generated set yields precision 0 with the degenerate flag.
AlignmentScores compute_prf(const MatchSet& m, std::size_t golden_size,
                            std::size_t generated_size);

// Ordered deterministic rule engine. Rules 1-4 require the same normalized
// non-empty subject; rules 5-7 (different method / nutrient / scale) yield no
// verdict, as does any pair with incomparable quantity dimensions. The
// returned verdict carries rule id, severity, and rationale; fact ids are
// filled in by the caller.
std::optional<ContradictionVerdict> detect_contradiction(const FactComponents& a,
                                                         const FactComponents& b);

struct ContradictionReport {
  std::size_t responses = 0;
  std::size_t flagged_responses = 0;  // >= 1 High or Medium verdict
  double per_response_rate = 0.0;
  std::size_t verdicts = 0;
  std::size_t generated_facts = 0;
  double per_fact_rate = 0.0;
  std::array<std::size_t, 3> severity_histogram{};  // indexed by Severity
  std::string caveat;

  bool operator==(const ContradictionReport&) const = default;
};

ContradictionReport contradiction_report(const std::vector<EvalRecord>& records);

void to_json(json& j, const ContradictionReport& r);
void from_json(const json& j, ContradictionReport& r);

}  // namespace dgeval

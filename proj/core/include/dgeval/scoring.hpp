#pragma once

#include <array>
#include <string>
#include <vector>

#include "dgeval/fact_model.hpp"

namespace dgeval {

class Judge;

// Pure decision rule: score = popcount; specific iff at least 2 of flags 1-6
// are true AND the actionable flag is true. No evidence attached.
AnchorResult classify_specificity(const std::array<bool, 7>& flags);

// Judge-backed anchor detection with verbatim evidence spans, classified via
// the rule above. Throws ValidationError on an empty response; judge errors
// propagate so the caller can mark the record unevaluated.
AnchorResult detect_anchors(const std::string& response, const Query& query, Judge& judge);

ConversationalityScore score_conversationality(const Query& query, const std::string& response,
                                               Judge& judge);

RelevanceScore score_relevance(const Query& query, const std::string& response,
                               const std::vector<AtomicFact>& golden_facts, Judge& judge);

}  // namespace dgeval

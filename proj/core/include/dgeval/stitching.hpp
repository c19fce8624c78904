#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "dgeval/fact_model.hpp"
#include "dgeval/normalize.hpp"

namespace dgeval {

class Judge;

// Persona settings as a key = value text file; region, greeting_style, and
// tone are well-known keys, anything else rides along into the prompt.
struct PersonaConfig {
  std::string region = "Bihar";
  std::string greeting_style = "warm";
  std::string tone = "supportive and practical";
  std::map<std::string, std::string> extra;

  static PersonaConfig load(const std::filesystem::path& path);
  std::string describe() const;
};

struct StitchResult {
  std::string text;
  int word_count = 0;
  std::vector<std::string> warnings;  // word count outside [150, 300]
};

// Composes a persona response from verified facts, ordered by confidence
// descending (ties by attribute, then id). Throws ValidationError on an
// empty fact list; out-of-bounds word counts warn rather than reject.
StitchResult stitch(const std::vector<AtomicFact>& facts, const PersonaConfig& persona,
                    const Query& query, Judge& judge);

struct FaithfulnessResult {
  bool faithful = false;
  std::vector<AtomicFact> extraneous;          // response facts with no input source
  std::vector<ContradictionVerdict> contradictions;
  double coverage = 0.0;                       // fraction of input facts recovered
  std::vector<AtomicFact> response_facts;      // what the re-extraction saw
};

// Re-extracts facts from the response and verifies every one traces to an
// input fact at the match threshold with no High or Medium contradiction.
// Extraction failure propagates as a judge error (the caller quarantines the
// response).
FaithfulnessResult verify_faithfulness(const std::vector<AtomicFact>& input_facts,
                                       const std::string& response, Judge& judge,
                                       const UnitTable& table);

}  // namespace dgeval

#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "dgeval/errors.hpp"

namespace dgeval {

using json = nlohmann::json;

// ===== Enumerations =====

enum class Polarity { Affirm, Negate, Unknown };

enum class Dimension {
  MassPerArea,    // kg/ha
  Concentration,  // ml/l (volume per volume of water)
  VolumePerArea,  // l/acre
  Temperature,    // °c
  Percentage,     // %
  Count,          // times, plants
  TimeInterval,   // days, weeks
  Length,         // cm
  Volume,         // liters
  Mass,           // kg
  Unknown,
};

enum class Provenance {
  HumanCurated,
  Document,
  Video,
  LlmSynth,
  Web,
  CrossSource,
  ModelOutput,
};

enum class Severity { High, Medium, Low };

// Confidence bands for fact reliability. Stored values snap to the band
// midpoint so averaging over facts stays well-defined.
enum class ConfidenceBand { Anecdotal, Emerging, Traditional, Accepted, Established };

std::string_view to_string(Polarity p);
std::string_view to_string(Dimension d);
std::string_view to_string(Provenance p);
std::string_view to_string(Severity s);
std::string_view to_string(ConfidenceBand b);

Polarity polarity_from_string(std::string_view s);
Dimension dimension_from_string(std::string_view s);
Provenance provenance_from_string(std::string_view s);
Severity severity_from_string(std::string_view s);
ConfidenceBand band_from_string(std::string_view s);

// Snaps a raw confidence in [0.1, 1.0] to the nearest band; returns the band
// midpoint (0.15 / 0.35 / 0.55 / 0.75 / 0.95). Throws ValidationError outside
// [0, 1]; values below 0.1 clamp up into the lowest band.
double snap_confidence(double raw);
ConfidenceBand band_of(double midpoint);
double band_midpoint(ConfidenceBand b);

// ===== Core record types =====

struct Query {
  std::string id;
  std::string text;
  std::string crop;
  std::string topic;  // pest / nutrient / irrigation / disease / harvest / free-form
  std::string language;
  std::string region;

  bool operator==(const Query&) const = default;
};

struct NumericRange {
  double lo = 0.0;
  double hi = 0.0;
  std::string unit;  // canonical form, empty when no mapping was found
  Dimension dimension = Dimension::Unknown;

  bool point() const { return lo == hi; }
  double length() const { return hi - lo; }

  bool operator==(const NumericRange&) const = default;
};

struct FactComponents {
  std::string subject;    // normalized entity (crop / pest / input), may be empty
  std::string attribute;  // property acted on (dosage, timing, method, ...)
  Polarity polarity = Polarity::Unknown;
  std::optional<NumericRange> quantity;
  std::string timing;  // normalized time expression, empty when absent
  std::string method;  // normalized practice text, empty when absent
  bool partial = false;  // deterministic slots only (judge unavailable)

  bool operator==(const FactComponents&) const = default;
};

struct AtomicFact {
  std::string id;
  std::string text;  // exactly one claim per construction contract
  FactComponents components;
  double confidence = 0.75;  // band midpoint
  ConfidenceBand band = ConfidenceBand::Accepted;
  Provenance provenance = Provenance::ModelOutput;
  std::vector<std::string> source_ids;  // provenance chain after finalization

  bool operator==(const AtomicFact&) const = default;
};

struct MatchPair {
  std::string golden_id;
  std::string generated_id;
  double confidence = 0.0;

  bool operator==(const MatchPair&) const = default;
};

struct MatchSet {
  std::vector<MatchPair> pairs;
  std::vector<std::string> unmatched_golden;
  std::vector<std::string> unmatched_generated;

  bool operator==(const MatchSet&) const = default;

  // Checks the one-to-one / partition / threshold invariants against the two
  // fact id sets this MatchSet was built from. Throws ValidationError.
  void validate(const std::vector<std::string>& golden_ids,
                const std::vector<std::string>& generated_ids) const;
};

// ===== Score types =====

inline constexpr std::array<std::string_view, 7> kAnchorNames = {
    "entity", "location", "time", "quantity", "conditional", "mechanistic", "actionable"};

struct AnchorResult {
  std::array<bool, 7> flags{};  // order follows kAnchorNames
  int score = 0;                // count of true flags
  bool specific = false;        // decision rule result
  std::map<std::string, std::vector<std::string>> evidence;  // anchor name -> verbatim spans

  bool operator==(const AnchorResult&) const = default;
};

inline constexpr std::array<std::string_view, 6> kConversationalityDims = {
    "content_quality",     "communication_style", "practical_advice",
    "safety_credibility",  "conversation_flow",   "response_format"};

struct ConversationalityScore {
  std::array<int, 6> dims{};  // each 1..5
  double overall = 0.0;       // arithmetic mean of dims
  std::array<std::string, 6> rationales{};

  bool operator==(const ConversationalityScore&) const = default;
};

inline constexpr std::array<std::string_view, 5> kRelevanceDims = {
    "direct_relevance", "ground_truth_consistency", "practical_implementation",
    "specificity", "agricultural_soundness"};

struct RelevanceScore {
  std::array<int, 5> dims{};  // each 1..10
  double overall = 0.0;       // mean of dims
  double percentage = 0.0;    // overall / 10 * 100
  std::vector<std::string> gaps;
  std::string farmer_applicability;

  bool operator==(const RelevanceScore&) const = default;
};

// HIGH >= 80%, MED 50-79%, LOW < 50%.
std::string_view relevance_band(double percentage);

struct QualityScore {
  double confidence = 0.0;
  double completeness = 0.0;
  double actionability = 0.0;
  bool passed = false;

  bool operator==(const QualityScore&) const = default;
};

struct ContradictionVerdict {
  std::string golden_id;
  std::string generated_id;
  int rule_id = 0;  // 1..7
  Severity severity = Severity::Low;
  std::string rationale;

  bool operator==(const ContradictionVerdict&) const = default;
};

struct AlignmentScores {
  double recall = 0.0;
  double precision = 0.0;
  double f1 = 0.0;
  std::size_t golden_count = 0;
  std::size_t generated_count = 0;
  bool degenerate = false;  // empty generated set (or f1 defined-as-zero case)

  bool operator==(const AlignmentScores&) const = default;
};

struct EvalRecord {
  std::string query_id;
  std::string model;
  std::optional<AnchorResult> specificity;
  std::optional<RelevanceScore> relevance;
  std::optional<ConversationalityScore> conversationality;
  std::optional<AlignmentScores> alignment;
  std::vector<ContradictionVerdict> contradictions;
  std::vector<std::string> flags;  // partial, unevaluated_*, degenerate, ...

  bool operator==(const EvalRecord&) const = default;

  bool has_flag(std::string_view f) const;
  void add_flag(std::string str);

  // Enforces the cross-field invariants (f1 relation, overall = mean(dims),
  // evidence spans, score = popcount). Throws ValidationError.
  void validate() const;
};

// ===== Operations =====

// Harmonic mean of recall and precision; 0 when both are 0.
// Throws ValidationError when either input is outside [0, 1].
double f1(double recall, double precision);

// ===== JSON line-record serialization =====

void to_json(json& j, const Query& q);
void from_json(const json& j, Query& q);
void to_json(json& j, const NumericRange& r);
void from_json(const json& j, NumericRange& r);
void to_json(json& j, const FactComponents& c);
void from_json(const json& j, FactComponents& c);
void to_json(json& j, const AtomicFact& f);
void from_json(const json& j, AtomicFact& f);
void to_json(json& j, const MatchPair& p);
void from_json(const json& j, MatchPair& p);
void to_json(json& j, const MatchSet& m);
void from_json(const json& j, MatchSet& m);
void to_json(json& j, const AnchorResult& a);
void from_json(const json& j, AnchorResult& a);
void to_json(json& j, const ConversationalityScore& c);
void from_json(const json& j, ConversationalityScore& c);
void to_json(json& j, const RelevanceScore& r);
void from_json(const json& j, RelevanceScore& r);
void to_json(json& j, const QualityScore& q);
void from_json(const json& j, QualityScore& q);
void to_json(json& j, const ContradictionVerdict& v);
void from_json(const json& j, ContradictionVerdict& v);
void to_json(json& j, const AlignmentScores& a);
void from_json(const json& j, AlignmentScores& a);
void to_json(json& j, const EvalRecord& r);
void from_json(const json& j, EvalRecord& r);

}  // namespace dgeval

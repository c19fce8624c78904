#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "dgeval/fact_model.hpp"

namespace dgeval {

class Judge;

// Lowercases, folds a small set of unicode punctuation (dashes, curly quotes,
// non-breaking space), collapses whitespace runs, and trims outer punctuation.
// Total and idempotent.
std::string normalize_text(std::string_view raw);

struct UnitMapping {
  std::string canonical;
  Dimension dimension = Dimension::Unknown;

  bool operator==(const UnitMapping&) const = default;
};

// Surface unit phrase -> (canonical unit, dimension). Lookup is
// case-insensitive via normalize_text. Loaded from a tab-separated data file:
//   surface-phrase <TAB> canonical <TAB> dimension
class UnitTable {
 public:
  static UnitTable load(const std::filesystem::path& path);

  // Throws ValidationError when the canonical unit already maps to a
  // different dimension elsewhere in the table.
  void add(std::string_view surface, std::string_view canonical, Dimension dimension);

  std::optional<UnitMapping> lookup(std::string_view phrase) const;

  std::size_t size() const { return by_surface_.size(); }
  const std::map<std::string, UnitMapping>& entries() const { return by_surface_; }

 private:
  std::map<std::string, UnitMapping> by_surface_;
  std::map<std::string, Dimension> canonical_dimension_;
};

// Extracts the first numeric value or range from a fact text. Prefers the
// first number whose trailing unit phrase resolves through the table; when no
// number has a known unit, the first number is returned with the raw unit
// phrase and dimension "unknown". Returns nullopt when the text has no
// numeric token.
std::optional<NumericRange> parse_numeric_range(std::string_view text, const UnitTable& table);

// Overlap fraction |a ∩ b| / min(|a|, |b|) with containment semantics for
// point ranges. Returns nullopt (incomparable) when dimensions differ, either
// dimension is unknown, or the canonical units differ within a dimension
// (no unit conversion is attempted).
std::optional<double> range_overlap_fraction(const NumericRange& a, const NumericRange& b);

// Lexicon-based polarity cue detection over normalized text. Negation phrases
// win over action verbs; no cue yields Unknown.
Polarity detect_polarity(std::string_view normalized_text);

// Fills quantity and polarity deterministically via the rules above, then asks
// the judge for subject / attribute / timing / method. A judge failure leaves
// those slots empty and sets the partial flag.
FactComponents decompose_components(const AtomicFact& fact, Judge& judge,
                                    const UnitTable& table);

// Whitespace-and-punctuation word split of normalized text, used by matching
// heuristics and the faithfulness gate.
std::vector<std::string> tokenize(std::string_view normalized_text);

}  // namespace dgeval

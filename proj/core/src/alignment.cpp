#include "dgeval/alignment.hpp"

#include <algorithm>
#include <set>

#include <fmt/format.h>

#include "dgeval/judge.hpp"
#include "dgeval/normalize.hpp"

namespace dgeval {

// ===== Matching =====

MatchOutcome match_facts(const std::vector<AtomicFact>& golden,
                         const std::vector<AtomicFact>& generated, Judge& judge) {
  struct Candidate {
    std::size_t g = 0;  // golden index
    std::size_t r = 0;  // generated index
    double confidence = 0.0;
  };

  std::vector<std::string> golden_norm(golden.size());
  for (std::size_t i = 0; i < golden.size(); ++i) golden_norm[i] = normalize_text(golden[i].text);
  std::vector<std::string> generated_norm(generated.size());
  for (std::size_t i = 0; i < generated.size(); ++i) {
    generated_norm[i] = normalize_text(generated[i].text);
  }

  MatchOutcome outcome;
  std::vector<Candidate> candidates;
  std::vector<std::map<std::string, std::string>> judge_bindings;
  std::vector<std::pair<std::size_t, std::size_t>> judge_pairs;

  for (std::size_t g = 0; g < golden.size(); ++g) {
    for (std::size_t r = 0; r < generated.size(); ++r) {
      if (golden_norm[g] == generated_norm[r]) {
        candidates.push_back({g, r, 1.0});
        continue;
      }
      judge_bindings.push_back({{"reference_fact", golden[g].text},
                                {"candidate_fact", generated[r].text}});
      judge_pairs.emplace_back(g, r);
    }
  }

  if (!judge_bindings.empty()) {
    auto results = judge.complete_many(get_template(TemplateId::FactMatching), judge_bindings);
    for (std::size_t i = 0; i < results.size(); ++i) {
      const auto& [g, r] = judge_pairs[i];
      if (!results[i].response) {
        // A failed pair judgment counts as no-match and taints the record.
        outcome.partial = true;
        outcome.errors.push_back(fmt::format("pair ({}, {}): {}", golden[g].id,
                                             generated[r].id, results[i].error));
        continue;
      }
      const auto& data = results[i].response->data;
      if (!data.value("match", false)) continue;
      double conf = data.value("confidence", 0.0);
      if (conf < kMatchThreshold) continue;
      candidates.push_back({g, r, conf});
    }
  }

  std::sort(candidates.begin(), candidates.end(), [&](const Candidate& a, const Candidate& b) {
    if (a.confidence != b.confidence) return a.confidence > b.confidence;
    if (golden[a.g].id != golden[b.g].id) return golden[a.g].id < golden[b.g].id;
    return generated[a.r].id < generated[b.r].id;
  });

  std::vector<bool> golden_used(golden.size(), false);
  std::vector<bool> generated_used(generated.size(), false);
  for (const auto& c : candidates) {
    if (golden_used[c.g] || generated_used[c.r]) continue;
    golden_used[c.g] = true;
    generated_used[c.r] = true;
    outcome.set.pairs.push_back({golden[c.g].id, generated[c.r].id, c.confidence});
  }
  std::sort(outcome.set.pairs.begin(), outcome.set.pairs.end(),
            [](const MatchPair& a, const MatchPair& b) { return a.golden_id < b.golden_id; });

  for (std::size_t g = 0; g < golden.size(); ++g) {
    if (!golden_used[g]) outcome.set.unmatched_golden.push_back(golden[g].id);
  }
  for (std::size_t r = 0; r < generated.size(); ++r) {
    if (!generated_used[r]) outcome.set.unmatched_generated.push_back(generated[r].id);
  }
  std::sort(outcome.set.unmatched_golden.begin(), outcome.set.unmatched_golden.end());
  std::sort(outcome.set.unmatched_generated.begin(), outcome.set.unmatched_generated.end());
  return outcome;
}

AlignmentScores compute_prf(const MatchSet& m, std::size_t golden_size,
                            std::size_t generated_size) {
  if (golden_size == 0) {
    throw ValidationError("cannot compute recall against zero golden facts");
  }
  AlignmentScores s;
  s.golden_count = golden_size;
  s.generated_count = generated_size;
  double pairs = static_cast<double>(m.pairs.size());
  s.recall = pairs / static_cast<double>(golden_size);
  if (generated_size == 0) {
    s.precision = 0.0;
    s.degenerate = true;
  } else {
    s.precision = pairs / static_cast<double>(generated_size);
  }
  s.f1 = f1(s.recall, s.precision);
  if (s.recall + s.precision == 0.0) s.degenerate = true;
  return s;
}

// ===== Contradiction rules =====

namespace {

bool has_absolute_marker(const std::string& s) {
  return s.find("always") != std::string::npos || s.find("never") != std::string::npos;
}

double token_jaccard(const std::string& a, const std::string& b) {
  auto ta = tokenize(a);
  auto tb = tokenize(b);
  std::set<std::string> sa(ta.begin(), ta.end());
  std::set<std::string> sb(tb.begin(), tb.end());
  if (sa.empty() && sb.empty()) return 0.0;
  std::size_t inter = 0;
  for (const auto& t : sa) inter += sb.count(t);
  return static_cast<double>(inter) / static_cast<double>(sa.size() + sb.size() - inter);
}

bool opposite_polarity(const FactComponents& a, const FactComponents& b) {
  return (a.polarity == Polarity::Affirm && b.polarity == Polarity::Negate) ||
         (a.polarity == Polarity::Negate && b.polarity == Polarity::Affirm);
}

std::string combined_context(const FactComponents& c) {
  std::string out = c.attribute;
  if (!c.method.empty()) out += " " + c.method;
  if (!c.timing.empty()) out += " " + c.timing;
  return out;
}

}  // namespace

std::optional<ContradictionVerdict> detect_contradiction(const FactComponents& a,
                                                         const FactComponents& b) {
  // Rules 1-4 only apply to the same normalized entity; differing or missing
  // subjects fall through to the explicit not-a-contradiction rules (5-7):
  // different methods for the same goal, different nutrients, and different
  // operating scales all compare distinct subjects or practices.
  if (a.subject.empty() || b.subject.empty() || a.subject != b.subject) {
    return std::nullopt;
  }

  // Facts pinned to different explicit timings describe different events
  // (first vs second dose), not a conflict about one event.
  bool timing_disjoint = !a.timing.empty() && !b.timing.empty() && a.timing != b.timing;

  bool same_attribute = !a.attribute.empty() && a.attribute == b.attribute;

  // Rule 1: opposite polarity on the same property.
  if (same_attribute && !timing_disjoint && opposite_polarity(a, b)) {
    return ContradictionVerdict{
        "", "", 1, Severity::High,
        fmt::format("opposite polarity on '{}' for subject '{}'", a.attribute, a.subject)};
  }

  // Rule 2: conflicting quantities for the same subject. Incomparable
  // dimensions or units never contradict.
  if (!timing_disjoint && a.quantity && b.quantity) {
    auto overlap = range_overlap_fraction(*a.quantity, *b.quantity);
    if (overlap) {
      auto show = [](const NumericRange& r) {
        return r.point() ? fmt::format("{:g} {}", r.lo, r.unit)
                         : fmt::format("{:g}-{:g} {}", r.lo, r.hi, r.unit);
      };
      std::string lo_side = std::min(show(*a.quantity), show(*b.quantity));
      std::string hi_side = std::max(show(*a.quantity), show(*b.quantity));
      if (*overlap == 0.0) {
        // Disjoint ranges, including point values over 2x apart (a 10x
        // dosage error lands here).
        return ContradictionVerdict{
            "", "", 2, Severity::High,
            fmt::format("disjoint quantities for '{}': {} vs {}", a.subject, lo_side,
                        hi_side)};
      }
      if (*overlap < 0.5) {
        return ContradictionVerdict{
            "", "", 2, Severity::Medium,
            fmt::format("quantities for '{}' overlap under 50%: {} vs {}", a.subject,
                        lo_side, hi_side)};
      }
    }
  }

  // Rule 3: an absolute claim (always / never) against a qualified one on the
  // same property. Direct polarity opposites were already caught by rule 1.
  if (same_attribute && timing_disjoint &&
      (has_absolute_marker(a.timing) || has_absolute_marker(b.timing) ||
       has_absolute_marker(a.method) || has_absolute_marker(b.method))) {
    return ContradictionVerdict{
        "", "", 3, Severity::Medium,
        fmt::format("absolute vs qualified claim on '{}' for subject '{}'", a.attribute,
                    a.subject)};
  }

  // Rule 4: direct opposites phrased across attribute / method / timing,
  // caught by opposite polarity plus high lexical overlap.
  if (!timing_disjoint && opposite_polarity(a, b)) {
    double jaccard = token_jaccard(combined_context(a), combined_context(b));
    if (jaccard >= 0.5) {
      return ContradictionVerdict{
          "", "", 4, Severity::High,
          fmt::format("directly opposing claims about subject '{}'", a.subject)};
    }
  }

  // Rules 5-7: different method for the same goal, different nutrients,
  // different scale. None of these contradict.
  return std::nullopt;
}

ContradictionReport contradiction_report(const std::vector<EvalRecord>& records) {
  ContradictionReport report;
  report.responses = records.size();
  for (const auto& rec : records) {
    bool flagged = false;
    for (const auto& v : rec.contradictions) {
      ++report.verdicts;
      ++report.severity_histogram[static_cast<std::size_t>(v.severity)];
      if (v.severity == Severity::High || v.severity == Severity::Medium) flagged = true;
    }
    if (flagged) ++report.flagged_responses;
    if (rec.alignment) report.generated_facts += rec.alignment->generated_count;
  }
  if (report.responses > 0) {
    report.per_response_rate =
        static_cast<double>(report.flagged_responses) / static_cast<double>(report.responses);
  }
  if (report.generated_facts > 0) {
    report.per_fact_rate =
        static_cast<double>(report.verdicts) / static_cast<double>(report.generated_facts);
  }
  report.caveat =
      "per-response and per-fact rates are not comparable across models that "
      "generate different fact counts; the per-fact rate normalizes by generated "
      "fact volume";
  return report;
}

void to_json(json& j, const ContradictionReport& r) {
  j = json{{"responses", r.responses},
           {"flagged_responses", r.flagged_responses},
           {"per_response_rate", r.per_response_rate},
           {"verdicts", r.verdicts},
           {"generated_facts", r.generated_facts},
           {"per_fact_rate", r.per_fact_rate},
           {"severity_histogram",
            {{"high", r.severity_histogram[0]},
             {"medium", r.severity_histogram[1]},
             {"low", r.severity_histogram[2]}}},
           {"caveat", r.caveat}};
}

void from_json(const json& j, ContradictionReport& r) {
  r.responses = j.at("responses").get<std::size_t>();
  r.flagged_responses = j.at("flagged_responses").get<std::size_t>();
  r.per_response_rate = j.at("per_response_rate").get<double>();
  r.verdicts = j.at("verdicts").get<std::size_t>();
  r.generated_facts = j.at("generated_facts").get<std::size_t>();
  r.per_fact_rate = j.at("per_fact_rate").get<double>();
  r.severity_histogram[0] = j.at("severity_histogram").at("high").get<std::size_t>();
  r.severity_histogram[1] = j.at("severity_histogram").at("medium").get<std::size_t>();
  r.severity_histogram[2] = j.at("severity_histogram").at("low").get<std::size_t>();
  r.caveat = j.value("caveat", "");
}

}  // namespace dgeval

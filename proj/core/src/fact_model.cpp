#include "dgeval/fact_model.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include <fmt/format.h>

namespace dgeval {

namespace {

template <typename E, std::size_t N>
E parse_enum(std::string_view s, const std::array<std::pair<std::string_view, E>, N>& table,
             std::string_view what) {
  for (const auto& [name, value] : table) {
    if (s == name) return value;
  }
  throw ValidationError(fmt::format("unknown {}: '{}'", what, s));
}

constexpr std::array<std::pair<std::string_view, Polarity>, 3> kPolarityNames = {{
    {"affirm", Polarity::Affirm},
    {"negate", Polarity::Negate},
    {"unknown", Polarity::Unknown},
}};

constexpr std::array<std::pair<std::string_view, Dimension>, 11> kDimensionNames = {{
    {"mass-per-area", Dimension::MassPerArea},
    {"volume-per-volume-concentration", Dimension::Concentration},
    {"volume-per-area", Dimension::VolumePerArea},
    {"temperature", Dimension::Temperature},
    {"percentage", Dimension::Percentage},
    {"count", Dimension::Count},
    {"time-interval", Dimension::TimeInterval},
    {"length", Dimension::Length},
    {"volume", Dimension::Volume},
    {"mass", Dimension::Mass},
    {"unknown", Dimension::Unknown},
}};

constexpr std::array<std::pair<std::string_view, Provenance>, 7> kProvenanceNames = {{
    {"human-curated", Provenance::HumanCurated},
    {"document", Provenance::Document},
    {"video", Provenance::Video},
    {"llm-synth", Provenance::LlmSynth},
    {"web", Provenance::Web},
    {"cross-source", Provenance::CrossSource},
    {"model-output", Provenance::ModelOutput},
}};

constexpr std::array<std::pair<std::string_view, Severity>, 3> kSeverityNames = {{
    {"high", Severity::High},
    {"medium", Severity::Medium},
    {"low", Severity::Low},
}};

constexpr std::array<std::pair<std::string_view, ConfidenceBand>, 5> kBandNames = {{
    {"anecdotal", ConfidenceBand::Anecdotal},
    {"emerging", ConfidenceBand::Emerging},
    {"traditional", ConfidenceBand::Traditional},
    {"accepted", ConfidenceBand::Accepted},
    {"established", ConfidenceBand::Established},
}};

constexpr std::array<double, 5> kBandMidpoints = {0.15, 0.35, 0.55, 0.75, 0.95};

}  // namespace

std::string_view to_string(Polarity p) {
  return kPolarityNames[static_cast<std::size_t>(p)].first;
}
std::string_view to_string(Dimension d) {
  return kDimensionNames[static_cast<std::size_t>(d)].first;
}
std::string_view to_string(Provenance p) {
  return kProvenanceNames[static_cast<std::size_t>(p)].first;
}
std::string_view to_string(Severity s) {
  return kSeverityNames[static_cast<std::size_t>(s)].first;
}
std::string_view to_string(ConfidenceBand b) {
  return kBandNames[static_cast<std::size_t>(b)].first;
}

Polarity polarity_from_string(std::string_view s) {
  return parse_enum(s, kPolarityNames, "polarity");
}
Dimension dimension_from_string(std::string_view s) {
  return parse_enum(s, kDimensionNames, "dimension");
}
Provenance provenance_from_string(std::string_view s) {
  return parse_enum(s, kProvenanceNames, "provenance");
}
Severity severity_from_string(std::string_view s) {
  return parse_enum(s, kSeverityNames, "severity");
}
ConfidenceBand band_from_string(std::string_view s) {
  return parse_enum(s, kBandNames, "confidence band");
}

double snap_confidence(double raw) {
  if (!(raw >= 0.0 && raw <= 1.0)) {
    throw ValidationError(fmt::format("confidence {} outside [0, 1]", raw));
  }
  // Bands sit at 0.1-0.2, 0.3-0.4, ..., 0.9-1.0; nearest midpoint wins and
  // gap values round half-up into the higher band. Compared by distance
  // rather than via floor((raw - 0.15) / 0.2 + 0.5): that expression lands at
  // 3.9999999999999996 for raw = 0.85 and misrounds the gap value down.
  std::size_t best = 0;
  double best_dist = std::abs(raw - kBandMidpoints[0]);
  for (std::size_t i = 1; i < kBandMidpoints.size(); ++i) {
    double dist = std::abs(raw - kBandMidpoints[i]);
    if (dist <= best_dist) {
      best = i;
      best_dist = dist;
    }
  }
  return kBandMidpoints[best];
}

ConfidenceBand band_of(double midpoint) {
  for (std::size_t i = 0; i < kBandMidpoints.size(); ++i) {
    if (std::abs(midpoint - kBandMidpoints[i]) < 1e-9) {
      return static_cast<ConfidenceBand>(i);
    }
  }
  // Not a midpoint: snap first.
  return band_of(snap_confidence(midpoint));
}

double band_midpoint(ConfidenceBand b) { return kBandMidpoints[static_cast<std::size_t>(b)]; }

std::string_view relevance_band(double percentage) {
  if (percentage >= 80.0) return "HIGH";
  if (percentage >= 50.0) return "MED";
  return "LOW";
}

double f1(double recall, double precision) {
  if (!(recall >= 0.0 && recall <= 1.0)) {
    throw ValidationError(fmt::format("recall {} outside [0, 1]", recall));
  }
  if (!(precision >= 0.0 && precision <= 1.0)) {
    throw ValidationError(fmt::format("precision {} outside [0, 1]", precision));
  }
  double sum = recall + precision;
  if (sum == 0.0) return 0.0;
  return 2.0 * recall * precision / sum;
}

void MatchSet::validate(const std::vector<std::string>& golden_ids,
                        const std::vector<std::string>& generated_ids) const {
  std::set<std::string> golden_seen;
  std::set<std::string> generated_seen;
  for (const auto& p : pairs) {
    if (p.confidence < 0.7 || p.confidence > 1.0) {
      throw ValidationError(
          fmt::format("pair ({}, {}) confidence {} outside [0.7, 1]", p.golden_id,
                      p.generated_id, p.confidence));
    }
    if (!golden_seen.insert(p.golden_id).second) {
      throw ValidationError(fmt::format("golden id '{}' appears in two pairs", p.golden_id));
    }
    if (!generated_seen.insert(p.generated_id).second) {
      throw ValidationError(
          fmt::format("generated id '{}' appears in two pairs", p.generated_id));
    }
  }
  auto check_partition = [](const std::set<std::string>& matched,
                            const std::vector<std::string>& unmatched,
                            const std::vector<std::string>& all, std::string_view side) {
    std::set<std::string> covered = matched;
    for (const auto& id : unmatched) {
      if (!covered.insert(id).second) {
        throw ValidationError(fmt::format("{} id '{}' both matched and unmatched", side, id));
      }
    }
    std::set<std::string> expected(all.begin(), all.end());
    if (covered != expected) {
      throw ValidationError(fmt::format("{} ids do not partition the fact set", side));
    }
  };
  check_partition(golden_seen, unmatched_golden, golden_ids, "golden");
  check_partition(generated_seen, unmatched_generated, generated_ids, "generated");
}

bool EvalRecord::has_flag(std::string_view f) const {
  return std::find(flags.begin(), flags.end(), f) != flags.end();
}

void EvalRecord::add_flag(std::string f) {
  if (!has_flag(f)) flags.push_back(std::move(f));
}

void EvalRecord::validate() const {
  if (query_id.empty()) throw ValidationError("EvalRecord without query_id");
  if (alignment) {
    const auto& a = *alignment;
    double expect = f1(a.recall, a.precision);
    if (std::abs(a.f1 - expect) > 1e-9) {
      throw ValidationError(fmt::format("record {}: f1 {} != harmonic mean {}", query_id,
                                        a.f1, expect));
    }
    if (a.recall + a.precision > 0.0) {
      double lo = std::min(a.recall, a.precision);
      double hi = std::max(a.recall, a.precision);
      if (a.f1 < lo - 1e-9 || a.f1 > hi + 1e-9) {
        throw ValidationError(fmt::format("record {}: f1 outside [min, max]", query_id));
      }
    }
  }
  if (specificity) {
    const auto& s = *specificity;
    int count = static_cast<int>(std::count(s.flags.begin(), s.flags.end(), true));
    if (s.score != count) {
      throw ValidationError(fmt::format("record {}: anchor score {} != popcount {}", query_id,
                                        s.score, count));
    }
  }
  if (conversationality) {
    const auto& c = *conversationality;
    double sum = 0.0;
    for (int d : c.dims) {
      if (d < 1 || d > 5) {
        throw ValidationError(fmt::format("record {}: conversationality dim {} outside 1..5",
                                          query_id, d));
      }
      sum += d;
    }
    if (std::abs(c.overall - sum / 6.0) > 1e-9) {
      throw ValidationError(
          fmt::format("record {}: conversationality overall != mean(dims)", query_id));
    }
  }
  if (relevance) {
    const auto& r = *relevance;
    double sum = 0.0;
    for (int d : r.dims) {
      if (d < 1 || d > 10) {
        throw ValidationError(
            fmt::format("record {}: relevance dim {} outside 1..10", query_id, d));
      }
      sum += d;
    }
    if (std::abs(r.overall - sum / 5.0) > 1e-9 ||
        std::abs(r.percentage - r.overall * 10.0) > 1e-9) {
      throw ValidationError(
          fmt::format("record {}: relevance overall/percentage inconsistent", query_id));
    }
  }
  for (const auto& v : contradictions) {
    if (v.rule_id < 1 || v.rule_id > 7) {
      throw ValidationError(fmt::format("record {}: contradiction rule id {}", query_id,
                                        v.rule_id));
    }
  }
}

// ===== JSON =====

namespace {

std::string get_string(const json& j, const char* key) {
  if (!j.contains(key) || !j.at(key).is_string()) {
    throw ValidationError(fmt::format("missing or non-string field '{}'", key));
  }
  return j.at(key).get<std::string>();
}

}  // namespace

void to_json(json& j, const Query& q) {
  j = json{{"id", q.id},       {"text", q.text},         {"crop", q.crop},
           {"topic", q.topic}, {"language", q.language}, {"region", q.region}};
}

void from_json(const json& j, Query& q) {
  q.id = get_string(j, "id");
  q.text = get_string(j, "text");
  q.crop = j.value("crop", "");
  q.topic = j.value("topic", "");
  q.language = j.value("language", "");
  q.region = j.value("region", "");
}

void to_json(json& j, const NumericRange& r) {
  j = json{{"lo", r.lo},
           {"hi", r.hi},
           {"unit", r.unit},
           {"dimension", std::string(to_string(r.dimension))}};
}

void from_json(const json& j, NumericRange& r) {
  r.lo = j.at("lo").get<double>();
  r.hi = j.at("hi").get<double>();
  if (r.lo > r.hi) throw ValidationError("numeric range with lo > hi");
  r.unit = j.value("unit", "");
  r.dimension = dimension_from_string(j.value("dimension", "unknown"));
}

void to_json(json& j, const FactComponents& c) {
  j = json{{"subject", c.subject},
           {"attribute", c.attribute},
           {"polarity", std::string(to_string(c.polarity))}};
  if (c.quantity) j["quantity"] = *c.quantity;
  if (!c.timing.empty()) j["timing"] = c.timing;
  if (!c.method.empty()) j["method"] = c.method;
  if (c.partial) j["partial"] = true;
}

void from_json(const json& j, FactComponents& c) {
  c.subject = j.value("subject", "");
  c.attribute = j.value("attribute", "");
  c.polarity = polarity_from_string(j.value("polarity", "unknown"));
  if (j.contains("quantity") && !j.at("quantity").is_null()) {
    c.quantity = j.at("quantity").get<NumericRange>();
  } else {
    c.quantity.reset();
  }
  c.timing = j.value("timing", "");
  c.method = j.value("method", "");
  c.partial = j.value("partial", false);
}

void to_json(json& j, const AtomicFact& f) {
  j = json{{"id", f.id},
           {"text", f.text},
           {"components", f.components},
           {"confidence", f.confidence},
           {"band", std::string(to_string(f.band))},
           {"provenance", std::string(to_string(f.provenance))}};
  if (!f.source_ids.empty()) j["source_ids"] = f.source_ids;
}

void from_json(const json& j, AtomicFact& f) {
  f.id = get_string(j, "id");
  f.text = get_string(j, "text");
  if (f.text.empty()) throw ValidationError(fmt::format("fact '{}' has empty text", f.id));
  if (j.contains("components")) f.components = j.at("components").get<FactComponents>();
  double raw = j.value("confidence", 0.75);
  f.confidence = snap_confidence(raw);
  // Band follows the stored midpoint; an explicit band field must agree.
  f.band = band_of(f.confidence);
  if (j.contains("band")) {
    auto declared = band_from_string(j.at("band").get<std::string>());
    if (declared != f.band) {
      throw ValidationError(
          fmt::format("fact '{}': band '{}' disagrees with confidence {}", f.id,
                      j.at("band").get<std::string>(), f.confidence));
    }
  }
  f.provenance = provenance_from_string(j.value("provenance", "model-output"));
  f.source_ids = j.value("source_ids", std::vector<std::string>{});
}

void to_json(json& j, const MatchPair& p) {
  j = json{{"golden_id", p.golden_id},
           {"generated_id", p.generated_id},
           {"confidence", p.confidence}};
}

void from_json(const json& j, MatchPair& p) {
  p.golden_id = get_string(j, "golden_id");
  p.generated_id = get_string(j, "generated_id");
  p.confidence = j.at("confidence").get<double>();
}

void to_json(json& j, const MatchSet& m) {
  j = json{{"pairs", m.pairs},
           {"unmatched_golden", m.unmatched_golden},
           {"unmatched_generated", m.unmatched_generated}};
}

void from_json(const json& j, MatchSet& m) {
  m.pairs = j.value("pairs", std::vector<MatchPair>{});
  m.unmatched_golden = j.value("unmatched_golden", std::vector<std::string>{});
  m.unmatched_generated = j.value("unmatched_generated", std::vector<std::string>{});
}

void to_json(json& j, const AnchorResult& a) {
  json flags = json::object();
  for (std::size_t i = 0; i < kAnchorNames.size(); ++i) {
    flags[std::string(kAnchorNames[i])] = a.flags[i];
  }
  j = json{{"flags", flags},
           {"score", a.score},
           {"classification", a.specific ? "specific" : "not_specific"}};
  json ev = json::object();
  for (const auto& [name, spans] : a.evidence) ev[name] = spans;
  j["evidence"] = ev;
}

void from_json(const json& j, AnchorResult& a) {
  const auto& flags = j.at("flags");
  for (std::size_t i = 0; i < kAnchorNames.size(); ++i) {
    a.flags[i] = flags.value(std::string(kAnchorNames[i]), false);
  }
  a.score = j.at("score").get<int>();
  a.specific = j.at("classification").get<std::string>() == "specific";
  a.evidence.clear();
  if (j.contains("evidence")) {
    for (const auto& [name, spans] : j.at("evidence").items()) {
      a.evidence[name] = spans.get<std::vector<std::string>>();
    }
  }
}

void to_json(json& j, const ConversationalityScore& c) {
  json dims = json::object();
  json rationales = json::object();
  for (std::size_t i = 0; i < kConversationalityDims.size(); ++i) {
    dims[std::string(kConversationalityDims[i])] = c.dims[i];
    if (!c.rationales[i].empty()) {
      rationales[std::string(kConversationalityDims[i])] = c.rationales[i];
    }
  }
  j = json{{"dims", dims}, {"overall", c.overall}};
  if (!rationales.empty()) j["rationales"] = rationales;
}

void from_json(const json& j, ConversationalityScore& c) {
  const auto& dims = j.at("dims");
  for (std::size_t i = 0; i < kConversationalityDims.size(); ++i) {
    c.dims[i] = dims.at(std::string(kConversationalityDims[i])).get<int>();
  }
  c.overall = j.at("overall").get<double>();
  c.rationales = {};
  if (j.contains("rationales")) {
    for (std::size_t i = 0; i < kConversationalityDims.size(); ++i) {
      c.rationales[i] = j.at("rationales").value(std::string(kConversationalityDims[i]), "");
    }
  }
}

void to_json(json& j, const RelevanceScore& r) {
  json dims = json::object();
  for (std::size_t i = 0; i < kRelevanceDims.size(); ++i) {
    dims[std::string(kRelevanceDims[i])] = r.dims[i];
  }
  j = json{{"dims", dims},
           {"overall", r.overall},
           {"percentage", r.percentage},
           {"gaps", r.gaps},
           {"farmer_applicability", r.farmer_applicability}};
}

void from_json(const json& j, RelevanceScore& r) {
  const auto& dims = j.at("dims");
  for (std::size_t i = 0; i < kRelevanceDims.size(); ++i) {
    r.dims[i] = dims.at(std::string(kRelevanceDims[i])).get<int>();
  }
  r.overall = j.at("overall").get<double>();
  r.percentage = j.at("percentage").get<double>();
  r.gaps = j.value("gaps", std::vector<std::string>{});
  r.farmer_applicability = j.value("farmer_applicability", "");
}

void to_json(json& j, const QualityScore& q) {
  j = json{{"confidence", q.confidence},
           {"completeness", q.completeness},
           {"actionability", q.actionability},
           {"passed", q.passed}};
}

void from_json(const json& j, QualityScore& q) {
  q.confidence = j.at("confidence").get<double>();
  q.completeness = j.at("completeness").get<double>();
  q.actionability = j.at("actionability").get<double>();
  q.passed = j.at("passed").get<bool>();
}

void to_json(json& j, const ContradictionVerdict& v) {
  j = json{{"golden_id", v.golden_id},
           {"generated_id", v.generated_id},
           {"rule_id", v.rule_id},
           {"severity", std::string(to_string(v.severity))},
           {"rationale", v.rationale}};
}

void from_json(const json& j, ContradictionVerdict& v) {
  v.golden_id = j.value("golden_id", "");
  v.generated_id = j.value("generated_id", "");
  v.rule_id = j.at("rule_id").get<int>();
  v.severity = severity_from_string(j.at("severity").get<std::string>());
  v.rationale = j.value("rationale", "");
}

void to_json(json& j, const AlignmentScores& a) {
  j = json{{"recall", a.recall},
           {"precision", a.precision},
           {"f1", a.f1},
           {"golden_count", a.golden_count},
           {"generated_count", a.generated_count}};
  if (a.degenerate) j["degenerate"] = true;
}

void from_json(const json& j, AlignmentScores& a) {
  a.recall = j.at("recall").get<double>();
  a.precision = j.at("precision").get<double>();
  a.f1 = j.at("f1").get<double>();
  a.golden_count = j.value("golden_count", std::size_t{0});
  a.generated_count = j.value("generated_count", std::size_t{0});
  a.degenerate = j.value("degenerate", false);
}

void to_json(json& j, const EvalRecord& r) {
  j = json{{"query_id", r.query_id}, {"model", r.model}};
  if (r.specificity) j["specificity"] = *r.specificity;
  if (r.relevance) j["relevance"] = *r.relevance;
  if (r.conversationality) j["conversationality"] = *r.conversationality;
  if (r.alignment) j["alignment"] = *r.alignment;
  j["contradictions"] = r.contradictions;
  j["flags"] = r.flags;
}

void from_json(const json& j, EvalRecord& r) {
  r.query_id = get_string(j, "query_id");
  r.model = j.value("model", "");
  auto load_opt = [&j](const char* key, auto& target) {
    using T = typename std::decay_t<decltype(target)>::value_type;
    if (j.contains(key) && !j.at(key).is_null()) {
      target = j.at(key).template get<T>();
    } else {
      target.reset();
    }
  };
  load_opt("specificity", r.specificity);
  load_opt("relevance", r.relevance);
  load_opt("conversationality", r.conversationality);
  load_opt("alignment", r.alignment);
  r.contradictions = j.value("contradictions", std::vector<ContradictionVerdict>{});
  r.flags = j.value("flags", std::vector<std::string>{});
}

}  // namespace dgeval

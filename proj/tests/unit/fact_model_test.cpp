#include <random>

#include <doctest.h>

#include "dgeval/fact_model.hpp"

using namespace dgeval;

TEST_CASE("f1 is the harmonic mean with a defined zero case") {
  CHECK(f1(0.0, 0.0) == 0.0);
  CHECK(f1(1.0, 1.0) == 1.0);
  CHECK(f1(0.5, 0.5) == doctest::Approx(0.5));
  CHECK(f1(0.266, 0.622) == doctest::Approx(2 * 0.266 * 0.622 / (0.266 + 0.622)));

  CHECK_THROWS_AS(f1(-0.1, 0.5), ValidationError);
  CHECK_THROWS_AS(f1(0.5, 1.2), ValidationError);

  std::mt19937 rng(11);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int i = 0; i < 500; ++i) {
    double r = unit(rng);
    double p = unit(rng);
    double v = f1(r, p);
    CHECK(v == doctest::Approx(f1(p, r)));  // symmetric
    if (r + p > 0) {
      CHECK(v >= std::min(r, p) - 1e-12);
      CHECK(v <= std::max(r, p) + 1e-12);
    }
    CHECK(f1(r, r) == doctest::Approx(r));  // idempotent on the diagonal
  }
}

TEST_CASE("snap_confidence rounds into band midpoints") {
  CHECK(snap_confidence(0.15) == 0.15);
  CHECK(snap_confidence(0.95) == 0.95);
  CHECK(snap_confidence(0.10) == 0.15);
  CHECK(snap_confidence(0.05) == 0.15);  // clamps up into the lowest band
  CHECK(snap_confidence(0.0) == 0.15);
  CHECK(snap_confidence(1.0) == 0.95);
  CHECK(snap_confidence(0.2) == 0.15);   // below the gap midpoint
  CHECK(snap_confidence(0.25) == 0.35);  // gap value rounds half-up
  CHECK(snap_confidence(0.45) == 0.55);
  CHECK(snap_confidence(0.85) == 0.95);
  CHECK(snap_confidence(0.649) == 0.55);
  CHECK(snap_confidence(0.65) == 0.75);
  CHECK(snap_confidence(0.84) == 0.75);

  CHECK_THROWS_AS(snap_confidence(-0.01), ValidationError);
  CHECK_THROWS_AS(snap_confidence(1.01), ValidationError);
}

TEST_CASE("confidence bands and midpoints round-trip") {
  const ConfidenceBand bands[] = {ConfidenceBand::Anecdotal, ConfidenceBand::Emerging,
                                  ConfidenceBand::Traditional, ConfidenceBand::Accepted,
                                  ConfidenceBand::Established};
  for (ConfidenceBand b : bands) {
    CHECK(band_of(band_midpoint(b)) == b);
    CHECK(band_from_string(to_string(b)) == b);
  }
  CHECK(band_of(0.8) == ConfidenceBand::Accepted);  // snaps first
  CHECK(band_midpoint(ConfidenceBand::Established) == 0.95);
}

TEST_CASE("enum names round-trip and unknown names throw") {
  CHECK(polarity_from_string(to_string(Polarity::Negate)) == Polarity::Negate);
  CHECK(severity_from_string("medium") == Severity::Medium);
  CHECK(provenance_from_string("human-curated") == Provenance::HumanCurated);
  CHECK(dimension_from_string("mass-per-area") == Dimension::MassPerArea);
  CHECK(to_string(Dimension::Concentration) == "volume-per-volume-concentration");

  CHECK_THROWS_AS(polarity_from_string("maybe"), ValidationError);
  CHECK_THROWS_AS(severity_from_string("HIGH"), ValidationError);
  CHECK_THROWS_AS(dimension_from_string(""), ValidationError);
  CHECK_THROWS_AS(band_from_string("solid"), ValidationError);
  CHECK_THROWS_AS(provenance_from_string("oracle"), ValidationError);
}

TEST_CASE("relevance_band boundaries") {
  CHECK(relevance_band(100.0) == "HIGH");
  CHECK(relevance_band(80.0) == "HIGH");
  CHECK(relevance_band(79.999) == "MED");
  CHECK(relevance_band(50.0) == "MED");
  CHECK(relevance_band(49.999) == "LOW");
  CHECK(relevance_band(0.0) == "LOW");
}

namespace {

AtomicFact sample_fact() {
  AtomicFact f;
  f.id = "q1-g0";
  f.text = "Apply urea at 60 kg/ha after the first irrigation";
  f.components.subject = "urea";
  f.components.attribute = "urea dose";
  f.components.polarity = Polarity::Affirm;
  f.components.quantity = NumericRange{60, 60, "kg/ha", Dimension::MassPerArea};
  f.components.timing = "after the first irrigation";
  f.confidence = 0.95;
  f.band = ConfidenceBand::Established;
  f.provenance = Provenance::HumanCurated;
  f.source_ids = {"q1-r0", "q1-r2"};
  return f;
}

}  // namespace

TEST_CASE("AtomicFact JSON round-trips every field") {
  AtomicFact f = sample_fact();
  json j = f;
  AtomicFact back = j.get<AtomicFact>();
  CHECK(back == f);

  // Optional slots stay optional.
  AtomicFact bare;
  bare.id = "x";
  bare.text = "minimal";
  json jb = bare;
  CHECK_FALSE(jb.contains("source_ids"));
  CHECK(jb.get<AtomicFact>() == bare);

  json broken = j;
  broken.erase("text");
  CHECK_THROWS_AS(broken.get<AtomicFact>(), ValidationError);
  broken = j;
  broken["text"] = "";
  CHECK_THROWS_AS(broken.get<AtomicFact>(), ValidationError);
}

TEST_CASE("NumericRange JSON rejects inverted bounds") {
  json j{{"lo", 5.0}, {"hi", 2.0}, {"unit", "kg"}, {"dimension", "mass"}};
  CHECK_THROWS_AS(j.get<NumericRange>(), ValidationError);
  j["hi"] = 7.0;
  NumericRange r = j.get<NumericRange>();
  CHECK(r.lo == 5.0);
  CHECK(r.hi == 7.0);
  CHECK(json(r).get<NumericRange>() == r);
}

TEST_CASE("EvalRecord JSON round-trips with all optional sections") {
  EvalRecord rec;
  rec.query_id = "q7";
  rec.model = "demo";
  AnchorResult anchors;
  anchors.flags = {true, false, true, true, false, false, true};
  anchors.score = 4;
  anchors.specific = true;
  anchors.evidence["entity"] = {"urea"};
  rec.specificity = anchors;
  RelevanceScore rel;
  rel.dims = {9, 10, 9, 8, 10};
  rel.overall = 9.2;
  rel.percentage = 92.0;
  rel.gaps = {"storage advice"};
  rel.farmer_applicability = "directly usable";
  rec.relevance = rel;
  ConversationalityScore conv;
  conv.dims = {5, 5, 4, 5, 4, 4};
  conv.overall = 27.0 / 6.0;
  rec.conversationality = conv;
  AlignmentScores al;
  al.recall = 0.75;
  al.precision = 0.6;
  al.f1 = f1(0.75, 0.6);
  al.golden_count = 4;
  al.generated_count = 5;
  rec.alignment = al;
  rec.contradictions.push_back({"q7-g1", "q7-m2", 2, Severity::High, "dose mismatch"});
  rec.flags = {"partial_match"};

  rec.validate();
  json j = rec;
  EvalRecord back = j.get<EvalRecord>();
  CHECK(back == rec);
  back.validate();

  EvalRecord sparse;
  sparse.query_id = "q1";
  sparse.model = "demo";
  json js = sparse;
  CHECK(js.get<EvalRecord>() == sparse);
}

TEST_CASE("EvalRecord flag helpers deduplicate") {
  EvalRecord rec;
  rec.add_flag("degenerate");
  rec.add_flag("degenerate");
  rec.add_flag("empty_output");
  CHECK(rec.flags == std::vector<std::string>{"degenerate", "empty_output"});
  CHECK(rec.has_flag("degenerate"));
  CHECK_FALSE(rec.has_flag("partial"));
}

TEST_CASE("EvalRecord validate catches broken invariants") {
  EvalRecord rec;
  rec.query_id = "q1";
  rec.validate();  // empty optionals are fine

  EvalRecord no_id;
  CHECK_THROWS_AS(no_id.validate(), ValidationError);

  SUBCASE("f1 must be the harmonic mean") {
    AlignmentScores al;
    al.recall = 0.5;
    al.precision = 0.5;
    al.f1 = 0.9;
    rec.alignment = al;
    CHECK_THROWS_AS(rec.validate(), ValidationError);
  }

  SUBCASE("anchor score must equal the popcount") {
    AnchorResult a;
    a.flags = {true, true, false, false, false, false, false};
    a.score = 3;
    rec.specificity = a;
    CHECK_THROWS_AS(rec.validate(), ValidationError);
  }

  SUBCASE("conversationality overall must be the dim mean") {
    ConversationalityScore c;
    c.dims = {5, 5, 5, 5, 5, 5};
    c.overall = 4.0;
    rec.conversationality = c;
    CHECK_THROWS_AS(rec.validate(), ValidationError);
  }

  SUBCASE("conversationality dims must stay in 1..5") {
    ConversationalityScore c;
    c.dims = {5, 5, 5, 5, 5, 6};
    c.overall = 31.0 / 6.0;
    rec.conversationality = c;
    CHECK_THROWS_AS(rec.validate(), ValidationError);
  }

  SUBCASE("relevance percentage must track overall") {
    RelevanceScore r;
    r.dims = {5, 5, 5, 5, 5};
    r.overall = 5.0;
    r.percentage = 70.0;
    rec.relevance = r;
    CHECK_THROWS_AS(rec.validate(), ValidationError);
  }

  SUBCASE("contradiction rule ids stay in 1..7") {
    rec.contradictions.push_back({"g", "m", 9, Severity::Low, ""});
    CHECK_THROWS_AS(rec.validate(), ValidationError);
  }
}

TEST_CASE("MatchSet validate enforces one-to-one partition invariants") {
  std::vector<std::string> golden = {"g1", "g2", "g3"};
  std::vector<std::string> generated = {"m1", "m2"};

  MatchSet ok;
  ok.pairs = {{"g1", "m2", 0.9}, {"g3", "m1", 0.7}};
  ok.unmatched_golden = {"g2"};
  ok.validate(golden, generated);

  SUBCASE("below-threshold pair confidence") {
    MatchSet m = ok;
    m.pairs[0].confidence = 0.5;
    CHECK_THROWS_AS(m.validate(golden, generated), ValidationError);
  }
  SUBCASE("golden id matched twice") {
    MatchSet m;
    m.pairs = {{"g1", "m1", 0.8}, {"g1", "m2", 0.8}};
    m.unmatched_golden = {"g2", "g3"};
    CHECK_THROWS_AS(m.validate(golden, generated), ValidationError);
  }
  SUBCASE("generated id matched twice") {
    MatchSet m;
    m.pairs = {{"g1", "m1", 0.8}, {"g2", "m1", 0.8}};
    m.unmatched_golden = {"g3"};
    m.unmatched_generated = {"m2"};
    CHECK_THROWS_AS(m.validate(golden, generated), ValidationError);
  }
  SUBCASE("id both matched and unmatched") {
    MatchSet m = ok;
    m.unmatched_golden = {"g1", "g2"};
    CHECK_THROWS_AS(m.validate(golden, generated), ValidationError);
  }
  SUBCASE("missing id breaks the partition") {
    MatchSet m = ok;
    m.unmatched_golden.clear();
    CHECK_THROWS_AS(m.validate(golden, generated), ValidationError);
  }
  SUBCASE("unknown id breaks the partition") {
    MatchSet m = ok;
    m.unmatched_generated = {"m9"};
    CHECK_THROWS_AS(m.validate(golden, generated), ValidationError);
  }
}

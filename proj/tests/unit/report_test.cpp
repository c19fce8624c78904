#include <algorithm>
#include <filesystem>
#include <fstream>
#include <random>

#include <doctest.h>
#include <fmt/format.h>

#include "dgeval/report.hpp"
#include "dgeval/scoring.hpp"
#include "dgeval/stats.hpp"

using namespace dgeval;

namespace {

const std::filesystem::path kPricingPath =
    std::filesystem::path(DGEVAL_SOURCE_DIR) / "data" / "pricing.json";

struct TempDir {
  std::filesystem::path path;

  TempDir() {
    std::mt19937_64 rng(std::random_device{}());
    path = std::filesystem::temp_directory_path() /
           fmt::format("dgeval-report-{:016x}", rng());
    std::filesystem::create_directories(path);
  }
  ~TempDir() { std::filesystem::remove_all(path); }

  std::filesystem::path file(const char* name, const std::string& content) const {
    auto p = path / name;
    std::ofstream out(p);
    out << content;
    return p;
  }
};

Dataset six_query_dataset() {
  Dataset d;
  auto add = [&](const char* id, const char* crop, const char* topic) {
    Query q;
    q.id = id;
    q.text = "question";
    q.crop = crop;
    q.topic = topic;
    d.queries.push_back(std::move(q));
  };
  add("q1", "rice", "pest");
  add("q2", "rice", "nutrient");
  add("q3", "rice", "pest");
  add("q4", "wheat", "pest");
  add("q5", "wheat", "nutrient");
  add("q6", "wheat", "harvest");
  return d;
}

EvalRecord aligned_record(const char* model, const char* qid, double f1_value) {
  EvalRecord r;
  r.model = model;
  r.query_id = qid;
  AlignmentScores s;
  s.recall = f1_value;
  s.precision = f1_value;
  s.f1 = f1_value;
  s.golden_count = 4;
  s.generated_count = 4;
  r.alignment = s;
  return r;
}

std::vector<EvalRecord> sample_records() {
  std::vector<EvalRecord> records;
  records.push_back(aligned_record("alpha", "q1", 0.6));
  records.push_back(aligned_record("alpha", "q2", 0.4));
  records.push_back(aligned_record("alpha", "q3", 0.8));
  records.push_back(aligned_record("alpha", "q4", 1.0));
  records.push_back(aligned_record("alpha", "q6", 0.2));

  EvalRecord unscored;
  unscored.model = "alpha";
  unscored.query_id = "q5";
  records.push_back(unscored);

  records[0].specificity = classify_specificity({true, false, false, true, false, false, true});
  records[1].specificity = classify_specificity({false, false, false, false, false, false, true});
  RelevanceScore rel;
  rel.dims = {8, 8, 8, 8, 8};
  rel.overall = 8.0;
  rel.percentage = 80.0;
  records[0].relevance = rel;
  ConversationalityScore conv;
  conv.dims = {5, 4, 5, 4, 5, 4};
  conv.overall = 4.5;
  records[0].conversationality = conv;

  records.push_back(aligned_record("beta", "q1", 0.5));
  records.push_back(aligned_record("beta", "q2", 0.5));
  records.push_back(aligned_record("beta", "q3", 0.5));
  records.push_back(aligned_record("beta", "q4", 0.7));

  EvalRecord gamma;
  gamma.model = "gamma";
  gamma.query_id = "q1";
  records.push_back(gamma);
  return records;
}

ReportOptions base_options() {
  ReportOptions o;
  o.min_cell = 1;
  o.matrix_model = "alpha";
  o.judge_model = "scripted-judge";
  o.judge_mode = "replay";
  o.fixture_digest = "cafef00dcafef00d";
  return o;
}

}  // namespace

TEST_CASE("PricingTable loads the shipped price file") {
  PricingTable t = PricingTable::load(kPricingPath);
  CHECK(t.reference == "gpt-4");
  CHECK(t.entries.size() == 10);
  CHECK(t.prompt_tokens == 200.0);
  CHECK(t.response_tokens == 500.0);

  const PricingEntry* mini = t.find("gpt-4o-mini");
  REQUIRE(mini != nullptr);
  CHECK(mini->kind == "api");
  const PricingEntry* gemma = t.find("gemma-2-9b");
  REQUIRE(gemma != nullptr);
  CHECK(gemma->kind == "self_hosted");
  CHECK(t.find("unlisted") == nullptr);
}

TEST_CASE("PricingTable rejects malformed files") {
  TempDir dir;
  CHECK_THROWS_AS(PricingTable::load(dir.path / "missing.json"), ValidationError);

  auto bad_json = dir.file("bad.json", "{not json");
  CHECK_THROWS_AS(PricingTable::load(bad_json), ValidationError);

  auto bad_kind = dir.file(
      "kind.json",
      R"({"reference":"m","models":[{"model":"m","kind":"rental","hourly_rate":1}]})");
  CHECK_THROWS_WITH_AS(PricingTable::load(bad_kind), doctest::Contains("unknown kind"),
                       ValidationError);

  auto zero_qph = dir.file("qph.json",
                           R"({"reference":"m","models":[{"model":"m","kind":"self_hosted",)"
                           R"("hourly_rate":2,"queries_per_hour":0}]})");
  CHECK_THROWS_WITH_AS(PricingTable::load(zero_qph),
                       doctest::Contains("positive queries_per_hour"), ValidationError);

  auto neg_tokens = dir.file("tok.json",
                             R"({"reference":"m","prompt_tokens":-5,"models":)"
                             R"([{"model":"m","kind":"api","input_per_1m":1,"output_per_1m":1}]})");
  CHECK_THROWS_AS(PricingTable::load(neg_tokens), ValidationError);
}

TEST_CASE("cost_estimate reproduces the per-query economics") {
  PricingTable t = PricingTable::load(kPricingPath);
  CostBlock block = cost_estimate(
      t, {"gpt-4", "gpt-4o", "gpt-4o-mini", "gemini-1.5-pro", "gemma-2-9b"}, 1000);
  CHECK(block.reference == "gpt-4");
  CHECK(block.queries == 1000);
  REQUIRE(block.lines.size() == 5);

  CHECK(block.lines[0].per_query == doctest::Approx(0.036).epsilon(1e-12));
  CHECK(block.lines[0].relative == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(block.lines[1].relative == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(block.lines[2].per_query == doctest::Approx(0.0054).epsilon(1e-12));
  CHECK(block.lines[2].relative == doctest::Approx(0.15).epsilon(1e-12));
  CHECK(block.lines[2].absolute == doctest::Approx(5.4).epsilon(1e-12));
  CHECK(block.lines[3].relative == doctest::Approx(0.33).epsilon(1e-3));
  CHECK(block.lines[4].per_query == doctest::Approx(2.0 / 13889.0).epsilon(1e-12));

  CHECK_THROWS_WITH_AS(cost_estimate(t, {"unlisted"}, 10),
                       doctest::Contains("no price entry"), ValidationError);

  PricingTable broken = t;
  broken.reference = "unlisted";
  CHECK_THROWS_WITH_AS(cost_estimate(broken, {"gpt-4"}, 10),
                       doctest::Contains("no entry for reference"), ValidationError);

  PricingTable zero;
  zero.reference = "free";
  zero.entries.push_back({"free", "api", 0.0, 0.0, 0.0, 0.0});
  CHECK_THROWS_WITH_AS(cost_estimate(zero, {"free"}, 10),
                       doctest::Contains("non-positive"), ValidationError);
}

TEST_CASE("build_report aggregates per-model scores") {
  Report rep = build_report(sample_records(), six_query_dataset(), base_options());

  REQUIRE(rep.models.size() == 3);
  const ModelAggregate& alpha = rep.models[0];
  CHECK(alpha.model == "alpha");
  CHECK(alpha.records == 6);
  CHECK(alpha.alignment_records == 5);
  CHECK(alpha.f1 == doctest::Approx(0.6).epsilon(1e-12));
  CHECK(alpha.recall == doctest::Approx(0.6).epsilon(1e-12));
  CHECK(alpha.specificity_records == 2);
  CHECK(alpha.specific_rate == 0.5);
  CHECK(alpha.relevance_records == 1);
  CHECK(alpha.relevance == 80.0);
  CHECK(alpha.conversationality_records == 1);
  CHECK(alpha.conversationality == 4.5);

  const ModelAggregate& gamma = rep.models[2];
  CHECK(gamma.records == 1);
  CHECK(gamma.alignment_records == 0);
  CHECK(gamma.f1 == 0.0);

  const ModelStat& alpha_stat = rep.stats.models[0];
  CHECK(alpha_stat.n == 5);
  CHECK(alpha_stat.f1_mean == doctest::Approx(0.6).epsilon(1e-12));
  CHECK(alpha_stat.f1_sd == doctest::Approx(std::sqrt(0.1)).epsilon(1e-12));
}

TEST_CASE("build_report fills the crop-topic matrix") {
  Report rep = build_report(sample_records(), six_query_dataset(), base_options());

  CHECK(rep.matrix.model == "alpha");
  CHECK(rep.matrix.crops == std::vector<std::string>{"rice", "wheat"});
  CHECK(rep.matrix.topics == std::vector<std::string>{"harvest", "nutrient", "pest"});

  CHECK_FALSE(rep.matrix.cells[0][0].sufficient);  // rice x harvest has no records
  CHECK(rep.matrix.cells[0][1].f1 == doctest::Approx(0.4));
  CHECK(rep.matrix.cells[0][2].f1 == doctest::Approx(0.7));
  CHECK(rep.matrix.cells[0][2].count == 2);
  CHECK(rep.matrix.cells[1][0].f1 == doctest::Approx(0.2));
  CHECK_FALSE(rep.matrix.cells[1][1].sufficient);  // q5 was never aligned
  CHECK(rep.matrix.row_avg[0].f1 == doctest::Approx(0.6));
  CHECK(rep.matrix.row_avg[1].f1 == doctest::Approx(0.6));
  CHECK(rep.matrix.col_avg[2].f1 == doctest::Approx(0.8));
  CHECK(rep.matrix.overall.f1 == doctest::Approx(0.6));
  CHECK(rep.matrix.overall.count == 5);

  ReportOptions strict = base_options();
  strict.min_cell = 5;
  Report sparse = build_report(sample_records(), six_query_dataset(), strict);
  for (const auto& row : sparse.matrix.cells) {
    for (const auto& cell : row) CHECK_FALSE(cell.sufficient);
  }
  CHECK(sparse.matrix.overall.sufficient);  // 5 observations meet min_cell 5
}

TEST_CASE("build_report compares models and tallies preferences") {
  ReportOptions o = base_options();
  o.compare_a = "alpha";
  o.compare_b = "beta";
  for (int i = 0; i < 6; ++i) o.preferences.push_back({fmt::format("q{}", i), "alpha"});
  for (int i = 0; i < 4; ++i) o.preferences.push_back({fmt::format("q{}", i), "beta"});

  Report rep = build_report(sample_records(), six_query_dataset(), o);

  REQUIRE(rep.stats.paired.has_value());
  CHECK(rep.stats.paired->n == 4);
  TTestResult expect =
      paired_t_test(std::vector<double>{0.6, 0.4, 0.8, 1.0}, std::vector<double>{0.5, 0.5, 0.5, 0.7});
  CHECK(rep.stats.paired->t == expect.t);
  CHECK(rep.stats.paired->p == expect.p);

  REQUIRE(rep.stats.preference.has_value());
  CHECK(rep.stats.preference->count_a == 6);
  CHECK(rep.stats.preference->count_b == 4);
  CHECK(rep.stats.preference->pct_a == 60.0);
  CHECK(*rep.stats.preference ==
        preference_summary(o.preferences, "alpha", "beta"));

  SUBCASE("a vote for an unlisted model is rejected") {
    o.preferences.push_back({"q9", "someone-else"});
    CHECK_THROWS_AS(build_report(sample_records(), six_query_dataset(), o), ValidationError);
  }

  SUBCASE("too few shared queries warns instead of testing") {
    std::vector<EvalRecord> thin = {aligned_record("alpha", "q1", 0.6),
                                    aligned_record("beta", "q2", 0.5)};
    ReportOptions o2;
    o2.compare_a = "alpha";
    o2.compare_b = "beta";
    Report r2 = build_report(thin, six_query_dataset(), o2);
    CHECK_FALSE(r2.stats.paired.has_value());
    REQUIRE_FALSE(r2.provenance.warnings.empty());
    CHECK(r2.provenance.warnings[0].find("paired t") != std::string::npos);
  }
}

TEST_CASE("build_report flags judge self-evaluation and bad inputs") {
  ReportOptions o = base_options();
  o.judge_model = "alpha";
  Report rep = build_report(sample_records(), six_query_dataset(), o);
  bool warned = false;
  for (const auto& w : rep.provenance.warnings) {
    if (w.find("self-preference") != std::string::npos) warned = true;
  }
  CHECK(warned);

  auto records = sample_records();
  records.push_back(aligned_record("alpha", "q1", 0.9));
  CHECK_THROWS_WITH_AS(build_report(records, six_query_dataset(), base_options()),
                       doctest::Contains("duplicate record"), ValidationError);

  ReportOptions missing = base_options();
  missing.matrix_model = "nope";
  CHECK_THROWS_WITH_AS(build_report(sample_records(), six_query_dataset(), missing),
                       doctest::Contains("no records"), ValidationError);

  auto stray = sample_records();
  stray.push_back(aligned_record("alpha", "q9", 0.9));
  Report r3 = build_report(stray, six_query_dataset(), base_options());
  bool left_out = false;
  for (const auto& w : r3.provenance.warnings) {
    if (w.find("left out of the matrix") != std::string::npos) left_out = true;
  }
  CHECK(left_out);
  CHECK(r3.matrix.overall.count == 5);  // q9 never lands in a cell
}

TEST_CASE("build_report is pure under record order shuffles") {
  auto records = sample_records();
  ReportOptions o = base_options();
  o.compare_a = "alpha";
  o.compare_b = "beta";
  o.pricing = PricingTable::load(kPricingPath);
  o.cost_models = {"gpt-4", "gpt-4o-mini"};

  Dataset d = six_query_dataset();
  Report reference = build_report(records, d, o);
  std::string md = render_report(reference, ReportFormat::Markdown);
  std::string js = render_report(reference, ReportFormat::Json);

  std::mt19937 rng(17);
  for (int round = 0; round < 5; ++round) {
    std::shuffle(records.begin(), records.end(), rng);
    Report again = build_report(records, d, o);
    CHECK(again == reference);
    CHECK(render_report(again, ReportFormat::Markdown) == md);
    CHECK(render_report(again, ReportFormat::Json) == js);
  }
}

TEST_CASE("markdown rendering shows rounded percentages and dashes") {
  ReportOptions o = base_options();
  o.pricing = PricingTable::load(kPricingPath);
  Report rep = build_report(sample_records(), six_query_dataset(), o);
  std::string md = render_report(rep, ReportFormat::Markdown);

  CHECK(md.find("- Judge: scripted-judge (replay)") != std::string::npos);
  CHECK(md.find("- Fixtures: cafef00dcafef00d") != std::string::npos);
  CHECK(md.find("| alpha | 6 | 60.0 | 60.0 | 60.0 | 50.0 | 80.0 | 4.50 |") !=
        std::string::npos);
  CHECK(md.find("| gamma | 1 | --- | --- | --- | --- | --- | --- |") != std::string::npos);
  CHECK(md.find("| rice | --- | 40.0 | 70.0 | 60.0 |") != std::string::npos);
  CHECK(md.find("| wheat | 20.0 | --- | 100.0 | 60.0 |") != std::string::npos);
  CHECK(md.find("| Avg | 20.0 | 40.0 | 80.0 | 60.0 |") != std::string::npos);

  // Cost ratios match the published relative-cost ladder.
  for (const char* token : {"1.0x", "0.5x", "0.15x", "0.33x", "0.027x", "0.004x", "0.003x"}) {
    CHECK(md.find(token) != std::string::npos);
  }
  CHECK(md.find("timestamp") == std::string::npos);
}

TEST_CASE("csv rendering carries every section") {
  ReportOptions o = base_options();
  o.compare_a = "alpha";
  o.compare_b = "beta";
  Report rep = build_report(sample_records(), six_query_dataset(), o);
  std::string csv = render_report(rep, ReportFormat::Csv);

  for (const char* section : {"# models", "# matrix,alpha", "# contradictions", "# stats",
                              "# paired_t", "# provenance"}) {
    CHECK(csv.find(section) != std::string::npos);
  }
  CHECK(csv.find("alpha,6,5,60.0,60.0,60.0,2,50.0,1,80.0,1,4.50") != std::string::npos);
}

TEST_CASE("report format names parse") {
  CHECK(report_format_from_string("md") == ReportFormat::Markdown);
  CHECK(report_format_from_string("markdown") == ReportFormat::Markdown);
  CHECK(report_format_from_string("csv") == ReportFormat::Csv);
  CHECK(report_format_from_string("json") == ReportFormat::Json);
  CHECK_THROWS_AS(report_format_from_string("html"), ValidationError);
}

TEST_CASE("report JSON round-trips") {
  ReportOptions o = base_options();
  o.compare_a = "alpha";
  o.compare_b = "beta";
  for (int i = 0; i < 5; ++i) o.preferences.push_back({fmt::format("q{}", i), "alpha"});
  o.preferences.push_back({"q5", "beta"});
  o.pricing = PricingTable::load(kPricingPath);
  o.cost_models = {"gpt-4", "gemma-2-9b"};

  std::vector<EvalRecord> records = sample_records();
  records[0].contradictions.push_back({"g0", "r0", 2, Severity::High, "clash"});
  Report rep = build_report(records, six_query_dataset(), o);

  json j = rep;
  Report back = j.get<Report>();
  CHECK(back == rep);

  std::string rendered = render_report(rep, ReportFormat::Json);
  Report reparsed = json::parse(rendered).get<Report>();
  CHECK(reparsed == rep);
}

#include <filesystem>
#include <fstream>
#include <memory>
#include <random>

#include <doctest.h>
#include <fmt/format.h>

#include "dgeval/pipeline.hpp"
#include "support/scripted_judge.hpp"

using namespace dgeval;
using testsupport::ScriptedBackend;

namespace {

struct JudgeHarness {
  ScriptedBackend* backend = nullptr;
  std::optional<Judge> judge;

  explicit JudgeHarness(ScriptedBackend::Options opts = {}) {
    JudgeConfig config;
    config.model = "scripted-judge";
    config.mode = JudgeMode::Live;
    auto owned = std::make_unique<ScriptedBackend>(opts);
    backend = owned.get();
    judge.emplace(config, std::move(owned));
  }
};

struct TempDir {
  std::filesystem::path path;

  TempDir() {
    std::mt19937_64 rng(std::random_device{}());
    path = std::filesystem::temp_directory_path() /
           fmt::format("dgeval-pipeline-{:016x}", rng());
    std::filesystem::create_directories(path);
  }
  ~TempDir() { std::filesystem::remove_all(path); }
};

UnitTable shipped_units() {
  return UnitTable::load(std::filesystem::path(DGEVAL_SOURCE_DIR) / "data" / "units.tsv");
}

// Three queries for the "demo" model: a rich answer whose extraction hits the
// canned urea decomposition, an empty answer, and an answer with no golden
// facts on file.
Dataset mini_dataset() {
  Dataset d;
  auto add_query = [&](const char* id, const char* text) {
    Query q;
    q.id = id;
    q.text = text;
    q.crop = "rice";
    q.topic = "nutrient-management";
    d.queries.push_back(std::move(q));
  };
  add_query("q1", "How much urea should I apply to my paddy field?");
  add_query("q2", "What fertilizer schedule suits transplanted rice?");
  add_query("q3", "How do I keep pests away between seasons?");

  auto add_fact = [&](const char* query, const char* id, const std::string& text) {
    GoldenFactRecord rec;
    rec.query_id = query;
    rec.fact.id = id;
    rec.fact.text = text;
    rec.fact.confidence = 0.95;
    d.golden_facts.push_back(std::move(rec));
  };
  add_fact("q1", "g1", testsupport::kUreaFacts[0]);
  add_fact("q1", "g2", testsupport::kUreaFacts[4]);
  add_fact("q2", "g3", "Apply DAP as a basal dose before transplanting");

  d.outputs.push_back({"demo", "q1", testsupport::kUreaAnswer});
  d.outputs.push_back({"demo", "q2", "   "});
  d.outputs.push_back({"demo", "q3", "Rotate crops to disrupt pest cycles."});
  return d;
}

const EvalRecord& record_for(const EvalOutcome& outcome, const char* query_id) {
  for (const auto& r : outcome.records) {
    if (r.query_id == query_id) return r;
  }
  REQUIRE(false);
  return outcome.records.front();
}

}  // namespace

TEST_CASE("evaluate scores every query of a model") {
  Dataset d = mini_dataset();
  UnitTable table = shipped_units();
  JudgeHarness h;

  EvalOutcome out = evaluate(d, "demo", *h.judge, table, {});

  REQUIRE(out.records.size() == 3);
  CHECK(out.records[0].query_id == "q1");
  CHECK(out.records[1].query_id == "q2");
  CHECK(out.records[2].query_id == "q3");
  CHECK_FALSE(out.partial);
  CHECK(out.stop_reason.empty());

  const EvalRecord& full = record_for(out, "q1");
  CHECK(full.flags.empty());
  CHECK(full.specificity.has_value());
  CHECK(full.relevance.has_value());
  CHECK(full.conversationality.has_value());
  REQUIRE(full.alignment.has_value());
  CHECK(full.alignment->recall == 1.0);  // both golden facts appear verbatim
  CHECK(full.alignment->precision == doctest::Approx(0.4));
  CHECK(full.alignment->f1 == doctest::Approx(4.0 / 7.0).epsilon(1e-12));
  CHECK(full.alignment->generated_count == 5);

  const EvalRecord& empty = record_for(out, "q2");
  CHECK(empty.has_flag("empty_output"));
  CHECK(empty.has_flag("degenerate"));
  CHECK_FALSE(empty.specificity.has_value());
  CHECK_FALSE(empty.relevance.has_value());
  REQUIRE(empty.alignment.has_value());
  CHECK(empty.alignment->recall == 0.0);
  CHECK(empty.alignment->degenerate);

  const EvalRecord& orphan = record_for(out, "q3");
  CHECK(orphan.has_flag("no_golden_facts"));
  CHECK_FALSE(orphan.alignment.has_value());
  CHECK(orphan.specificity.has_value());

  REQUIRE(out.report.models.size() == 1);
  CHECK(out.report.models[0].records == 3);
  CHECK(out.report.models[0].alignment_records == 2);
  CHECK(out.report.provenance.judge_model == "scripted-judge");
  CHECK(out.report.provenance.judge_mode == "live");

  CHECK_THROWS_WITH_AS(evaluate(d, "absent", *h.judge, table, {}),
                       doctest::Contains("no outputs for model"), ValidationError);
}

TEST_CASE("evaluate is deterministic and worker-count independent") {
  Dataset d = mini_dataset();
  UnitTable table = shipped_units();

  JudgeHarness first;
  EvalOutcome base = evaluate(d, "demo", *first.judge, table, {});

  JudgeHarness second;
  PipelineConfig parallel;
  parallel.workers = 4;
  EvalOutcome again = evaluate(d, "demo", *second.judge, table, parallel);

  CHECK(again.records == base.records);
  CHECK(again.report == base.report);
  CHECK(render_report(again.report, ReportFormat::Markdown) ==
        render_report(base.report, ReportFormat::Markdown));
}

TEST_CASE("a transport failure stops the batch and the checkpoint resumes it") {
  Dataset d = mini_dataset();
  UnitTable table = shipped_units();
  TempDir dir;
  PipelineConfig config;
  config.checkpoint = dir.path / "demo.checkpoint.jsonl";

  // q1 takes nine judge calls (generation, five decompositions, specificity,
  // relevance, conversationality) and q2 takes none, so the tenth call fails
  // while q3 is being evaluated.
  JudgeHarness failing({.transport_fail_after = 9});
  EvalOutcome broken = evaluate(d, "demo", *failing.judge, table, config);
  CHECK(broken.partial);
  CHECK_FALSE(broken.stop_reason.empty());
  REQUIRE(broken.records.size() == 2);
  CHECK(broken.records[0].query_id == "q1");
  CHECK(broken.records[1].query_id == "q2");
  bool warned = false;
  for (const auto& w : broken.report.provenance.warnings) {
    if (w.find("batch stopped early") != std::string::npos) warned = true;
  }
  CHECK(warned);

  JudgeHarness clean_judge;
  EvalOutcome resumed = evaluate(d, "demo", *clean_judge.judge, table, config);
  CHECK_FALSE(resumed.partial);
  CHECK(resumed.records.size() == 3);
  CHECK(clean_judge.backend->calls() == 5);  // only q3 was re-evaluated

  JudgeHarness fresh;
  EvalOutcome direct = evaluate(d, "demo", *fresh.judge, table, {});
  CHECK(resumed.records == direct.records);
  CHECK(resumed.report == direct.report);

  // The checkpoint holds all three records and round-trips through JSON.
  CHECK(load_checkpoint(config.checkpoint) == resumed.records);
}

TEST_CASE("load_checkpoint tolerates absence and rejects corruption") {
  TempDir dir;
  CHECK(load_checkpoint(dir.path / "never-written.jsonl").empty());

  auto corrupt = dir.path / "corrupt.jsonl";
  std::ofstream(corrupt) << "{not json}\n";
  CHECK_THROWS_WITH_AS(load_checkpoint(corrupt), doctest::Contains(":1:"), ValidationError);
}

TEST_CASE("judge degradation marks records instead of stopping the batch") {
  Dataset d = mini_dataset();
  UnitTable table = shipped_units();

  SUBCASE("relevance failures") {
    JudgeHarness h({.garbage_templates = {"relevance"}});
    EvalOutcome out = evaluate(d, "demo", *h.judge, table, {});
    CHECK(out.partial);
    CHECK(out.stop_reason.empty());
    CHECK(out.records.size() == 3);
    const EvalRecord& rec = record_for(out, "q1");
    CHECK(rec.has_flag("unevaluated_relevance"));
    CHECK_FALSE(rec.relevance.has_value());
    CHECK(rec.alignment.has_value());  // other stages still ran
    CHECK(rec.conversationality.has_value());
  }

  SUBCASE("extraction failures leave alignment unscored") {
    JudgeHarness h({.garbage_templates = {"fact_generation"}});
    EvalOutcome out = evaluate(d, "demo", *h.judge, table, {});
    CHECK(out.partial);
    const EvalRecord& rec = record_for(out, "q1");
    CHECK(rec.has_flag("unevaluated_extraction"));
    CHECK_FALSE(rec.alignment.has_value());
    CHECK(rec.specificity.has_value());
  }
}

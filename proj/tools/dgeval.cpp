#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "dgeval/alignment.hpp"
#include "dgeval/dataset.hpp"
#include "dgeval/extraction.hpp"
#include "dgeval/judge.hpp"
#include "dgeval/pipeline.hpp"
#include "dgeval/report.hpp"
#include "dgeval/stitching.hpp"

namespace fs = std::filesystem;
using namespace dgeval;

namespace {

struct JudgeCliOptions {
  std::string endpoint;
  std::string model = "judge";
  std::string mode = "replay";
  std::string fixtures;
  double temperature = 0.0;
  int max_tokens = 1024;
  int max_in_flight = 4;
  int max_retries = 3;
  std::string api_key_env = "DGEVAL_API_KEY";

  void add_to(CLI::App* cmd) {
    cmd->add_option("--judge-endpoint", endpoint, "Chat-completion URL (live/record modes)");
    cmd->add_option("--judge-model", model, "Judge model name");
    cmd->add_option("--judge-mode", mode, "live, record, or replay")
        ->check(CLI::IsMember({"live", "record", "replay"}));
    cmd->add_option("--fixtures", fixtures, "Fixture directory (record/replay modes)");
    cmd->add_option("--temperature", temperature, "Sampling temperature");
    cmd->add_option("--max-tokens", max_tokens, "Completion token cap");
    cmd->add_option("--max-in-flight", max_in_flight, "Concurrent judge calls");
    cmd->add_option("--max-retries", max_retries, "Transport retry budget");
    cmd->add_option("--api-key-env", api_key_env,
                    "Environment variable holding the judge credential");
  }

  JudgeConfig to_config() const {
    JudgeConfig c;
    c.endpoint = endpoint;
    c.model = model;
    c.mode = judge_mode_from_string(mode);
    c.fixtures_dir = fixtures;
    c.temperature = temperature;
    c.max_tokens = max_tokens;
    c.max_in_flight = max_in_flight;
    c.max_retries = max_retries;
    c.api_key_env = api_key_env;
    return c;
  }
};

UnitTable load_units(const std::string& path) {
  if (path.empty()) return UnitTable{};
  return UnitTable::load(path);
}

void write_text(const fs::path& path, const std::string& content) {
  if (!path.parent_path().empty()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw ValidationError(fmt::format("cannot write '{}'", path.string()));
  out << content;
}

void emit(const std::string& out_path, const std::string& content) {
  if (out_path.empty() || out_path == "-") {
    std::cout << content;
  } else {
    write_text(out_path, content);
  }
}

json verdict_json(const std::string& query_id, const ContradictionVerdict& v) {
  return json{{"query_id", query_id},
              {"golden_id", v.golden_id},
              {"generated_id", v.generated_id},
              {"rule", v.rule_id},
              {"severity", std::string(to_string(v.severity))},
              {"rationale", v.rationale}};
}

// --- extract: golden answers -> deduplicated golden facts ---

struct ExtractArgs {
  std::string queries, answers, out, review_queue, units;
  bool quality_gate = false;
  JudgeCliOptions judge;
};

int cmd_extract(const ExtractArgs& args) {
  Dataset dataset = load_dataset({args.queries, args.answers, "", ""});
  if (dataset.answers.empty()) throw ValidationError("no golden answers to extract from");
  UnitTable table = load_units(args.units);
  Judge judge(args.judge.to_config());

  std::vector<GoldenFactRecord> out_facts;
  std::vector<json> review;
  std::size_t degraded = 0;
  std::size_t gated = 0;

  std::vector<GoldenAnswer> answers = dataset.answers;
  std::sort(answers.begin(), answers.end(),
            [](const GoldenAnswer& a, const GoldenAnswer& b) { return a.query_id < b.query_id; });
  for (const auto& ans : answers) {
    auto raw = extract_atomic_facts(ans.text, judge, table, ans.query_id + "-g",
                                    Provenance::HumanCurated);
    GroupingResult groups = semantic_group(raw, judge);
    if (groups.degraded) ++degraded;
    auto finalized = finalize_facts(groups.groups, ans.query_id);
    for (const auto& v : screen_contradictions(finalized)) {
      review.push_back(verdict_json(ans.query_id, v));
    }
    for (auto& fact : finalized) {
      if (args.quality_gate) {
        QualityScore q = score_quality(fact, judge);
        if (!q.passed) {
          ++gated;
          review.push_back(json{{"query_id", ans.query_id},
                                {"fact_id", fact.id},
                                {"reason", "quality gate"},
                                {"confidence", q.confidence},
                                {"completeness", q.completeness},
                                {"actionability", q.actionability}});
          continue;
        }
      }
      out_facts.push_back({ans.query_id, std::move(fact)});
    }
  }

  write_golden_facts(args.out, out_facts);
  if (!args.review_queue.empty() && !review.empty()) {
    std::string lines;
    for (const auto& r : review) lines += r.dump() + "\n";
    write_text(args.review_queue, lines);
  }
  fmt::print("extracted {} golden facts from {} answers -> {}\n", out_facts.size(),
             answers.size(), args.out);
  if (!review.empty()) {
    fmt::print("{} entries need curator review ({})\n", review.size(),
               args.review_queue.empty() ? "no --review-queue given" : args.review_queue);
  }
  if (gated > 0) fmt::print("{} facts excluded by the quality gate\n", gated);
  if (degraded > 0) {
    fmt::print(stderr, "warning: semantic grouping degraded for {} answers "
                       "(judge failures; only exact duplicates merged)\n",
               degraded);
  }
  return 0;
}

// --- split: stratified train/validation/test ---

struct SplitArgs {
  std::string queries, out_dir;
  std::vector<double> ratios{0.75, 0.125, 0.125};
  std::vector<std::string> keys{"crop", "topic"};
  std::uint64_t seed = 42;
};

int cmd_split(const SplitArgs& args) {
  Dataset dataset = load_dataset({args.queries, "", "", ""});
  if (args.ratios.size() != 3) throw ValidationError("--ratios needs exactly 3 values");
  SplitResult split = stratified_split(
      dataset.queries, {args.ratios[0], args.ratios[1], args.ratios[2]}, args.keys, args.seed);
  fs::create_directories(args.out_dir);
  auto write_split = [&](const char* name, const std::vector<Query>& qs) {
    std::ofstream out(fs::path(args.out_dir) / name, std::ios::trunc);
    for (const auto& q : qs) out << json(q).dump() << '\n';
  };
  write_split("train.jsonl", split.train);
  write_split("validation.jsonl", split.validation);
  write_split("test.jsonl", split.test);
  for (const auto& w : split.warnings) fmt::print(stderr, "warning: {}\n", w);
  fmt::print("train {} / validation {} / test {} -> {}\n", split.train.size(),
             split.validation.size(), split.test.size(), args.out_dir);
  return 0;
}

// --- evaluate: the full per-model pipeline ---

struct EvaluateArgs {
  std::string queries, golden_facts, outputs, model, units;
  std::string checkpoint, records_out, report_out, format = "markdown";
  std::size_t workers = 1;
  std::size_t min_cell = 5;
  JudgeCliOptions judge;
};

int cmd_evaluate(const EvaluateArgs& args) {
  Dataset dataset = load_dataset({args.queries, "", args.golden_facts, args.outputs});
  UnitTable table = load_units(args.units);
  Judge judge(args.judge.to_config());

  PipelineConfig config;
  config.workers = args.workers;
  config.checkpoint = args.checkpoint;
  config.report.min_cell = args.min_cell;
  config.report.matrix_model = args.model;

  EvalOutcome outcome = evaluate(dataset, args.model, judge, table, config);

  if (!args.records_out.empty()) {
    std::string lines;
    for (const auto& rec : outcome.records) lines += json(rec).dump() + "\n";
    write_text(args.records_out, lines);
  }
  emit(args.report_out, render_report(outcome.report, report_format_from_string(args.format)));

  fmt::print(stderr, "evaluated {} of {} outputs for '{}'\n", outcome.records.size(),
             [&] {
               std::size_t n = 0;
               for (const auto& o : dataset.outputs)
                 if (o.model == args.model) ++n;
               return n;
             }(),
             args.model);
  if (!outcome.stop_reason.empty()) {
    fmt::print(stderr, "stopped early: {}\n", outcome.stop_reason);
  }
  if (outcome.partial && outcome.records.empty()) return 2;
  return outcome.partial ? 3 : 0;
}

// --- stitch: facts -> persona response behind the faithfulness gate ---

struct StitchArgs {
  std::string queries, golden_facts, persona, out_dir = "stitched";
  std::string quarantine_dir = "quarantine", units;
  std::vector<std::string> only;  // query ids; empty = all with facts
  JudgeCliOptions judge;
};

int cmd_stitch(const StitchArgs& args) {
  Dataset dataset = load_dataset({args.queries, "", args.golden_facts, ""});
  UnitTable table = load_units(args.units);
  PersonaConfig persona = args.persona.empty() ? PersonaConfig{} : PersonaConfig::load(args.persona);
  Judge judge(args.judge.to_config());

  std::vector<const Query*> targets;
  if (args.only.empty()) {
    for (const auto& q : dataset.queries) {
      if (!dataset.facts_for(q.id).empty()) targets.push_back(&q);
    }
  } else {
    for (const auto& id : args.only) {
      const Query* q = dataset.find_query(id);
      if (!q) throw ValidationError(fmt::format("unknown query id '{}'", id));
      targets.push_back(q);
    }
  }
  if (targets.empty()) throw ValidationError("no queries with golden facts to stitch");

  std::size_t quarantined = 0;
  for (const Query* q : targets) {
    std::vector<AtomicFact> facts;
    for (const AtomicFact* f : dataset.facts_for(q->id)) facts.push_back(*f);
    StitchResult stitched = stitch(facts, persona, *q, judge);
    FaithfulnessResult check = verify_faithfulness(facts, stitched.text, judge, table);
    for (const auto& w : stitched.warnings) {
      fmt::print(stderr, "warning: {}: {}\n", q->id, w);
    }
    if (check.faithful) {
      write_text(fs::path(args.out_dir) / (q->id + ".txt"), stitched.text + "\n");
      fmt::print("{}: {} words, coverage {:.2f}, faithful\n", q->id, stitched.word_count,
                 check.coverage);
    } else {
      ++quarantined;
      json details{{"query_id", q->id},
                   {"text", stitched.text},
                   {"coverage", check.coverage},
                   {"extraneous", json::array()},
                   {"contradictions", json::array()}};
      for (const auto& f : check.extraneous) details["extraneous"].push_back(f.text);
      for (const auto& v : check.contradictions) {
        details["contradictions"].push_back(verdict_json(q->id, v));
      }
      write_text(fs::path(args.quarantine_dir) / (q->id + ".json"), details.dump(2) + "\n");
      fmt::print("{}: quarantined ({} extraneous, {} contradictions) -> {}\n", q->id,
                 check.extraneous.size(), check.contradictions.size(), args.quarantine_dir);
    }
  }
  fmt::print("stitched {} queries, {} quarantined\n", targets.size(), quarantined);
  return 0;
}

// --- compare: pairwise preference votes (+ optional paired t over records) ---

struct CompareArgs {
  std::string prefs, model_a, model_b, records;
  bool as_json = false;
};

int cmd_compare(const CompareArgs& args) {
  auto votes = load_preferences(args.prefs);
  PreferenceSummary summary = preference_summary(votes, args.model_a, args.model_b);

  std::optional<TTestResult> paired;
  std::size_t paired_n = 0;
  if (!args.records.empty()) {
    auto records = load_checkpoint(args.records);
    std::map<std::string, double> f1_a, f1_b;
    for (const auto& r : records) {
      if (!r.alignment) continue;
      if (r.model == args.model_a) f1_a[r.query_id] = r.alignment->f1;
      if (r.model == args.model_b) f1_b[r.query_id] = r.alignment->f1;
    }
    std::vector<double> a, b;
    for (const auto& [qid, va] : f1_a) {
      auto it = f1_b.find(qid);
      if (it == f1_b.end()) continue;
      a.push_back(va);
      b.push_back(it->second);
    }
    paired_n = a.size();
    if (paired_n >= 2) paired = paired_t_test(a, b);
  }

  if (args.as_json) {
    json j{{"preference", json(summary)}};
    if (paired) {
      j["paired_t"] = json{{"n", paired_n},
                           {"t", paired->t},
                           {"p", paired->p},
                           {"zero_variance", paired->zero_variance}};
    }
    std::cout << j.dump(2) << '\n';
  } else {
    fmt::print("{}: {} ({:.1f}%)  {}: {} ({:.1f}%)  n={}  p={:.3g}\n", summary.model_a,
               summary.count_a, summary.pct_a, summary.model_b, summary.count_b, summary.pct_b,
               summary.count_a + summary.count_b, summary.p_value);
    if (paired) {
      fmt::print("paired t over F1 (n={}): t={:.2f}, p={:.3g}{}\n", paired_n, paired->t,
                 paired->p, paired->zero_variance ? " (zero-variance differences)" : "");
    }
  }
  return 0;
}

// --- report: rebuild a report from stored EvalRecords ---

struct ReportArgs {
  std::string records, queries, out, format = "markdown";
  std::string matrix_model, compare_a, compare_b, prefs, pricing;
  std::size_t min_cell = 5;
};

int cmd_report(const ReportArgs& args) {
  auto records = load_checkpoint(args.records);
  if (records.empty()) throw ValidationError(fmt::format("no records in '{}'", args.records));
  Dataset dataset = load_dataset({args.queries, "", "", ""});

  ReportOptions options;
  options.min_cell = args.min_cell;
  options.matrix_model = args.matrix_model;
  options.compare_a = args.compare_a;
  options.compare_b = args.compare_b;
  if (!args.prefs.empty()) options.preferences = load_preferences(args.prefs);
  if (!args.pricing.empty()) options.pricing = PricingTable::load(args.pricing);

  Report report = build_report(records, dataset, options);
  emit(args.out, render_report(report, report_format_from_string(args.format)));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"dgeval: fact-level evaluation for LLM advisory answers"};
  app.set_config("--config", "", "Read options from a TOML/INI config file");
  app.require_subcommand(1);

  ExtractArgs extract_args;
  auto* extract = app.add_subcommand("extract", "Extract golden facts from golden answers");
  extract->add_option("--queries", extract_args.queries, "Queries JSONL")->required();
  extract->add_option("--answers", extract_args.answers, "Golden answers JSONL")->required();
  extract->add_option("--out", extract_args.out, "Output golden facts JSONL")->required();
  extract->add_option("--review-queue", extract_args.review_queue,
                      "Where contradiction screening hits go");
  extract->add_option("--units", extract_args.units, "Unit table TSV");
  extract->add_flag("--quality-gate", extract_args.quality_gate,
                    "Drop facts failing the judge quality gate");
  extract_args.judge.add_to(extract);

  SplitArgs split_args;
  auto* split = app.add_subcommand("split", "Stratified train/validation/test split");
  split->add_option("--queries", split_args.queries, "Queries JSONL")->required();
  split->add_option("--out-dir", split_args.out_dir, "Output directory")->required();
  split->add_option("--ratios", split_args.ratios, "Train/validation/test ratios")
      ->expected(3);
  split->add_option("--keys", split_args.keys, "Stratification keys (crop topic language region)");
  split->add_option("--seed", split_args.seed, "Shuffle seed");

  EvaluateArgs eval_args;
  auto* evaluate = app.add_subcommand("evaluate", "Evaluate one model's outputs");
  evaluate->add_option("--queries", eval_args.queries, "Queries JSONL")->required();
  evaluate->add_option("--golden-facts", eval_args.golden_facts, "Golden facts JSONL")
      ->required();
  evaluate->add_option("--outputs", eval_args.outputs, "Model outputs JSONL")->required();
  evaluate->add_option("--model", eval_args.model, "Model name to evaluate")->required();
  evaluate->add_option("--units", eval_args.units, "Unit table TSV");
  evaluate->add_option("--checkpoint", eval_args.checkpoint, "Resumable checkpoint JSONL");
  evaluate->add_option("--records-out", eval_args.records_out, "Write EvalRecords JSONL here");
  evaluate->add_option("--report-out", eval_args.report_out, "Report path ('-' = stdout)");
  evaluate->add_option("--format", eval_args.format, "markdown, csv, or json");
  evaluate->add_option("--workers", eval_args.workers, "Record-level parallelism");
  evaluate->add_option("--min-cell", eval_args.min_cell, "Matrix cell minimum record count");
  eval_args.judge.add_to(evaluate);

  StitchArgs stitch_args;
  auto* stitch = app.add_subcommand("stitch", "Stitch golden facts into persona responses");
  stitch->add_option("--queries", stitch_args.queries, "Queries JSONL")->required();
  stitch->add_option("--golden-facts", stitch_args.golden_facts, "Golden facts JSONL")
      ->required();
  stitch->add_option("--persona", stitch_args.persona, "Persona config file");
  stitch->add_option("--out-dir", stitch_args.out_dir, "Faithful responses go here");
  stitch->add_option("--quarantine-dir", stitch_args.quarantine_dir,
                     "Unfaithful responses go here");
  stitch->add_option("--units", stitch_args.units, "Unit table TSV");
  stitch->add_option("--query", stitch_args.only, "Limit to specific query ids");
  stitch_args.judge.add_to(stitch);

  CompareArgs compare_args;
  auto* compare = app.add_subcommand("compare", "Summarize pairwise preference votes");
  compare->add_option("--prefs", compare_args.prefs, "Preference votes JSONL")->required();
  compare->add_option("--model-a", compare_args.model_a, "First model name")->required();
  compare->add_option("--model-b", compare_args.model_b, "Second model name")->required();
  compare->add_option("--records", compare_args.records,
                      "EvalRecords JSONL for a paired t test over F1");
  compare->add_flag("--json", compare_args.as_json, "Emit JSON instead of text");

  ReportArgs report_args;
  auto* report = app.add_subcommand("report", "Rebuild a report from stored EvalRecords");
  report->add_option("--records", report_args.records, "EvalRecords JSONL")->required();
  report->add_option("--queries", report_args.queries, "Queries JSONL")->required();
  report->add_option("--out", report_args.out, "Report path ('-' = stdout)");
  report->add_option("--format", report_args.format, "markdown, csv, or json");
  report->add_option("--matrix-model", report_args.matrix_model, "Model for the crop-topic matrix");
  report->add_option("--compare-a", report_args.compare_a, "Paired comparison model A");
  report->add_option("--compare-b", report_args.compare_b, "Paired comparison model B");
  report->add_option("--prefs", report_args.prefs, "Preference votes JSONL");
  report->add_option("--pricing", report_args.pricing, "Pricing table JSON");
  report->add_option("--min-cell", report_args.min_cell, "Matrix cell minimum record count");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*extract) return cmd_extract(extract_args);
    if (*split) return cmd_split(split_args);
    if (*evaluate) return cmd_evaluate(eval_args);
    if (*stitch) return cmd_stitch(stitch_args);
    if (*compare) return cmd_compare(compare_args);
    if (*report) return cmd_report(report_args);
  } catch (const TransportError& e) {
    fmt::print(stderr, "transport error: {}\n", e.what());
    return 2;
  } catch (const JudgeError& e) {
    fmt::print(stderr, "judge error: {}\n", e.what());
    return 2;
  } catch (const ValidationError& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return 1;
  } catch (const Error& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return 1;
  }
  return 0;
}

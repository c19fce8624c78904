#include "dgeval/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <fstream>
#include <mutex>
#include <set>
#include <thread>

#include <fmt/format.h>

#include "dgeval/alignment.hpp"
#include "dgeval/extraction.hpp"
#include "dgeval/scoring.hpp"

namespace dgeval {

std::vector<EvalRecord> load_checkpoint(const std::filesystem::path& path) {
  std::vector<EvalRecord> records;
  std::ifstream in(path);
  if (!in) return records;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      records.push_back(json::parse(line).get<EvalRecord>());
    } catch (const json::exception& e) {
      throw ValidationError(fmt::format("{}:{}: {}", path.string(), line_no, e.what()));
    }
  }
  return records;
}

namespace {

// One query's worth of judge calls. Throws TransportError upward; every
// other judge failure degrades the record and the batch moves on.
EvalRecord evaluate_one(const Dataset& dataset, const Query& query, const std::string& model,
                        const std::string& response, Judge& judge, const UnitTable& table) {
  EvalRecord rec;
  rec.query_id = query.id;
  rec.model = model;

  bool empty_output = normalize_text(response).empty();
  if (empty_output) rec.add_flag("empty_output");

  std::vector<AtomicFact> generated;
  bool extracted = false;
  if (!empty_output) {
    try {
      generated =
          extract_atomic_facts(response, judge, table, query.id + "-gen");
      extracted = true;
    } catch (const TransportError&) {
      throw;
    } catch (const JudgeError&) {
      rec.add_flag("unevaluated_extraction");
    }
  } else {
    extracted = true;  // empty answer legitimately has no facts
  }
  for (const auto& f : generated) {
    if (f.components.partial) {
      rec.add_flag("partial_components");
      break;
    }
  }

  if (!empty_output) {
    try {
      rec.specificity = detect_anchors(response, query, judge);
    } catch (const TransportError&) {
      throw;
    } catch (const JudgeError&) {
      rec.add_flag("unevaluated_specificity");
    }
  }

  std::vector<const AtomicFact*> golden_ptrs = dataset.facts_for(query.id);
  std::vector<AtomicFact> golden;
  golden.reserve(golden_ptrs.size());
  for (const AtomicFact* f : golden_ptrs) golden.push_back(*f);
  std::sort(golden.begin(), golden.end(),
            [](const AtomicFact& a, const AtomicFact& b) { return a.id < b.id; });

  if (!empty_output) {
    try {
      rec.relevance = score_relevance(query, response, golden, judge);
    } catch (const TransportError&) {
      throw;
    } catch (const JudgeError&) {
      rec.add_flag("unevaluated_relevance");
    }
    try {
      rec.conversationality = score_conversationality(query, response, judge);
    } catch (const TransportError&) {
      throw;
    } catch (const JudgeError&) {
      rec.add_flag("unevaluated_conversationality");
    }
  }

  if (golden.empty()) {
    rec.add_flag("no_golden_facts");
  } else if (extracted) {
    MatchOutcome match;
    bool matched = false;
    try {
      match = match_facts(golden, generated, judge);
      matched = true;
    } catch (const TransportError&) {
      throw;
    } catch (const JudgeError&) {
      rec.add_flag("unevaluated_alignment");
    }
    if (matched) {
      if (match.partial) rec.add_flag("partial_match");
      rec.alignment = compute_prf(match.set, golden.size(), generated.size());
      if (rec.alignment->degenerate) rec.add_flag("degenerate");
    }
    for (const auto& g : golden) {
      for (const auto& c : generated) {
        auto verdict = detect_contradiction(g.components, c.components);
        if (verdict) {
          verdict->golden_id = g.id;
          verdict->generated_id = c.id;
          rec.contradictions.push_back(std::move(*verdict));
        }
      }
    }
  }

  return rec;
}

}  // namespace

EvalOutcome evaluate(const Dataset& dataset, const std::string& model, Judge& judge,
                     const UnitTable& table, const PipelineConfig& config) {
  std::vector<const ModelOutput*> outputs;
  for (const auto& o : dataset.outputs) {
    if (o.model == model) outputs.push_back(&o);
  }
  if (outputs.empty()) {
    throw ValidationError(fmt::format("no outputs for model '{}'", model));
  }
  std::sort(outputs.begin(), outputs.end(), [](const ModelOutput* a, const ModelOutput* b) {
    return a->query_id < b->query_id;
  });

  EvalOutcome outcome;
  std::set<std::string> done;
  if (!config.checkpoint.empty()) {
    for (auto& rec : load_checkpoint(config.checkpoint)) {
      if (rec.model != model) continue;
      if (!done.insert(rec.query_id).second) continue;
      outcome.records.push_back(std::move(rec));
    }
  }

  std::vector<const ModelOutput*> pending;
  for (const ModelOutput* o : outputs) {
    if (!done.count(o->query_id)) pending.push_back(o);
  }

  std::mutex sink_mutex;  // guards records, flags, and the checkpoint writer
  std::ofstream checkpoint_out;
  if (!config.checkpoint.empty() && !pending.empty()) {
    std::filesystem::path dir = config.checkpoint.parent_path();
    if (!dir.empty()) std::filesystem::create_directories(dir);
    checkpoint_out.open(config.checkpoint, std::ios::app);
    if (!checkpoint_out) {
      throw ValidationError(
          fmt::format("cannot open checkpoint '{}'", config.checkpoint.string()));
    }
  }

  std::atomic<std::size_t> next{0};
  std::atomic<bool> stopped{false};
  std::string stop_reason;

  auto worker = [&]() {
    while (!stopped.load()) {
      std::size_t i = next.fetch_add(1);
      if (i >= pending.size()) return;
      const ModelOutput* out = pending[i];
      const Query* query = dataset.find_query(out->query_id);
      try {
        EvalRecord rec = evaluate_one(dataset, *query, model, out->text, judge, table);
        std::lock_guard<std::mutex> lock(sink_mutex);
        if (checkpoint_out.is_open()) {
          checkpoint_out << json(rec).dump() << '\n';
          checkpoint_out.flush();
        }
        outcome.records.push_back(std::move(rec));
      } catch (const TransportError& e) {
        std::lock_guard<std::mutex> lock(sink_mutex);
        if (stop_reason.empty()) stop_reason = e.what();
        stopped.store(true);
        return;
      }
    }
  };

  std::size_t n_workers = std::max<std::size_t>(1, config.workers);
  n_workers = std::min(n_workers, std::max<std::size_t>(1, pending.size()));
  if (n_workers == 1) {
    worker();
  } else {
    std::vector<std::thread> threads;
    threads.reserve(n_workers);
    for (std::size_t i = 0; i < n_workers; ++i) threads.emplace_back(worker);
    for (auto& t : threads) t.join();
  }

  std::sort(outcome.records.begin(), outcome.records.end(),
            [](const EvalRecord& a, const EvalRecord& b) { return a.query_id < b.query_id; });

  if (stopped.load()) {
    outcome.partial = true;
    outcome.stop_reason = stop_reason;
  }
  for (const auto& rec : outcome.records) {
    for (const auto& flag : rec.flags) {
      // Data conditions (empty_output, degenerate, no_golden_facts) are not
      // failures; only judge-side degradation makes the batch partial.
      if (flag.rfind("unevaluated_", 0) == 0 || flag.rfind("partial_", 0) == 0) {
        outcome.partial = true;
        break;
      }
    }
    if (outcome.partial) break;
  }

  ReportOptions opts = config.report;
  opts.judge_model = judge.config().model;
  opts.judge_mode = std::string(to_string(judge.config().mode));
  opts.fixture_digest = judge.fixture_digest();
  outcome.report = build_report(outcome.records, dataset, opts);
  if (!outcome.stop_reason.empty()) {
    outcome.report.provenance.warnings.push_back(
        fmt::format("batch stopped early: {}; rerun with the same checkpoint to resume",
                    outcome.stop_reason));
  }
  return outcome;
}

}  // namespace dgeval

#include "dgeval/report.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <fmt/format.h>

namespace dgeval {

// ===== Pricing =====

PricingTable PricingTable::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError(fmt::format("cannot open '{}'", path.string()));
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ValidationError(fmt::format("{}: {}", path.string(), e.what()));
  }
  PricingTable table;
  try {
    table.reference = j.at("reference").get<std::string>();
    table.prompt_tokens = j.value("prompt_tokens", 200.0);
    table.response_tokens = j.value("response_tokens", 500.0);
    for (const auto& m : j.at("models")) {
      PricingEntry e;
      e.model = m.at("model").get<std::string>();
      e.kind = m.at("kind").get<std::string>();
      if (e.kind == "api") {
        e.input_per_1m = m.at("input_per_1m").get<double>();
        e.output_per_1m = m.at("output_per_1m").get<double>();
      } else if (e.kind == "self_hosted") {
        e.hourly_rate = m.at("hourly_rate").get<double>();
        e.queries_per_hour = m.at("queries_per_hour").get<double>();
        if (e.queries_per_hour <= 0) {
          throw ValidationError(
              fmt::format("pricing entry '{}' needs positive queries_per_hour", e.model));
        }
      } else {
        throw ValidationError(
            fmt::format("pricing entry '{}' has unknown kind '{}'", e.model, e.kind));
      }
      table.entries.push_back(std::move(e));
    }
  } catch (const json::exception& e) {
    throw ValidationError(fmt::format("{}: {}", path.string(), e.what()));
  }
  if (table.prompt_tokens < 0 || table.response_tokens < 0) {
    throw ValidationError("pricing token assumptions must be non-negative");
  }
  return table;
}

const PricingEntry* PricingTable::find(const std::string& model) const {
  for (const auto& e : entries) {
    if (e.model == model) return &e;
  }
  return nullptr;
}

namespace {

double per_query_cost(const PricingTable& t, const PricingEntry& e) {
  if (e.kind == "api") {
    return (t.prompt_tokens * e.input_per_1m + t.response_tokens * e.output_per_1m) / 1e6;
  }
  return e.hourly_rate / e.queries_per_hour;
}

}  // namespace

CostBlock cost_estimate(const PricingTable& pricing, const std::vector<std::string>& models,
                        std::size_t n_queries) {
  const PricingEntry* ref = pricing.find(pricing.reference);
  if (!ref) {
    throw ValidationError(
        fmt::format("pricing table has no entry for reference model '{}'", pricing.reference));
  }
  double ref_cost = per_query_cost(pricing, *ref);
  if (ref_cost <= 0) {
    throw ValidationError(
        fmt::format("reference model '{}' has non-positive cost", pricing.reference));
  }
  CostBlock block;
  block.reference = pricing.reference;
  block.queries = n_queries;
  for (const auto& name : models) {
    const PricingEntry* e = pricing.find(name);
    if (!e) throw ValidationError(fmt::format("no price entry for model '{}'", name));
    CostLine line;
    line.model = name;
    line.per_query = per_query_cost(pricing, *e);
    line.absolute = line.per_query * static_cast<double>(n_queries);
    line.relative = line.per_query / ref_cost;
    block.lines.push_back(std::move(line));
  }
  return block;
}

// ===== Aggregation =====

namespace {

std::string label_or(const std::string& s) { return s.empty() ? "unspecified" : s; }

MatrixCell finish_cell(double sum, std::size_t count, std::size_t min_cell) {
  MatrixCell c;
  c.count = count;
  c.sufficient = count >= min_cell && count > 0;
  if (count > 0) c.f1 = sum / static_cast<double>(count);
  return c;
}

}  // namespace

Report build_report(const std::vector<EvalRecord>& records, const Dataset& dataset,
                    const ReportOptions& options) {
  std::vector<const EvalRecord*> ordered;
  ordered.reserve(records.size());
  for (const auto& r : records) ordered.push_back(&r);
  std::sort(ordered.begin(), ordered.end(), [](const EvalRecord* a, const EvalRecord* b) {
    if (a->model != b->model) return a->model < b->model;
    return a->query_id < b->query_id;
  });
  for (std::size_t i = 1; i < ordered.size(); ++i) {
    if (ordered[i]->model == ordered[i - 1]->model &&
        ordered[i]->query_id == ordered[i - 1]->query_id) {
      throw ValidationError(fmt::format("duplicate record for model '{}' query '{}'",
                                        ordered[i]->model, ordered[i]->query_id));
    }
  }

  Report report;
  report.provenance.judge_model = options.judge_model;
  report.provenance.judge_mode = options.judge_mode;
  report.provenance.fixture_digest = options.fixture_digest;

  std::map<std::string, std::vector<const EvalRecord*>> by_model;
  for (const EvalRecord* r : ordered) by_model[r->model].push_back(r);

  for (const auto& [model, recs] : by_model) {
    ModelAggregate agg;
    agg.model = model;
    agg.records = recs.size();
    double recall = 0, precision = 0, f1 = 0, spec = 0, rel = 0, conv = 0;
    for (const EvalRecord* r : recs) {
      if (r->alignment) {
        ++agg.alignment_records;
        recall += r->alignment->recall;
        precision += r->alignment->precision;
        f1 += r->alignment->f1;
      }
      if (r->specificity) {
        ++agg.specificity_records;
        if (r->specificity->specific) spec += 1.0;
      }
      if (r->relevance) {
        ++agg.relevance_records;
        rel += r->relevance->percentage;
      }
      if (r->conversationality) {
        ++agg.conversationality_records;
        conv += r->conversationality->overall;
      }
    }
    if (agg.alignment_records > 0) {
      double n = static_cast<double>(agg.alignment_records);
      agg.recall = recall / n;
      agg.precision = precision / n;
      agg.f1 = f1 / n;
    }
    if (agg.specificity_records > 0) {
      agg.specific_rate = spec / static_cast<double>(agg.specificity_records);
    }
    if (agg.relevance_records > 0) {
      agg.relevance = rel / static_cast<double>(agg.relevance_records);
    }
    if (agg.conversationality_records > 0) {
      agg.conversationality = conv / static_cast<double>(agg.conversationality_records);
    }
    report.models.push_back(std::move(agg));

    std::vector<EvalRecord> copies;
    copies.reserve(recs.size());
    for (const EvalRecord* r : recs) copies.push_back(*r);
    report.contradictions[model] = contradiction_report(copies);

    if (!options.judge_model.empty() && model == options.judge_model) {
      report.provenance.warnings.push_back(
          fmt::format("judge model '{}' is also under evaluation; scores for it may "
                      "reflect self-preference bias",
                      model));
    }
  }

  // Crop-topic F1 matrix for one model.
  report.matrix.min_cell = options.min_cell;
  std::string matrix_model = options.matrix_model;
  if (matrix_model.empty() && !report.models.empty()) matrix_model = report.models[0].model;
  report.matrix.model = matrix_model;
  if (!matrix_model.empty()) {
    if (!by_model.count(matrix_model)) {
      throw ValidationError(fmt::format("matrix model '{}' has no records", matrix_model));
    }
    struct Obs {
      std::string crop;
      std::string topic;
      double f1;
    };
    std::vector<Obs> obs;
    for (const EvalRecord* r : by_model.at(matrix_model)) {
      if (!r->alignment) continue;
      const Query* q = dataset.find_query(r->query_id);
      if (!q) {
        report.provenance.warnings.push_back(
            fmt::format("record for unknown query '{}' left out of the matrix", r->query_id));
        continue;
      }
      obs.push_back({label_or(q->crop), label_or(q->topic), r->alignment->f1});
    }
    std::set<std::string> crops, topics;
    for (const auto& o : obs) {
      crops.insert(o.crop);
      topics.insert(o.topic);
    }
    report.matrix.crops.assign(crops.begin(), crops.end());
    report.matrix.topics.assign(topics.begin(), topics.end());
    const auto& cs = report.matrix.crops;
    const auto& ts = report.matrix.topics;
    for (std::size_t ci = 0; ci < cs.size(); ++ci) {
      std::vector<MatrixCell> row;
      double row_sum = 0;
      std::size_t row_n = 0;
      for (std::size_t ti = 0; ti < ts.size(); ++ti) {
        double sum = 0;
        std::size_t n = 0;
        for (const auto& o : obs) {
          if (o.crop == cs[ci] && o.topic == ts[ti]) {
            sum += o.f1;
            ++n;
          }
        }
        row.push_back(finish_cell(sum, n, options.min_cell));
        row_sum += sum;
        row_n += n;
      }
      report.matrix.cells.push_back(std::move(row));
      report.matrix.row_avg.push_back(finish_cell(row_sum, row_n, options.min_cell));
    }
    double total_sum = 0;
    std::size_t total_n = 0;
    for (std::size_t ti = 0; ti < ts.size(); ++ti) {
      double sum = 0;
      std::size_t n = 0;
      for (const auto& o : obs) {
        if (o.topic == ts[ti]) {
          sum += o.f1;
          ++n;
        }
      }
      report.matrix.col_avg.push_back(finish_cell(sum, n, options.min_cell));
      total_sum += sum;
      total_n += n;
    }
    report.matrix.overall = finish_cell(total_sum, total_n, options.min_cell);
  }

  // Statistics.
  for (const auto& [model, recs] : by_model) {
    ModelStat stat;
    stat.model = model;
    std::vector<double> f1s;
    for (const EvalRecord* r : recs) {
      if (r->alignment) f1s.push_back(r->alignment->f1);
    }
    stat.n = f1s.size();
    if (!f1s.empty()) {
      double sum = 0;
      for (double v : f1s) sum += v;
      stat.f1_mean = sum / static_cast<double>(f1s.size());
      if (f1s.size() > 1) {
        double ss = 0;
        for (double v : f1s) ss += (v - stat.f1_mean) * (v - stat.f1_mean);
        stat.f1_sd = std::sqrt(ss / static_cast<double>(f1s.size() - 1));
      }
    }
    report.stats.models.push_back(std::move(stat));
  }

  if (!options.compare_a.empty() && !options.compare_b.empty()) {
    std::vector<double> a, b;
    if (by_model.count(options.compare_a) && by_model.count(options.compare_b)) {
      std::map<std::string, double> f1_a;
      for (const EvalRecord* r : by_model.at(options.compare_a)) {
        if (r->alignment) f1_a[r->query_id] = r->alignment->f1;
      }
      for (const EvalRecord* r : by_model.at(options.compare_b)) {
        if (!r->alignment) continue;
        auto it = f1_a.find(r->query_id);
        if (it == f1_a.end()) continue;
        a.push_back(it->second);
        b.push_back(r->alignment->f1);
      }
    }
    if (a.size() >= 2) {
      PairedComparison cmp;
      cmp.model_a = options.compare_a;
      cmp.model_b = options.compare_b;
      cmp.n = a.size();
      TTestResult t = paired_t_test(a, b);
      cmp.t = t.t;
      cmp.p = t.p;
      cmp.zero_variance = t.zero_variance;
      report.stats.paired = cmp;
    } else {
      report.provenance.warnings.push_back(
          fmt::format("fewer than 2 shared scored queries for '{}' vs '{}'; paired t "
                      "test skipped",
                      options.compare_a, options.compare_b));
    }
    if (!options.preferences.empty()) {
      report.stats.preference =
          preference_summary(options.preferences, options.compare_a, options.compare_b);
    }
  }

  if (options.pricing) {
    std::vector<std::string> models = options.cost_models;
    if (models.empty()) {
      for (const auto& e : options.pricing->entries) models.push_back(e.model);
    }
    report.cost = cost_estimate(*options.pricing, models, dataset.queries.size());
  }

  return report;
}

// ===== Rendering =====

namespace {

std::string fmt_pct(double fraction) {
  return fmt::format("{:.1f}", round_half_up(fraction * 100.0, 1));
}

std::string fmt_pct100(double pct) {
  return fmt::format("{:.1f}", round_half_up(pct, 1));
}

std::string fmt_score(double v) { return fmt::format("{:.2f}", round_half_up(v, 2)); }

std::string fmt_p(double p) { return fmt::format("{:.3g}", p); }

std::string fmt_ratio(double v) {
  double r = round_half_up(v, 3);
  if (r == std::floor(r)) return fmt::format("{:.1f}x", r);
  return fmt::format("{}x", r);
}

std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += "\"\"";
    else out += c;
  }
  out += '"';
  return out;
}

std::string cell_pct(const MatrixCell& c) { return c.sufficient ? fmt_pct(c.f1) : "---"; }

void render_markdown(const Report& r, std::ostringstream& out) {
  out << "# dgeval report\n\n";
  if (!r.provenance.judge_model.empty() || !r.provenance.judge_mode.empty()) {
    out << fmt::format("- Judge: {} ({})\n", r.provenance.judge_model, r.provenance.judge_mode);
  }
  if (!r.provenance.fixture_digest.empty()) {
    out << fmt::format("- Fixtures: {}\n", r.provenance.fixture_digest);
  }
  for (const auto& w : r.provenance.warnings) {
    out << fmt::format("- Warning: {}\n", w);
  }
  out << "\n## Models\n\n";
  out << "| Model | Records | Recall | Precision | F1 | Specific | Relevance | "
         "Conversationality |\n";
  out << "|---|---:|---:|---:|---:|---:|---:|---:|\n";
  for (const auto& m : r.models) {
    out << fmt::format(
        "| {} | {} | {} | {} | {} | {} | {} | {} |\n", m.model, m.records,
        m.alignment_records ? fmt_pct(m.recall) : "---",
        m.alignment_records ? fmt_pct(m.precision) : "---",
        m.alignment_records ? fmt_pct(m.f1) : "---",
        m.specificity_records ? fmt_pct(m.specific_rate) : "---",
        m.relevance_records ? fmt_pct100(m.relevance) : "---",
        m.conversationality_records ? fmt_score(m.conversationality) : "---");
  }
  out << "\n";
  for (const auto& m : r.models) {
    out << fmt::format(
        "{}: {} records; scored: alignment {}, specificity {}, relevance {}, "
        "conversationality {}.\n",
        m.model, m.records, m.alignment_records, m.specificity_records, m.relevance_records,
        m.conversationality_records);
  }

  if (!r.matrix.model.empty() && !r.matrix.crops.empty()) {
    out << fmt::format("\n## Crop-topic F1 ({})\n\n", r.matrix.model);
    out << fmt::format("Cells with fewer than {} records print \"---\".\n\n", r.matrix.min_cell);
    out << "| Crop |";
    for (const auto& t : r.matrix.topics) out << ' ' << t << " |";
    out << " Avg |\n|---|";
    for (std::size_t i = 0; i < r.matrix.topics.size(); ++i) out << "---:|";
    out << "---:|\n";
    for (std::size_t ci = 0; ci < r.matrix.crops.size(); ++ci) {
      out << "| " << r.matrix.crops[ci] << " |";
      for (const auto& c : r.matrix.cells[ci]) out << ' ' << cell_pct(c) << " |";
      out << ' ' << cell_pct(r.matrix.row_avg[ci]) << " |\n";
    }
    out << "| Avg |";
    for (const auto& c : r.matrix.col_avg) out << ' ' << cell_pct(c) << " |";
    out << ' ' << cell_pct(r.matrix.overall) << " |\n";
  }

  if (!r.contradictions.empty()) {
    out << "\n## Contradictions\n\n";
    out << "| Model | Responses | Flagged | Response rate | Verdicts | Generated facts | "
           "Per-fact rate | High | Medium | Low |\n";
    out << "|---|---:|---:|---:|---:|---:|---:|---:|---:|---:|\n";
    std::string caveat;
    for (const auto& [model, c] : r.contradictions) {
      out << fmt::format("| {} | {} | {} | {} | {} | {} | {} | {} | {} | {} |\n", model,
                         c.responses, c.flagged_responses, fmt_pct(c.per_response_rate),
                         c.verdicts, c.generated_facts, fmt_pct(c.per_fact_rate),
                         c.severity_histogram[0], c.severity_histogram[1],
                         c.severity_histogram[2]);
      if (caveat.empty()) caveat = c.caveat;
    }
    if (!caveat.empty()) out << "\nNote: " << caveat << ".\n";
  }

  out << "\n## Statistics\n\n";
  for (const auto& s : r.stats.models) {
    out << fmt::format("- {} F1: mean {}, sd {}, n {}\n", s.model,
                       s.n ? fmt_pct(s.f1_mean) : "---", s.n > 1 ? fmt_pct(s.f1_sd) : "---",
                       s.n);
  }
  if (r.stats.paired) {
    const auto& c = *r.stats.paired;
    out << fmt::format("- Paired t ({} vs {}, F1, n={}): t = {}, p = {}{}\n", c.model_a,
                       c.model_b, c.n, fmt_score(c.t), fmt_p(c.p),
                       c.zero_variance ? " (zero-variance differences)" : "");
  }
  if (r.stats.preference) {
    const auto& p = *r.stats.preference;
    out << fmt::format("- Preference ({} vs {}, n={}): {:.1f}% / {:.1f}%, p = {}\n", p.model_a,
                       p.model_b, p.count_a + p.count_b, p.pct_a, p.pct_b, fmt_p(p.p_value));
  }

  if (r.cost) {
    out << "\n## Cost\n\n";
    out << fmt::format("Reference: {} = 1.0x over {} queries.\n\n", r.cost->reference,
                       r.cost->queries);
    out << "| Model | Per query | Total | Relative |\n|---|---:|---:|---:|\n";
    for (const auto& line : r.cost->lines) {
      out << fmt::format("| {} | ${:.4f} | ${:.2f} | {} |\n", line.model, line.per_query,
                         line.absolute, fmt_ratio(line.relative));
    }
  }
}

void render_csv(const Report& r, std::ostringstream& out) {
  out << "# models\n";
  out << "model,records,alignment_records,recall,precision,f1,specificity_records,"
         "specific_rate,relevance_records,relevance,conversationality_records,"
         "conversationality\n";
  for (const auto& m : r.models) {
    out << fmt::format("{},{},{},{},{},{},{},{},{},{},{},{}\n", csv_escape(m.model), m.records,
                       m.alignment_records, fmt_pct(m.recall), fmt_pct(m.precision),
                       fmt_pct(m.f1), m.specificity_records, fmt_pct(m.specific_rate),
                       m.relevance_records, fmt_pct100(m.relevance),
                       m.conversationality_records, fmt_score(m.conversationality));
  }
  if (!r.matrix.model.empty() && !r.matrix.crops.empty()) {
    out << fmt::format("# matrix,{},min_cell={}\n", csv_escape(r.matrix.model), r.matrix.min_cell);
    out << "crop";
    for (const auto& t : r.matrix.topics) out << ',' << csv_escape(t);
    out << ",avg\n";
    for (std::size_t ci = 0; ci < r.matrix.crops.size(); ++ci) {
      out << csv_escape(r.matrix.crops[ci]);
      for (const auto& c : r.matrix.cells[ci]) out << ',' << cell_pct(c);
      out << ',' << cell_pct(r.matrix.row_avg[ci]) << '\n';
    }
    out << "avg";
    for (const auto& c : r.matrix.col_avg) out << ',' << cell_pct(c);
    out << ',' << cell_pct(r.matrix.overall) << '\n';
  }
  out << "# contradictions\n";
  out << "model,responses,flagged,response_rate,verdicts,generated_facts,per_fact_rate,"
         "high,medium,low\n";
  for (const auto& [model, c] : r.contradictions) {
    out << fmt::format("{},{},{},{},{},{},{},{},{},{}\n", csv_escape(model), c.responses,
                       c.flagged_responses, fmt_pct(c.per_response_rate), c.verdicts,
                       c.generated_facts, fmt_pct(c.per_fact_rate), c.severity_histogram[0],
                       c.severity_histogram[1], c.severity_histogram[2]);
  }
  out << "# stats\n";
  out << "model,n,f1_mean,f1_sd\n";
  for (const auto& s : r.stats.models) {
    out << fmt::format("{},{},{},{}\n", csv_escape(s.model), s.n, fmt_pct(s.f1_mean),
                       fmt_pct(s.f1_sd));
  }
  if (r.stats.paired) {
    const auto& c = *r.stats.paired;
    out << "# paired_t\n";
    out << "model_a,model_b,n,t,p,zero_variance\n";
    out << fmt::format("{},{},{},{},{},{}\n", csv_escape(c.model_a), csv_escape(c.model_b),
                       c.n, fmt_score(c.t), fmt_p(c.p), c.zero_variance ? 1 : 0);
  }
  if (r.stats.preference) {
    const auto& p = *r.stats.preference;
    out << "# preference\n";
    out << "model_a,model_b,count_a,count_b,pct_a,pct_b,p\n";
    out << fmt::format("{},{},{},{},{:.1f},{:.1f},{}\n", csv_escape(p.model_a),
                       csv_escape(p.model_b), p.count_a, p.count_b, p.pct_a, p.pct_b,
                       fmt_p(p.p_value));
  }
  if (r.cost) {
    out << fmt::format("# cost,reference={},queries={}\n", csv_escape(r.cost->reference),
                       r.cost->queries);
    out << "model,per_query,total,relative\n";
    for (const auto& line : r.cost->lines) {
      out << fmt::format("{},{:.4f},{:.2f},{}\n", csv_escape(line.model), line.per_query,
                         line.absolute, fmt_ratio(line.relative));
    }
  }
  out << "# provenance\n";
  out << "judge_model,judge_mode,fixture_digest\n";
  out << fmt::format("{},{},{}\n", csv_escape(r.provenance.judge_model),
                     csv_escape(r.provenance.judge_mode),
                     csv_escape(r.provenance.fixture_digest));
  for (const auto& w : r.provenance.warnings) {
    out << "warning," << csv_escape(w) << '\n';
  }
}

}  // namespace

ReportFormat report_format_from_string(const std::string& s) {
  if (s == "markdown" || s == "md") return ReportFormat::Markdown;
  if (s == "csv") return ReportFormat::Csv;
  if (s == "json") return ReportFormat::Json;
  throw ValidationError(fmt::format("unknown report format '{}'", s));
}

std::string render_report(const Report& report, ReportFormat format) {
  std::ostringstream out;
  switch (format) {
    case ReportFormat::Markdown:
      render_markdown(report, out);
      break;
    case ReportFormat::Csv:
      render_csv(report, out);
      break;
    case ReportFormat::Json: {
      json j;
      to_json(j, report);
      out << j.dump(2) << '\n';
      break;
    }
  }
  return out.str();
}

// ===== JSON =====

void to_json(json& j, const PreferenceSummary& p) {
  j = json{{"model_a", p.model_a}, {"model_b", p.model_b}, {"count_a", p.count_a},
           {"count_b", p.count_b}, {"pct_a", p.pct_a},     {"pct_b", p.pct_b},
           {"p_value", p.p_value}};
}

void from_json(const json& j, PreferenceSummary& p) {
  p.model_a = j.at("model_a").get<std::string>();
  p.model_b = j.at("model_b").get<std::string>();
  p.count_a = j.at("count_a").get<int>();
  p.count_b = j.at("count_b").get<int>();
  p.pct_a = j.at("pct_a").get<double>();
  p.pct_b = j.at("pct_b").get<double>();
  p.p_value = j.at("p_value").get<double>();
}

namespace {

json cell_to_json(const MatrixCell& c) {
  return json{{"count", c.count}, {"f1", c.f1}, {"sufficient", c.sufficient}};
}

MatrixCell cell_from_json(const json& j) {
  MatrixCell c;
  c.count = j.at("count").get<std::size_t>();
  c.f1 = j.at("f1").get<double>();
  c.sufficient = j.at("sufficient").get<bool>();
  return c;
}

}  // namespace

void to_json(json& j, const Report& r) {
  json models = json::array();
  for (const auto& m : r.models) {
    models.push_back(json{{"model", m.model},
                          {"records", m.records},
                          {"alignment_records", m.alignment_records},
                          {"recall", m.recall},
                          {"precision", m.precision},
                          {"f1", m.f1},
                          {"specificity_records", m.specificity_records},
                          {"specific_rate", m.specific_rate},
                          {"relevance_records", m.relevance_records},
                          {"relevance", m.relevance},
                          {"conversationality_records", m.conversationality_records},
                          {"conversationality", m.conversationality}});
  }

  json cells = json::array();
  for (const auto& row : r.matrix.cells) {
    json jr = json::array();
    for (const auto& c : row) jr.push_back(cell_to_json(c));
    cells.push_back(std::move(jr));
  }
  json row_avg = json::array();
  for (const auto& c : r.matrix.row_avg) row_avg.push_back(cell_to_json(c));
  json col_avg = json::array();
  for (const auto& c : r.matrix.col_avg) col_avg.push_back(cell_to_json(c));
  json matrix = json{{"model", r.matrix.model},   {"min_cell", r.matrix.min_cell},
                     {"crops", r.matrix.crops},   {"topics", r.matrix.topics},
                     {"cells", std::move(cells)}, {"row_avg", std::move(row_avg)},
                     {"col_avg", std::move(col_avg)}, {"overall", cell_to_json(r.matrix.overall)}};

  json stats_models = json::array();
  for (const auto& s : r.stats.models) {
    stats_models.push_back(json{
        {"model", s.model}, {"n", s.n}, {"f1_mean", s.f1_mean}, {"f1_sd", s.f1_sd}});
  }
  json stats = json{{"models", std::move(stats_models)}};
  if (r.stats.paired) {
    const auto& c = *r.stats.paired;
    stats["paired"] = json{{"model_a", c.model_a}, {"model_b", c.model_b},
                           {"n", c.n},             {"t", c.t},
                           {"p", c.p},             {"zero_variance", c.zero_variance}};
  }
  if (r.stats.preference) stats["preference"] = json(*r.stats.preference);

  j = json{{"models", std::move(models)},
           {"matrix", std::move(matrix)},
           {"contradictions", r.contradictions},
           {"stats", std::move(stats)},
           {"provenance",
            json{{"judge_model", r.provenance.judge_model},
                 {"judge_mode", r.provenance.judge_mode},
                 {"fixture_digest", r.provenance.fixture_digest},
                 {"warnings", r.provenance.warnings}}}};
  if (r.cost) {
    json lines = json::array();
    for (const auto& line : r.cost->lines) {
      lines.push_back(json{{"model", line.model},
                           {"per_query", line.per_query},
                           {"absolute", line.absolute},
                           {"relative", line.relative}});
    }
    j["cost"] = json{{"reference", r.cost->reference},
                     {"queries", r.cost->queries},
                     {"lines", std::move(lines)}};
  }
}

void from_json(const json& j, Report& r) {
  r = Report{};
  for (const auto& m : j.at("models")) {
    ModelAggregate agg;
    agg.model = m.at("model").get<std::string>();
    agg.records = m.at("records").get<std::size_t>();
    agg.alignment_records = m.at("alignment_records").get<std::size_t>();
    agg.recall = m.at("recall").get<double>();
    agg.precision = m.at("precision").get<double>();
    agg.f1 = m.at("f1").get<double>();
    agg.specificity_records = m.at("specificity_records").get<std::size_t>();
    agg.specific_rate = m.at("specific_rate").get<double>();
    agg.relevance_records = m.at("relevance_records").get<std::size_t>();
    agg.relevance = m.at("relevance").get<double>();
    agg.conversationality_records = m.at("conversationality_records").get<std::size_t>();
    agg.conversationality = m.at("conversationality").get<double>();
    r.models.push_back(std::move(agg));
  }

  const json& matrix = j.at("matrix");
  r.matrix.model = matrix.at("model").get<std::string>();
  r.matrix.min_cell = matrix.at("min_cell").get<std::size_t>();
  r.matrix.crops = matrix.at("crops").get<std::vector<std::string>>();
  r.matrix.topics = matrix.at("topics").get<std::vector<std::string>>();
  for (const auto& row : matrix.at("cells")) {
    std::vector<MatrixCell> cr;
    for (const auto& c : row) cr.push_back(cell_from_json(c));
    r.matrix.cells.push_back(std::move(cr));
  }
  for (const auto& c : matrix.at("row_avg")) r.matrix.row_avg.push_back(cell_from_json(c));
  for (const auto& c : matrix.at("col_avg")) r.matrix.col_avg.push_back(cell_from_json(c));
  r.matrix.overall = cell_from_json(matrix.at("overall"));

  r.contradictions = j.at("contradictions").get<std::map<std::string, ContradictionReport>>();

  const json& stats = j.at("stats");
  for (const auto& s : stats.at("models")) {
    ModelStat stat;
    stat.model = s.at("model").get<std::string>();
    stat.n = s.at("n").get<std::size_t>();
    stat.f1_mean = s.at("f1_mean").get<double>();
    stat.f1_sd = s.at("f1_sd").get<double>();
    r.stats.models.push_back(std::move(stat));
  }
  if (stats.contains("paired")) {
    const json& c = stats.at("paired");
    PairedComparison cmp;
    cmp.model_a = c.at("model_a").get<std::string>();
    cmp.model_b = c.at("model_b").get<std::string>();
    cmp.n = c.at("n").get<std::size_t>();
    cmp.t = c.at("t").get<double>();
    cmp.p = c.at("p").get<double>();
    cmp.zero_variance = c.at("zero_variance").get<bool>();
    r.stats.paired = cmp;
  }
  if (stats.contains("preference")) {
    r.stats.preference = stats.at("preference").get<PreferenceSummary>();
  }

  if (j.contains("cost")) {
    CostBlock block;
    const json& cost = j.at("cost");
    block.reference = cost.at("reference").get<std::string>();
    block.queries = cost.at("queries").get<std::size_t>();
    for (const auto& l : cost.at("lines")) {
      CostLine line;
      line.model = l.at("model").get<std::string>();
      line.per_query = l.at("per_query").get<double>();
      line.absolute = l.at("absolute").get<double>();
      line.relative = l.at("relative").get<double>();
      block.lines.push_back(std::move(line));
    }
    r.cost = std::move(block);
  }

  const json& prov = j.at("provenance");
  r.provenance.judge_model = prov.at("judge_model").get<std::string>();
  r.provenance.judge_mode = prov.at("judge_mode").get<std::string>();
  r.provenance.fixture_digest = prov.at("fixture_digest").get<std::string>();
  r.provenance.warnings = prov.at("warnings").get<std::vector<std::string>>();
}

}  // namespace dgeval

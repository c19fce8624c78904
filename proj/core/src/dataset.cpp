#include "dgeval/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <numeric>
#include <random>
#include <set>

#include <fmt/format.h>

namespace dgeval {

// ===== Record JSON =====

void to_json(json& j, const GoldenAnswer& a) {
  j = json{{"query_id", a.query_id}, {"text", a.text}};
}

void from_json(const json& j, GoldenAnswer& a) {
  a.query_id = j.at("query_id").get<std::string>();
  a.text = j.at("text").get<std::string>();
}

void to_json(json& j, const GoldenFactRecord& f) {
  to_json(j, f.fact);
  j["query_id"] = f.query_id;
}

void from_json(const json& j, GoldenFactRecord& f) {
  f.query_id = j.at("query_id").get<std::string>();
  from_json(j, f.fact);
}

void to_json(json& j, const ModelOutput& o) {
  j = json{{"model", o.model}, {"query_id", o.query_id}, {"text", o.text}};
}

void from_json(const json& j, ModelOutput& o) {
  o.model = j.at("model").get<std::string>();
  o.query_id = j.at("query_id").get<std::string>();
  o.text = j.at("text").get<std::string>();
}

// ===== Loading =====

namespace {

template <typename T>
std::vector<T> load_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError(fmt::format("cannot open '{}'", path.string()));
  std::vector<T> records;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      records.push_back(json::parse(line).get<T>());
    } catch (const json::exception& e) {
      throw ValidationError(fmt::format("{}:{}: {}", path.string(), line_no, e.what()));
    } catch (const ValidationError& e) {
      throw ValidationError(fmt::format("{}:{}: {}", path.string(), line_no, e.what()));
    }
  }
  return records;
}

}  // namespace

Dataset load_dataset(const DatasetPaths& paths) {
  if (paths.queries.empty()) throw ValidationError("dataset needs a queries file");
  Dataset d;
  d.queries = load_jsonl<Query>(paths.queries);

  std::set<std::string> query_ids;
  for (const auto& q : d.queries) {
    if (q.text.empty()) {
      throw ValidationError(fmt::format("query '{}' has empty text", q.id));
    }
    if (!query_ids.insert(q.id).second) {
      throw ValidationError(fmt::format("duplicate query id '{}'", q.id));
    }
  }
  auto check_ref = [&](const std::string& query_id, std::string_view what) {
    if (!query_ids.count(query_id)) {
      throw ValidationError(
          fmt::format("{} references unknown query id '{}'", what, query_id));
    }
  };

  if (!paths.answers.empty()) {
    d.answers = load_jsonl<GoldenAnswer>(paths.answers);
    std::set<std::string> seen;
    for (const auto& a : d.answers) {
      check_ref(a.query_id, "golden answer");
      if (!seen.insert(a.query_id).second) {
        throw ValidationError(
            fmt::format("duplicate golden answer for query '{}'", a.query_id));
      }
    }
  }
  if (!paths.golden_facts.empty()) {
    d.golden_facts = load_jsonl<GoldenFactRecord>(paths.golden_facts);
    std::set<std::string> fact_ids;
    for (const auto& f : d.golden_facts) {
      check_ref(f.query_id, fmt::format("golden fact '{}'", f.fact.id));
      if (!fact_ids.insert(f.fact.id).second) {
        throw ValidationError(fmt::format("duplicate golden fact id '{}'", f.fact.id));
      }
    }
  }
  if (!paths.outputs.empty()) {
    d.outputs = load_jsonl<ModelOutput>(paths.outputs);
    std::set<std::pair<std::string, std::string>> seen;
    for (const auto& o : d.outputs) {
      check_ref(o.query_id, fmt::format("output of model '{}'", o.model));
      if (o.model.empty()) throw ValidationError("model output with empty model name");
      if (!seen.insert({o.model, o.query_id}).second) {
        throw ValidationError(fmt::format("duplicate output for model '{}' query '{}'",
                                          o.model, o.query_id));
      }
    }
  }
  return d;
}

std::vector<PreferenceVote> load_preferences(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError(fmt::format("cannot open '{}'", path.string()));
  std::vector<PreferenceVote> votes;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      json j = json::parse(line);
      PreferenceVote v;
      v.query_id = j.at("query_id").get<std::string>();
      v.winner = j.at("winner").get<std::string>();
      if (v.winner.empty()) throw ValidationError("empty winner");
      votes.push_back(std::move(v));
    } catch (const json::exception& e) {
      throw ValidationError(fmt::format("{}:{}: {}", path.string(), line_no, e.what()));
    } catch (const ValidationError& e) {
      throw ValidationError(fmt::format("{}:{}: {}", path.string(), line_no, e.what()));
    }
  }
  return votes;
}

void write_golden_facts(const std::filesystem::path& path,
                        const std::vector<GoldenFactRecord>& facts) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw ValidationError(fmt::format("cannot write '{}'", path.string()));
  for (const auto& f : facts) {
    out << json(f).dump() << '\n';
  }
}

// ===== Dataset lookups =====

const Query* Dataset::find_query(const std::string& id) const {
  for (const auto& q : queries) {
    if (q.id == id) return &q;
  }
  return nullptr;
}

const GoldenAnswer* Dataset::answer_for(const std::string& query_id) const {
  for (const auto& a : answers) {
    if (a.query_id == query_id) return &a;
  }
  return nullptr;
}

std::vector<const AtomicFact*> Dataset::facts_for(const std::string& query_id) const {
  std::vector<const AtomicFact*> out;
  for (const auto& f : golden_facts) {
    if (f.query_id == query_id) out.push_back(&f.fact);
  }
  return out;
}

const ModelOutput* Dataset::output_for(const std::string& model,
                                       const std::string& query_id) const {
  for (const auto& o : outputs) {
    if (o.model == model && o.query_id == query_id) return &o;
  }
  return nullptr;
}

std::vector<std::string> Dataset::models() const {
  std::set<std::string> names;
  for (const auto& o : outputs) names.insert(o.model);
  return {names.begin(), names.end()};
}

// ===== Stratified split =====

namespace {

std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

const std::string& field_of(const Query& q, const std::string& key) {
  if (key == "crop") return q.crop;
  if (key == "topic") return q.topic;
  if (key == "language") return q.language;
  if (key == "region") return q.region;
  throw ValidationError(fmt::format("unknown stratification key '{}'", key));
}

// Largest-remainder apportionment of n seats over the ratios; ties go to the
// lower split index.
std::array<std::size_t, 3> largest_remainder(std::size_t n, const std::array<double, 3>& ratios) {
  std::array<std::size_t, 3> alloc{};
  std::array<double, 3> frac{};
  std::size_t assigned = 0;
  for (int i = 0; i < 3; ++i) {
    double quota = static_cast<double>(n) * ratios[i];
    alloc[i] = static_cast<std::size_t>(std::floor(quota));
    frac[i] = quota - std::floor(quota);
    assigned += alloc[i];
  }
  std::array<int, 3> order{0, 1, 2};
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    if (frac[a] != frac[b]) return frac[a] > frac[b];
    return a < b;
  });
  for (std::size_t seat = 0; assigned < n; ++seat, ++assigned) {
    ++alloc[order[seat % 3]];
  }
  return alloc;
}

}  // namespace

SplitResult stratified_split(const std::vector<Query>& queries,
                             const std::array<double, 3>& ratios,
                             const std::vector<std::string>& keys, std::uint64_t seed) {
  double ratio_sum = ratios[0] + ratios[1] + ratios[2];
  if (std::abs(ratio_sum - 1.0) > 1e-9) {
    throw ValidationError(fmt::format("split ratios sum to {}, expected 1", ratio_sum));
  }
  for (double r : ratios) {
    if (r < 0.0) throw ValidationError("split ratios must be non-negative");
  }
  if (keys.empty()) throw ValidationError("stratified split needs at least one key");

  SplitResult result;
  if (queries.empty()) return result;

  // Group query indices by stratum; member lists are sorted by query id so
  // the split never depends on input order.
  std::map<std::string, std::vector<std::size_t>> strata;
  for (std::size_t i = 0; i < queries.size(); ++i) {
    std::string key;
    for (const auto& k : keys) {
      if (!key.empty()) key.push_back('\x1f');
      key += field_of(queries[i], k);
    }
    strata[key].push_back(i);
  }
  for (auto& [key, members] : strata) {
    std::sort(members.begin(), members.end(),
              [&](std::size_t a, std::size_t b) { return queries[a].id < queries[b].id; });
  }

  // Strata too small to spread across three splits merge into an overflow
  // stratum.
  static const std::string kOverflow = "\x1f__overflow__";
  std::vector<std::string> to_merge;
  for (const auto& [key, members] : strata) {
    if (key != kOverflow && members.size() < 3) to_merge.push_back(key);
  }
  if (!to_merge.empty()) {
    auto& overflow = strata[kOverflow];
    for (const auto& key : to_merge) {
      auto& members = strata.at(key);
      overflow.insert(overflow.end(), members.begin(), members.end());
      std::string label = key;
      std::replace(label.begin(), label.end(), '\x1f', '/');
      result.warnings.push_back(fmt::format(
          "stratum '{}' has {} records, fewer than the 3 splits; merged into overflow",
          label, members.size()));
      strata.erase(key);
    }
    std::sort(overflow.begin(), overflow.end(),
              [&](std::size_t a, std::size_t b) { return queries[a].id < queries[b].id; });
  }

  auto target = largest_remainder(queries.size(), ratios);

  // Per-stratum largest remainder first; every per-stratum allocation then
  // stays within one record of the stratum's exact share.
  std::vector<std::string> stratum_keys;
  for (const auto& [key, members] : strata) stratum_keys.push_back(key);
  std::map<std::string, std::array<std::size_t, 3>> alloc;
  std::array<std::size_t, 3> totals{};
  for (const auto& key : stratum_keys) {
    alloc[key] = largest_remainder(strata.at(key).size(), ratios);
    for (int i = 0; i < 3; ++i) totals[i] += alloc[key][i];
  }

  // Repair pass: per-stratum rounding can leave the global totals off the
  // largest-remainder targets by a few records. Move single records from a
  // rounded-up split to a rounded-down split of the same stratum; such moves
  // keep every per-stratum deviation inside (-1, 1).
  auto deviation = [&](const std::string& key, int split) {
    double quota = static_cast<double>(strata.at(key).size()) * ratios[split];
    return static_cast<double>(alloc.at(key)[split]) - quota;
  };
  int guard = 16 + 6 * static_cast<int>(stratum_keys.size());
  while (guard-- > 0) {
    int excess = -1;
    int deficit = -1;
    for (int i = 0; i < 3; ++i) {
      if (totals[i] > target[i] && excess < 0) excess = i;
      if (totals[i] < target[i] && deficit < 0) deficit = i;
    }
    if (excess < 0 || deficit < 0) break;

    bool moved = false;
    for (const auto& key : stratum_keys) {
      if (deviation(key, excess) > 1e-9 && deviation(key, deficit) < -1e-9) {
        --alloc[key][excess];
        ++alloc[key][deficit];
        --totals[excess];
        ++totals[deficit];
        moved = true;
        break;
      }
    }
    if (moved) continue;
    // No stratum pairs the excess split with the deficit split directly;
    // route through the donor stratum's own rounded-down split.
    for (const auto& key : stratum_keys) {
      if (deviation(key, excess) <= 1e-9) continue;
      for (int m = 0; m < 3 && !moved; ++m) {
        if (m != excess && deviation(key, m) < -1e-9) {
          --alloc[key][excess];
          ++alloc[key][m];
          --totals[excess];
          ++totals[m];
          moved = true;
        }
      }
      if (moved) break;
    }
    if (!moved) break;  // targets unreachable without breaking stratum bounds
  }

  // Materialize: shuffle each stratum with a per-stratum generator so the
  // outcome is independent of stratum iteration order.
  for (const auto& key : stratum_keys) {
    auto members = strata.at(key);
    std::mt19937_64 rng(seed ^ fnv1a64(key));
    for (std::size_t i = members.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(rng() % i);
      std::swap(members[i - 1], members[j]);
    }
    const auto& a = alloc.at(key);
    std::size_t pos = 0;
    for (std::size_t n = 0; n < a[0]; ++n) result.train.push_back(queries[members[pos++]]);
    for (std::size_t n = 0; n < a[1]; ++n) result.validation.push_back(queries[members[pos++]]);
    for (std::size_t n = 0; n < a[2]; ++n) result.test.push_back(queries[members[pos++]]);
  }
  return result;
}

}  // namespace dgeval

#include "dgeval/extraction.hpp"

#include <algorithm>
#include <map>
#include <numeric>

#include <fmt/format.h>

#include "dgeval/alignment.hpp"
#include "dgeval/judge.hpp"

namespace dgeval {

std::vector<AtomicFact> extract_atomic_facts(const std::string& answer, Judge& judge,
                                             const UnitTable& table,
                                             const std::string& id_prefix,
                                             Provenance provenance) {
  if (normalize_text(answer).empty()) return {};

  auto resp = judge.complete(get_template(TemplateId::FactGeneration), {{"answer", answer}});
  std::vector<AtomicFact> facts;
  std::size_t index = 0;
  for (const auto& item : resp.data.at("facts")) {
    AtomicFact fact;
    fact.id = fmt::format("{}-f{}", id_prefix, index++);
    fact.text = item.at("text").get<std::string>();
    fact.confidence = snap_confidence(item.at("confidence").get<double>());
    fact.band = band_of(fact.confidence);
    fact.provenance = provenance;
    fact.components = decompose_components(fact, judge, table);
    facts.push_back(std::move(fact));
  }
  return facts;
}

// ===== Semantic grouping =====

namespace {

int filled_slots(const FactComponents& c) {
  int n = 0;
  if (!c.subject.empty()) ++n;
  if (!c.attribute.empty()) ++n;
  if (!c.timing.empty()) ++n;
  if (!c.method.empty()) ++n;
  if (c.quantity) ++n;
  return n;
}

std::size_t pick_representative(const std::vector<AtomicFact>& members) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < members.size(); ++i) {
    int a = filled_slots(members[i].components);
    int b = filled_slots(members[best].components);
    if (a != b) {
      if (a > b) best = i;
      continue;
    }
    if (members[i].text.size() != members[best].text.size()) {
      if (members[i].text.size() > members[best].text.size()) best = i;
      continue;
    }
    if (members[i].id < members[best].id) best = i;
  }
  return best;
}

struct UnionFind {
  explicit UnionFind(std::size_t n) : parent(n) {
    std::iota(parent.begin(), parent.end(), std::size_t{0});
  }
  std::size_t find(std::size_t x) {
    while (parent[x] != x) {
      parent[x] = parent[parent[x]];
      x = parent[x];
    }
    return x;
  }
  void unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a == b) return;
    // Smaller root index wins, keeping group identity deterministic.
    if (b < a) std::swap(a, b);
    parent[b] = a;
  }
  std::vector<std::size_t> parent;
};

}  // namespace

GroupingResult semantic_group(const std::vector<AtomicFact>& facts, Judge& judge) {
  GroupingResult result;
  if (facts.empty()) return result;

  // Work over a deterministic id order regardless of input order.
  std::vector<std::size_t> order(facts.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return facts[a].id < facts[b].id; });

  std::vector<std::string> norm(facts.size());
  for (std::size_t i = 0; i < facts.size(); ++i) norm[i] = normalize_text(facts[i].text);

  UnionFind uf(facts.size());
  std::map<std::string, std::size_t> seen_text;
  for (std::size_t pos = 0; pos < order.size(); ++pos) {
    std::size_t i = order[pos];
    auto [it, fresh] = seen_text.try_emplace(norm[i], pos);
    if (!fresh) uf.unite(it->second, pos);
  }

  // Judge only pairs with distinct normalized text, in sorted-id order.
  std::vector<std::map<std::string, std::string>> bindings;
  std::vector<std::pair<std::size_t, std::size_t>> pair_pos;
  for (std::size_t a = 0; a < order.size(); ++a) {
    for (std::size_t b = a + 1; b < order.size(); ++b) {
      if (norm[order[a]] == norm[order[b]]) continue;
      bindings.push_back({{"reference_fact", facts[order[a]].text},
                          {"candidate_fact", facts[order[b]].text}});
      pair_pos.emplace_back(a, b);
    }
  }
  if (!bindings.empty()) {
    auto outcomes = judge.complete_many(get_template(TemplateId::FactMatching), bindings);
    bool any_failed = std::any_of(outcomes.begin(), outcomes.end(),
                                  [](const Judge::Outcome& o) { return !o.response; });
    if (any_failed) {
      // Abandon judge-based merging entirely rather than merge a random
      // subset; exact-duplicate unions above still hold.
      result.degraded = true;
    } else {
      for (std::size_t i = 0; i < outcomes.size(); ++i) {
        const auto& data = outcomes[i].response->data;
        if (data.value("match", false) && data.value("confidence", 0.0) >= kMatchThreshold) {
          uf.unite(pair_pos[i].first, pair_pos[i].second);
        }
      }
    }
  }

  std::map<std::size_t, std::vector<AtomicFact>> grouped;  // root pos -> members
  for (std::size_t pos = 0; pos < order.size(); ++pos) {
    grouped[uf.find(pos)].push_back(facts[order[pos]]);
  }
  for (auto& [root, members] : grouped) {
    FactGroup group;
    group.members = std::move(members);  // already in id order
    group.representative = pick_representative(group.members);
    result.groups.push_back(std::move(group));
  }
  return result;
}

std::vector<ContradictionVerdict> screen_contradictions(const std::vector<AtomicFact>& facts) {
  std::vector<std::size_t> order(facts.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return facts[a].id < facts[b].id; });

  std::vector<ContradictionVerdict> verdicts;
  for (std::size_t a = 0; a < order.size(); ++a) {
    for (std::size_t b = a + 1; b < order.size(); ++b) {
      const AtomicFact& fa = facts[order[a]];
      const AtomicFact& fb = facts[order[b]];
      if (auto v = detect_contradiction(fa.components, fb.components)) {
        v->golden_id = fa.id;
        v->generated_id = fb.id;
        verdicts.push_back(std::move(*v));
      }
    }
  }
  return verdicts;
}

std::vector<AtomicFact> finalize_facts(const std::vector<FactGroup>& groups,
                                       const std::string& id_prefix) {
  std::vector<AtomicFact> finalized;
  std::size_t index = 0;
  for (const auto& group : groups) {
    if (group.members.empty()) throw ValidationError("cannot finalize an empty fact group");
    AtomicFact fact = group.members[group.representative];
    fact.id = fmt::format("{}-k{}", id_prefix, index++);
    fact.source_ids.clear();
    for (const auto& m : group.members) fact.source_ids.push_back(m.id);
    std::sort(fact.source_ids.begin(), fact.source_ids.end());
    finalized.push_back(std::move(fact));
  }
  return finalized;
}

QualityScore score_quality(const AtomicFact& fact, Judge& judge,
                           const QualityThresholds& thresholds) {
  auto resp = judge.complete(get_template(TemplateId::Quality), {{"fact", fact.text}});
  QualityScore score;
  score.confidence = resp.data.at("confidence").get<double>();
  score.completeness = resp.data.at("completeness").get<double>();
  score.actionability = resp.data.at("actionability").get<double>();
  score.passed = score.confidence >= thresholds.confidence &&
                 score.completeness >= thresholds.completeness &&
                 score.actionability >= thresholds.actionability;
  return score;
}

}  // namespace dgeval

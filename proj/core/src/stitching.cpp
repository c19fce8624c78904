#include "dgeval/stitching.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include <fmt/format.h>

#include "dgeval/alignment.hpp"
#include "dgeval/extraction.hpp"
#include "dgeval/judge.hpp"

namespace dgeval {

PersonaConfig PersonaConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError(fmt::format("cannot open persona config '{}'", path.string()));
  PersonaConfig cfg;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string trimmed = line;
    auto first = trimmed.find_first_not_of(" \t");
    if (first == std::string::npos || trimmed[first] == '#') continue;
    auto eq = trimmed.find('=');
    if (eq == std::string::npos) {
      throw ValidationError(
          fmt::format("{}:{}: expected 'key = value'", path.string(), line_no));
    }
    auto strip = [](std::string s) {
      auto b = s.find_first_not_of(" \t");
      if (b == std::string::npos) return std::string();
      auto e = s.find_last_not_of(" \t");
      return s.substr(b, e - b + 1);
    };
    std::string key = strip(trimmed.substr(0, eq));
    std::string value = strip(trimmed.substr(eq + 1));
    if (key.empty()) {
      throw ValidationError(fmt::format("{}:{}: empty key", path.string(), line_no));
    }
    if (key == "region") {
      cfg.region = value;
    } else if (key == "greeting_style") {
      cfg.greeting_style = value;
    } else if (key == "tone") {
      cfg.tone = value;
    } else {
      cfg.extra[key] = value;
    }
  }
  return cfg;
}

std::string PersonaConfig::describe() const {
  std::string out = fmt::format("region: {}\ngreeting_style: {}\ntone: {}", region,
                                greeting_style, tone);
  for (const auto& [key, value] : extra) {
    out += fmt::format("\n{}: {}", key, value);
  }
  return out;
}

namespace {

int count_words(const std::string& text) {
  std::istringstream in(text);
  std::string word;
  int n = 0;
  while (in >> word) ++n;
  return n;
}

}  // namespace

StitchResult stitch(const std::vector<AtomicFact>& facts, const PersonaConfig& persona,
                    const Query& query, Judge& judge) {
  if (facts.empty()) throw ValidationError("cannot stitch an empty fact list");

  // Highest confidence first; attribute groups related facts, id settles ties.
  std::vector<const AtomicFact*> ordered;
  ordered.reserve(facts.size());
  for (const auto& f : facts) ordered.push_back(&f);
  std::sort(ordered.begin(), ordered.end(), [](const AtomicFact* a, const AtomicFact* b) {
    if (a->confidence != b->confidence) return a->confidence > b->confidence;
    if (a->components.attribute != b->components.attribute) {
      return a->components.attribute < b->components.attribute;
    }
    return a->id < b->id;
  });

  std::string facts_block;
  for (const auto* f : ordered) {
    facts_block += fmt::format("- {}\n", f->text);
  }

  auto resp = judge.complete(get_template(TemplateId::Stitching),
                             {{"persona", persona.describe()},
                              {"query", query.text},
                              {"facts", facts_block}});
  StitchResult result;
  result.text = resp.data.at("text").get<std::string>();
  result.word_count = count_words(result.text);
  if (result.word_count < 150) {
    result.warnings.push_back(
        fmt::format("response has {} words, below the 150-word guideline", result.word_count));
  } else if (result.word_count > 300) {
    result.warnings.push_back(
        fmt::format("response has {} words, above the 300-word guideline", result.word_count));
  }
  return result;
}

FaithfulnessResult verify_faithfulness(const std::vector<AtomicFact>& input_facts,
                                       const std::string& response, Judge& judge,
                                       const UnitTable& table) {
  FaithfulnessResult result;
  result.response_facts = extract_atomic_facts(response, judge, table, "resp");

  if (input_facts.empty()) {
    result.coverage = 0.0;
    result.faithful = result.response_facts.empty();
    result.extraneous = result.response_facts;
    return result;
  }

  auto match = match_facts(input_facts, result.response_facts, judge);
  std::size_t covered = input_facts.size() - match.set.unmatched_golden.size();
  result.coverage = static_cast<double>(covered) / static_cast<double>(input_facts.size());

  for (const auto& id : match.set.unmatched_generated) {
    auto it = std::find_if(result.response_facts.begin(), result.response_facts.end(),
                           [&](const AtomicFact& f) { return f.id == id; });
    if (it != result.response_facts.end()) result.extraneous.push_back(*it);
  }

  for (const auto& rf : result.response_facts) {
    for (const auto& gf : input_facts) {
      if (auto v = detect_contradiction(gf.components, rf.components)) {
        v->golden_id = gf.id;
        v->generated_id = rf.id;
        result.contradictions.push_back(std::move(*v));
      }
    }
  }

  bool conflicted = std::any_of(result.contradictions.begin(), result.contradictions.end(),
                                [](const ContradictionVerdict& v) {
                                  return v.severity == Severity::High ||
                                         v.severity == Severity::Medium;
                                });
  result.faithful = result.extraneous.empty() && !conflicted;
  return result;
}

}  // namespace dgeval

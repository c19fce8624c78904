#include "dgeval/scoring.hpp"

#include <algorithm>

#include <fmt/format.h>

#include "dgeval/judge.hpp"

namespace dgeval {

AnchorResult classify_specificity(const std::array<bool, 7>& flags) {
  AnchorResult r;
  r.flags = flags;
  r.score = static_cast<int>(std::count(flags.begin(), flags.end(), true));
  int contextual = static_cast<int>(std::count(flags.begin(), flags.end() - 1, true));
  bool actionable = flags.back();
  r.specific = contextual >= 2 && actionable;
  return r;
}

AnchorResult detect_anchors(const std::string& response, const Query& query, Judge& judge) {
  if (response.empty()) throw ValidationError("cannot score specificity of an empty response");
  auto resp = judge.complete(get_template(TemplateId::Specificity),
                             {{"query", query.text}, {"response", response}});
  std::array<bool, 7> flags{};
  for (std::size_t i = 0; i < kAnchorNames.size(); ++i) {
    flags[i] = resp.data.at("flags").at(std::string(kAnchorNames[i])).get<bool>();
  }
  AnchorResult result = classify_specificity(flags);
  for (const auto& [name, spans] : resp.data.at("evidence").items()) {
    result.evidence[name] = spans.get<std::vector<std::string>>();
  }
  return result;
}

ConversationalityScore score_conversationality(const Query& query, const std::string& response,
                                               Judge& judge) {
  if (response.empty()) {
    throw ValidationError("cannot score conversationality of an empty response");
  }
  auto resp = judge.complete(get_template(TemplateId::Conversationality),
                             {{"query", query.text}, {"response", response}});
  ConversationalityScore score;
  double sum = 0.0;
  for (std::size_t i = 0; i < kConversationalityDims.size(); ++i) {
    std::string name(kConversationalityDims[i]);
    score.dims[i] = resp.data.at("dims").at(name).get<int>();
    sum += score.dims[i];
    if (resp.data.contains("rationales") && resp.data.at("rationales").contains(name)) {
      score.rationales[i] = resp.data.at("rationales").at(name).get<std::string>();
    }
  }
  score.overall = sum / 6.0;
  return score;
}

RelevanceScore score_relevance(const Query& query, const std::string& response,
                               const std::vector<AtomicFact>& golden_facts, Judge& judge) {
  if (response.empty()) throw ValidationError("cannot score relevance of an empty response");
  std::string facts_block;
  for (const auto& f : golden_facts) {
    facts_block += fmt::format("- {}\n", f.text);
  }
  if (facts_block.empty()) facts_block = "(none provided)\n";

  auto resp = judge.complete(
      get_template(TemplateId::Relevance),
      {{"query", query.text}, {"golden_facts", facts_block}, {"response", response}});
  RelevanceScore score;
  double sum = 0.0;
  for (std::size_t i = 0; i < kRelevanceDims.size(); ++i) {
    score.dims[i] = resp.data.at("dims").at(std::string(kRelevanceDims[i])).get<int>();
    sum += score.dims[i];
  }
  score.overall = sum / 5.0;
  score.percentage = score.overall * 10.0;
  score.gaps = resp.data.at("gaps").get<std::vector<std::string>>();
  score.farmer_applicability = resp.data.at("farmer_applicability").get<std::string>();
  return score;
}

}  // namespace dgeval

#include "dgeval/prompts.hpp"

#include <regex>

#include <fmt/format.h>

namespace dgeval {

namespace {

// ===== Shipped template bodies =====
// Placeholders use {name}; literal braces in the JSON layout examples never
// collide because placeholder slots are bare lowercase words.

const char* kFactGenerationBody = R"(You are extracting atomic, verifiable agricultural facts from an advisory answer.

Atomicity: each fact must contain exactly ONE verifiable claim. A compound
recommendation like "Apply neem oil at 3ml/L in early morning every 7 days for
aphid control during flowering" must be decomposed into separate facts for the
dosage, the time of day, the repeat interval, and the crop stage.

Exclude: greetings, meta-responses ("Based on the context..."), opinion
statements, disclaimers ("Please consult an expert"), conversational fillers,
and repetitions of the question.

Confidence score per fact:
  0.9-1.0 established scientific facts
  0.7-0.8 commonly accepted practices
  0.5-0.6 traditional practices, mixed evidence
  0.3-0.4 emerging or limited evidence
  0.1-0.2 anecdotal or highly uncertain

Quality checks: each fact independently verifiable; preserve exact
measurements, quantities, and technical terms; keep facts actionable.

Answer:
---
{answer}
---

Respond with JSON only, in this layout:
{"facts": [{"text": "...", "confidence": 0.75}]}
An answer with no extractable facts yields {"facts": []}.)";

const char* kSpecificityBody = R"(You are auditing an agricultural advisory response for specificity anchors.

Question:
{query}

Response:
---
{response}
---

Evaluate seven flags, each true or false, with verbatim evidence spans copied
exactly from the response for every true flag:
  1. entity       crop / variety / soil / weather / organization named
  2. location     named place or bounded geography
  3. time         explicit time window or marker; season names (Rabi/Kharif/
                  Zaid) and relative time ("30 DAS", "pre-sowing") count
  4. quantity     numeric or measurable details
  5. conditional  if-then conditions or comparative baselines
  6. mechanistic  cause-effect explanation enabling decision-making
  7. actionable   directly informs a decision or step relevant to the context

Respond with JSON only:
{"flags": {"entity": false, "location": false, "time": false, "quantity": false,
 "conditional": false, "mechanistic": false, "actionable": false},
 "evidence": {"entity": [], "location": [], "time": [], "quantity": [],
 "conditional": [], "mechanistic": [], "actionable": []}}
Evidence arrays hold verbatim substrings of the response; leave them empty for
false flags.)";

const char* kFactMatchingBody = R"(You are deciding whether two agricultural facts state the same recommendation.

Reference fact:
{reference_fact}

Candidate fact:
{candidate_fact}

Matching priorities, in order: same crop or plant type; same agricultural
practice or technique; same measurements, dosages, or timing; same expected
outcome or benefit. Judge semantic equivalence and practical agricultural
meaning, not exact wording: "Apply NPK fertilizer" matches "Use balanced
fertilizer with nitrogen, phosphorus, and potassium"; "Sow wheat in November"
matches "Plant wheat during late autumn". A candidate that omits the
reference's dosage or timing is NOT a match.

Report a confidence in [0, 1]. A confidence below 0.7 means no match.

Respond with JSON only:
{"match": true, "confidence": 0.9, "rationale": "..."})";

const char* kContradictionBody = R"(You are normalizing an agricultural fact into components for contradiction
screening.

Fact:
{fact}

Normalize: lowercase; canonical units (kg/ha, ml/l, %); then report the
components used by the ordered comparison rules below:
  subject    the entity acted on (crop, pest, chemical, input)
  attribute  the property or aspect addressed (dosage, timing, method, ...)
  timing     time expression or season if stated, else ""
  method     practice or technique if stated, else ""

The downstream rules, applied in order on same-subject pairs: (1) opposite
polarity on the same property is a High contradiction; (2) non-overlapping
numeric ranges are High, small overlap under 50% is Medium, quantities apart
by more than 2x are Medium to High; (3) absolutes ("never"/"always") directly
opposed by qualified claims contradict; (4) direct opposites such as "water
daily" vs "avoid daily watering" are High; (5) different methods for the same
goal do not contradict; (6) different nutrients do not contradict; (7)
different operating scales do not contradict.

Respond with JSON only:
{"subject": "...", "attribute": "...", "timing": "", "method": ""})";

const char* kRelevanceBody = R"(You are scoring how well a response serves the farmer's question.

Question:
{query}

Ground truth facts:
{golden_facts}

Response:
---
{response}
---

Score five dimensions, each an integer 1-10:
  direct_relevance          does it directly answer the question?
  ground_truth_consistency  does it align with or complement the ground facts?
  practical_implementation  can farmers easily apply this advice?
  specificity               does it provide enough detail for action?
  agricultural_soundness    is the advice scientifically and practically sound?

Also list gaps or missing details, and give a short farmer_applicability
statement on implementation ease.

Respond with JSON only:
{"dims": {"direct_relevance": 5, "ground_truth_consistency": 5,
 "practical_implementation": 5, "specificity": 5, "agricultural_soundness": 5},
 "gaps": [], "farmer_applicability": "..."})";

const char* kStitchingBody = R"(You are an experienced agricultural extension officer with deep expertise in
the region's farming practices. Your tone is warm, supportive, and
educational, balancing scientific accuracy with practical advice.

Persona configuration:
{persona}

Farmer's question:
{query}

Verified facts (highest confidence first):
{facts}

Compose one response following these rules:
  1. Natural flow: weave the facts into cohesive paragraphs with transitions;
     never list them mechanically.
  2. Contextual integration: facts are ordered by confidence; group related
     ones; add brief rationale; connect to local conditions.
  3. Farmer-centric: lead with the most actionable step; explain why, not
     just what; simple language.
  4. Structure: opening with the direct answer, body, benefits, practical
     tips, closing encouragement or follow-up.
  5. Quality: preserve every quantity exactly as given; do not add any
     information beyond the provided facts; keep 150-300 words.

Avoid robotic listing, academic language, claims beyond the provided facts,
dismissing farmer practices, and unexplained jargon.

Respond with the response text only, no JSON.)";

const char* kConversationalityBody = R"(You are rating an agricultural advisory response against conversational
persona guidelines.

Question:
{query}

Response:
---
{response}
---

Score six dimensions, each an integer 1-5, with a one-line rationale each:
  content_quality      addresses the specific concern directly; actionable,
                       region-appropriate advice with timing and local examples
  communication_style  warm, professional, encouraging; simple conversational
                       language; technical ideas explained plainly
  practical_advice     low-cost accessible solutions; smallholder resource
                       constraints; local input availability; prevention
  safety_credibility   general chemical categories over brands; safety
                       precautions; encourages local expert consultation
  conversation_flow    builds on context, avoids repetition, invites follow-up
  response_format      natural structure, logically organized, 150-300 words,
                       no generic filler or jargon

Respond with JSON only:
{"dims": {"content_quality": 3, "communication_style": 3, "practical_advice": 3,
 "safety_credibility": 3, "conversation_flow": 3, "response_format": 3},
 "rationales": {"content_quality": "...", "communication_style": "...",
 "practical_advice": "...", "safety_credibility": "...",
 "conversation_flow": "...", "response_format": "..."}})";

const char* kQualityBody = R"(You are scoring a synthetic agricultural fact before it may join the curated
fact set.

Fact:
{fact}

Score three dimensions, each a real number in [0, 1]:
  confidence     how well-established the claim is
  completeness   whether the fact carries the parameters (dosage, timing,
                 method) needed to act on it
  actionability  whether a farmer can implement it directly

Respond with JSON only:
{"confidence": 0.8, "completeness": 0.8, "actionability": 0.8})";

std::vector<PromptTemplate> build_templates() {
  auto make = [](TemplateId id, std::string name, std::string schema, const char* body,
                 std::vector<std::string> placeholders) {
    return PromptTemplate{id, std::move(name), std::move(schema), body,
                          std::move(placeholders)};
  };
  return {
      make(TemplateId::FactGeneration, "fact_generation", "facts_list", kFactGenerationBody,
           {"answer"}),
      make(TemplateId::Specificity, "specificity", "anchor_flags", kSpecificityBody,
           {"query", "response"}),
      make(TemplateId::FactMatching, "fact_matching", "match", kFactMatchingBody,
           {"reference_fact", "candidate_fact"}),
      make(TemplateId::Contradiction, "contradiction", "components", kContradictionBody,
           {"fact"}),
      make(TemplateId::Relevance, "relevance", "relevance", kRelevanceBody,
           {"query", "golden_facts", "response"}),
      make(TemplateId::Stitching, "stitching", "text", kStitchingBody,
           {"persona", "query", "facts"}),
      make(TemplateId::Conversationality, "conversationality", "conversationality",
           kConversationalityBody, {"query", "response"}),
      make(TemplateId::Quality, "quality", "quality", kQualityBody, {"fact"}),
  };
}

}  // namespace

const std::vector<PromptTemplate>& all_templates() {
  static const std::vector<PromptTemplate> templates = build_templates();
  return templates;
}

const PromptTemplate& get_template(TemplateId id) {
  for (const auto& t : all_templates()) {
    if (t.id == id) return t;
  }
  throw ValidationError("unknown template id");
}

const PromptTemplate& get_template(std::string_view name) {
  for (const auto& t : all_templates()) {
    if (t.name == name) return t;
  }
  throw ValidationError(fmt::format("unknown template name '{}'", name));
}

std::string render(const PromptTemplate& tpl, const std::map<std::string, std::string>& bindings) {
  for (const auto& name : tpl.placeholders) {
    if (!bindings.count(name)) {
      throw ValidationError(fmt::format("missing binding: {}", name));
    }
  }
  // Single pass over the body; substituted values are never re-scanned, so a
  // fact text containing "{days}" cannot trigger a second substitution.
  static const std::regex slot_re("\\{([a-z_]+)\\}");
  std::string out;
  out.reserve(tpl.body.size());
  std::size_t last = 0;
  auto begin = std::sregex_iterator(tpl.body.begin(), tpl.body.end(), slot_re);
  for (auto it = begin; it != std::sregex_iterator(); ++it) {
    std::string name = (*it)[1].str();
    auto b = bindings.find(name);
    if (b == bindings.end()) {
      throw ValidationError(fmt::format("missing binding: {}", name));
    }
    out.append(tpl.body, last, static_cast<std::size_t>(it->position()) - last);
    out.append(b->second);
    last = static_cast<std::size_t>(it->position() + it->length());
  }
  out.append(tpl.body, last, std::string::npos);
  return out;
}

}  // namespace dgeval

#pragma once

#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "dgeval/errors.hpp"

namespace dgeval {

enum class TemplateId {
  FactGeneration,
  Specificity,
  FactMatching,
  Contradiction,
  Relevance,
  Stitching,
  Conversationality,
  Quality,
};

struct PromptTemplate {
  TemplateId id;
  std::string name;    // stable id string used in fixture keys
  std::string schema;  // output schema tag, see judge.cpp validators
  std::string body;    // text with {placeholder} slots
  std::vector<std::string> placeholders;
};

const PromptTemplate& get_template(TemplateId id);
const PromptTemplate& get_template(std::string_view name);
const std::vector<PromptTemplate>& all_templates();

// Deterministic placeholder substitution. Throws ValidationError naming the
// placeholder when a binding is missing, or when a {slot} survives rendering.
std::string render(const PromptTemplate& tpl, const std::map<std::string, std::string>& bindings);

}  // namespace dgeval

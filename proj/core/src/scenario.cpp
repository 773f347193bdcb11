#include "turnwise/scenario.hpp"

#include <cctype>

#include <nlohmann/json.hpp>

#include "turnwise/error.hpp"
#include "turnwise/text_template.hpp"

namespace turnwise {

namespace {

using nlohmann::json;

constexpr std::string_view kScenarioPromptTemplate =
    R"(You are a creative scenario writer. Your task is to generate a single, detailed scenario JSON object based on a user's question and its detailed background.

Input Information:
1. Question Title: {question_title}
2. Question Content: {question_content}
3. Best Answer: {best_answer}

Task: Based on the provided information, create a complete scenario by performing these steps:
1. Invent a Social Context: Create a one-sentence context describing who would be discussing this topic.
2. Select an Intervention Type: Choose the most logical ai_intervention_type from: [Factual Correction, Concept Definition, Data Provision, Source Identification, Synthesis & Reframing].

Output Format: You must output ONLY the raw JSON object with the following structure:
{ "social_context": "your one-sentence context here", "intervention_type": "selected intervention type here" })";

// Lowercases, maps "&" to "and", collapses punctuation/whitespace runs to a
// single space. "SYNTHESIS & Reframing." and "synthesis and reframing" meet.
std::string normalize_label(std::string_view label) {
  std::string out;
  out.reserve(label.size());
  bool pending_space = false;
  auto push = [&](char c) {
    if (pending_space && !out.empty()) out.push_back(' ');
    pending_space = false;
    out.push_back(c);
  };
  for (std::size_t i = 0; i < label.size(); ++i) {
    unsigned char c = static_cast<unsigned char>(label[i]);
    if (std::isalnum(c)) {
      push(static_cast<char>(std::tolower(c)));
    } else if (c == '&') {
      push('a');
      out.push_back('n');
      out.push_back('d');
    } else {
      pending_space = true;
    }
  }
  return out;
}

}  // namespace

std::string_view intervention_type_label(InterventionType type) {
  switch (type) {
    case InterventionType::factual_correction: return "Factual Correction";
    case InterventionType::concept_definition: return "Concept Definition";
    case InterventionType::data_provision: return "Data Provision";
    case InterventionType::source_identification: return "Source Identification";
    case InterventionType::synthesis_reframing: return "Synthesis & Reframing";
  }
  return "Factual Correction";
}

std::optional<InterventionType> try_parse_intervention_type(std::string_view label) {
  const std::string needle = normalize_label(label);
  for (InterventionType type : kAllInterventionTypes) {
    if (needle == normalize_label(intervention_type_label(type))) return type;
  }
  return std::nullopt;
}

InterventionType parse_intervention_type(std::string_view label) {
  if (auto type = try_parse_intervention_type(label)) return *type;
  throw Error(Errc::unknown_intervention_type, std::string(label));
}

std::string build_scenario_prompt(const SourceRecord& record) {
  return render_template(kScenarioPromptTemplate,
                         {{"question_title", record.question_title},
                          {"question_content", record.question_content},
                          {"best_answer", record.best_answer}});
}

Scenario parse_scenario_response(std::string_view raw, std::int64_t record_id) {
  const std::string body = strip_code_fences(raw);
  json parsed = json::parse(body, nullptr, false);
  if (parsed.is_discarded() || !parsed.is_object()) {
    throw Error(Errc::malformed_response, "response is not a JSON object");
  }
  if (!parsed.contains("social_context") || !parsed.contains("intervention_type")) {
    throw Error(Errc::malformed_response, "missing scenario field");
  }
  if (!parsed["social_context"].is_string() || !parsed["intervention_type"].is_string()) {
    throw Error(Errc::malformed_response, "scenario field is not a string");
  }
  Scenario scenario;
  scenario.record_id = record_id;
  scenario.social_context = parsed["social_context"].get<std::string>();
  scenario.intervention_type =
      parse_intervention_type(parsed["intervention_type"].get<std::string>());
  if (scenario.social_context.empty()) {
    throw Error(Errc::malformed_response, "empty social_context");
  }
  return scenario;
}

std::string serialize_scenario(const Scenario& scenario) {
  json j{{"social_context", scenario.social_context},
         {"intervention_type",
          std::string(intervention_type_label(scenario.intervention_type))}};
  return j.dump();
}

}  // namespace turnwise

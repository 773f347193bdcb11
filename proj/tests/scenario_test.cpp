#include <doctest.h>

#include <string>
#include <vector>

#include "turnwise/error.hpp"
#include "turnwise/scenario.hpp"

using namespace turnwise;

namespace {

SourceRecord record_with(std::string title, std::string content, std::string answer) {
  SourceRecord record;
  record.id = 42;
  record.question_title = std::move(title);
  record.question_content = std::move(content);
  record.best_answer = std::move(answer);
  return record;
}

}  // namespace

TEST_CASE("scenario prompt substitutes the three record fields") {
  const std::string prompt = build_scenario_prompt(record_with("T", "C", "A"));
  CHECK(prompt.find("Question Title: T") != std::string::npos);
  CHECK(prompt.find("Question Content: C") != std::string::npos);
  CHECK(prompt.find("Best Answer: A") != std::string::npos);
  CHECK(prompt.find("{question_title}") == std::string::npos);
  CHECK(prompt.find("{question_content}") == std::string::npos);
  CHECK(prompt.find("{best_answer}") == std::string::npos);
}

TEST_CASE("scenario prompt lists all five intervention types") {
  const std::string prompt = build_scenario_prompt(record_with("T", "C", "A"));
  for (InterventionType type : kAllInterventionTypes) {
    CHECK(prompt.find(std::string(intervention_type_label(type))) !=
          std::string::npos);
  }
  CHECK(prompt.find("Select an Intervention Type") != std::string::npos);
}

TEST_CASE("substitution is single-pass, never recursive") {
  const std::string prompt =
      build_scenario_prompt(record_with("{best_answer}", "C", "real answer"));
  // The title slot keeps the literal placeholder text from the field value.
  CHECK(prompt.find("Question Title: {best_answer}") != std::string::npos);
  CHECK(prompt.find("Best Answer: real answer") != std::string::npos);
  // Exactly one occurrence: the one carried by the field.
  const std::size_t first = prompt.find("{best_answer}");
  CHECK(prompt.find("{best_answer}", first + 1) == std::string::npos);
}

TEST_CASE("identical records produce byte-identical prompts") {
  const SourceRecord record = record_with("same title", "same content", "same answer");
  CHECK(build_scenario_prompt(record) == build_scenario_prompt(record));
}

TEST_CASE("parse_scenario_response reads a raw JSON object") {
  const Scenario scenario = parse_scenario_response(
      R"({"social_context":"s","intervention_type":"Data Provision"})", 7);
  CHECK(scenario.record_id == 7);
  CHECK(scenario.social_context == "s");
  CHECK(scenario.intervention_type == InterventionType::data_provision);
}

TEST_CASE("parse_scenario_response strips code fences and whitespace") {
  const std::string object =
      R"({"social_context":"fenced works","intervention_type":"Concept Definition"})";
  const Scenario expected = parse_scenario_response(object);

  const std::vector<std::string> wrappers = {
      "```\n" + object + "\n```",
      "```json\n" + object + "\n```",
      "\n\n  " + object + "  \n",
      "  ```json\n" + object + "\n```  \n",
  };
  for (const std::string& raw : wrappers) {
    CAPTURE(raw);
    CHECK(parse_scenario_response(raw) == expected);
  }
}

TEST_CASE("parse_scenario_response rejects malformed responses") {
  const auto code_of = [](const std::string& raw) {
    try {
      parse_scenario_response(raw);
    } catch (const Error& e) {
      return e.code();
    }
    return Errc::io_error;
  };
  CHECK(code_of("not json at all") == Errc::malformed_response);
  CHECK(code_of(R"(["a","b"])") == Errc::malformed_response);
  CHECK(code_of(R"({"social_context":"s"})") == Errc::malformed_response);
  CHECK(code_of(R"({"social_context":"","intervention_type":"Data Provision"})") ==
        Errc::malformed_response);
  CHECK(code_of(R"({"social_context":"s","intervention_type":"Moderation"})") ==
        Errc::unknown_intervention_type);
}

TEST_CASE("intervention labels are matched leniently") {
  CHECK(parse_intervention_type("data provision") == InterventionType::data_provision);
  CHECK(parse_intervention_type("SYNTHESIS & REFRAMING") ==
        InterventionType::synthesis_reframing);
  CHECK(parse_intervention_type("Synthesis and Reframing") ==
        InterventionType::synthesis_reframing);
  CHECK(parse_intervention_type("  factual correction. ") ==
        InterventionType::factual_correction);
  CHECK(!try_parse_intervention_type("none"));
}

TEST_CASE("intervention labels round-trip") {
  for (InterventionType type : kAllInterventionTypes) {
    CHECK(parse_intervention_type(intervention_type_label(type)) == type);
  }
}

TEST_CASE("serialize then parse yields an equal scenario") {
  for (InterventionType type : kAllInterventionTypes) {
    Scenario scenario;
    scenario.record_id = 3;
    scenario.social_context = "a book club plotting its next read";
    scenario.intervention_type = type;
    CHECK(parse_scenario_response(serialize_scenario(scenario), 3) == scenario);
  }
}

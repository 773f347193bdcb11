#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

#include "turnwise/corpus.hpp"

namespace turnwise {

/// The five categories of warranted agent contribution.
enum class InterventionType {
  factual_correction,
  concept_definition,
  data_provision,
  source_identification,
  synthesis_reframing,
};

inline constexpr std::array<InterventionType, 5> kAllInterventionTypes = {
    InterventionType::factual_correction,
    InterventionType::concept_definition,
    InterventionType::data_provision,
    InterventionType::source_identification,
    InterventionType::synthesis_reframing,
};

/// Canonical display label, e.g. "Synthesis & Reframing".
std::string_view intervention_type_label(InterventionType type);

/// Lenient label lookup: case-insensitive, "&" and "and" interchangeable,
/// surrounding punctuation ignored.
std::optional<InterventionType> try_parse_intervention_type(std::string_view label);

/// As above but throws Errc::unknown_intervention_type.
InterventionType parse_intervention_type(std::string_view label);

/// Inferred conversational metadata for one source record.
struct Scenario {
  std::int64_t record_id = 0;
  std::string social_context;
  InterventionType intervention_type = InterventionType::factual_correction;

  bool operator==(const Scenario&) const = default;
};

/// Scenario-writer prompt with the record's three fields substituted.
/// Substitution is single-pass: a placeholder token inside a field value is
/// left verbatim.
std::string build_scenario_prompt(const SourceRecord& record);

/// Extracts (social_context, intervention_type) from a model response.
/// Tolerates surrounding whitespace and triple-backtick code fences.
/// Throws Errc::malformed_response / Errc::unknown_intervention_type.
Scenario parse_scenario_response(std::string_view raw, std::int64_t record_id = 0);

/// One JSON object; parse_scenario_response round-trips it.
std::string serialize_scenario(const Scenario& scenario);

}  // namespace turnwise

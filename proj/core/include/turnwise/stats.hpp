#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "turnwise/scenario.hpp"
#include "turnwise/transcript.hpp"

namespace turnwise {

struct TypeCount {
  std::int64_t count = 0;
  double fraction = 0.0;
};

struct CorpusStats {
  std::int64_t conv_count = 0;
  double interventions_mean = 0.0;
  double interventions_median = 0.0;
  double interventions_std = 0.0;  // population
  double direct_address_fraction = 0.0;
  double no_invitation_fraction = 0.0;
  double zero_intervention_fraction = 0.0;
  double disagreement_fraction = 0.0;
  std::int64_t speak_turn_count = 0;
  // Both countings: once per SPEAK turn, and once per conversation.
  std::map<InterventionType, TypeCount> type_histogram;
  std::map<InterventionType, TypeCount> type_histogram_conversations;
};

const std::vector<std::string>& default_disagreement_markers();

/// True iff the most recent human turn in the context names the agent tag
/// (case-insensitive). Earlier mentions do not count.
bool detect_direct_address(std::span<const Turn> context);

/// True iff any human turn contains any marker as a case-insensitive
/// word-boundary match.
bool detect_disagreement(const Transcript& transcript,
                         std::span<const std::string> markers);

/// Corpus statistics over validated transcripts. Throws Errc::empty_corpus.
/// Pass an empty marker list to use the defaults.
CorpusStats analyze(std::span<const Transcript> transcripts,
                    std::span<const std::string> markers = {});

std::string stats_to_json(const CorpusStats& stats);

}  // namespace turnwise

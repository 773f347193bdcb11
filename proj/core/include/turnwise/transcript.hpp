#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "turnwise/corpus.hpp"
#include "turnwise/scenario.hpp"

namespace turnwise {

/// Token the embedded agent emits to stay silent at a turn.
inline constexpr std::string_view kSilenceToken = ">";
inline constexpr std::string_view kAgentTag = "[AGENT]";

inline constexpr int kMinHumans = 2;
inline constexpr int kMaxHumans = 6;
inline constexpr int kMinExchanges = 20;
inline constexpr int kMaxInterventions = 3;

inline constexpr std::array<std::string_view, 6> kConversationStyles = {
    "with frequent disagreements and debates",
    "with participants building on each other's ideas collaboratively",
    "with a mix of experts and novices asking clarifying questions",
    "with storytelling and personal anecdotes",
    "with structured turn-taking and formal language",
    "with casual, overlapping dialogue and interruptions",
};

inline constexpr std::array<std::string_view, 5> kToneVariations = {
    "enthusiastic and energetic",
    "thoughtful and contemplative",
    "professional and business-like",
    "casual and friendly",
    "curious and inquisitive",
};

inline constexpr std::array<std::string_view, 4> kFollowUpBehaviors = {
    "ask a follow up question, to which [AGENT] should respond appropriately.",
    "refute what [AGENT] is saying, to which [AGENT] should give a deeper explanation.",
    "agree to what [AGENT] is saying, acknowledge it, and move on with the conversation.",
    "completely disregard what [AGENT] says and move on with the conversation.",
};

/// Sampled generation controls for one transcript.
struct GenerationSpec {
  std::string style;
  std::string tone;
  std::string follow_up;
  int human_count = kMinHumans;
  std::uint64_t seed = 0;

  bool operator==(const GenerationSpec&) const = default;
};

/// Human(k) or the embedded agent.
class Speaker {
 public:
  static Speaker agent() { return Speaker(-1); }
  static Speaker human(int k) { return Speaker(k); }

  bool is_agent() const { return index_ < 0; }
  bool is_human() const { return index_ >= 0; }
  int human_index() const { return index_; }

  /// "Speaker_3" or "[AGENT]".
  std::string tag() const;

  bool operator==(const Speaker&) const = default;

 private:
  explicit Speaker(int index) : index_(index) {}
  int index_;
};

/// Parses "Speaker_3" / "[AGENT]". Throws Errc::unknown_speaker_tag.
Speaker parse_speaker_tag(std::string_view tag);

struct Turn {
  Speaker speaker = Speaker::agent();
  std::string text;
  int index = 0;

  bool is_agent_silence() const {
    return speaker.is_agent() && text == kSilenceToken;
  }
  bool is_intervention() const {
    return speaker.is_agent() && text != kSilenceToken;
  }

  bool operator==(const Turn&) const = default;
};

struct Transcript {
  std::string conversation_id;
  std::vector<Turn> turns;
  GenerationSpec spec;
  Scenario scenario;
};

enum class Violation {
  exchange_count_below_20,
  too_many_interventions,
  speaker_count_out_of_range,
  non_contiguous_speakers,
  broken_alternation,
};

enum class TranscriptWarning {
  zero_interventions,
};

const char* violation_name(Violation v);
const char* transcript_warning_name(TranscriptWarning w);

struct ValidationReport {
  int exchange_count = 0;
  int intervention_count = 0;
  int distinct_humans = 0;
  std::vector<Violation> violations;
  std::vector<TranscriptWarning> warnings;

  bool accepted() const { return violations.empty(); }
};

/// Draws style, tone and follow-up uniformly from their lists and the human
/// count uniformly from [2,6]. Deterministic in the seed.
GenerationSpec sample_spec(std::uint64_t rng_seed);

/// Data-generator prompt with all controls and scenario fields substituted.
std::string build_transcript_prompt(const SourceRecord& record,
                                    const Scenario& scenario,
                                    const GenerationSpec& spec);

/// Parses `tag: text` lines into turns. Blank lines are skipped, whitespace
/// around tag and text is trimmed. Throws Errc::empty_transcript,
/// Errc::malformed_line, Errc::unknown_speaker_tag.
std::vector<Turn> parse_transcript(std::string_view raw);

/// Re-emits `tag: text` lines; parse_transcript is its inverse on well-formed
/// transcripts.
std::string render_transcript(std::span<const Turn> turns);

/// Total check of the generation constraints. Never throws; violations make
/// the transcript rejected, warnings do not.
ValidationReport validate_transcript(const Transcript& transcript);

}  // namespace turnwise

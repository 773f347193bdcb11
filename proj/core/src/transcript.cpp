#include "turnwise/transcript.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <set>
#include <sstream>

#include "turnwise/error.hpp"
#include "turnwise/rng.hpp"
#include "turnwise/text_template.hpp"

namespace turnwise {

namespace {

constexpr std::string_view kTranscriptPromptTemplate =
    R"(You are a sophisticated data generator. Your task is to generate a realistic group discussion transcript based on the provided scenario.

Rules:
1. The discussion must feature {human_count} human participants and one AI assistant named [AGENT].
2. [AGENT] appears only a few times (1-3 times), with a meaningful intervention.
3. The discussion should feel natural, with a clear trigger for [AGENT]'s intervention.
4. After [AGENT] speaks, humans should react naturally and continue the discussion.
5. Generate a relatively decent-sized conversation (at least 20 exchanges total).
6. Make the conversation {selected_style} and maintain a {selected_tone} tone.
7. Each participant should have a distinct personality and speaking style.
8. Output only the conversation, DO NOT OUTPUT ANYTHING BUT THE CONVERSATION.
9. After every human speaking, if the AI is not adding something meaningful to the conversation, add - [AGENT]: >
10. Make [AGENT]'s intervention natural; do not include numbered lists or bullet points.
11. When the user asks a question to [AGENT] directly, and it responds, the user should {follow_up}
12. The participants should treat [AGENT] like their AI partner in the conversation.
13. There should be no punctuation marks in your output.
14. Do not use names; use Speaker_0, Speaker_1, etc.
15. Do not have the users address [AGENT] explicitly unless needed in the follow-up.

Scenario Details:
- Topic: {question_title}
- Initial Question: {question_content}
- Context: {context}
- AI Intervention Type: {intervention_type}
- Reference Answer (for context): {best_answer})";

std::string_view trim(std::string_view s) {
  std::size_t begin = 0;
  std::size_t end = s.size();
  while (begin < end && std::isspace(static_cast<unsigned char>(s[begin]))) ++begin;
  while (end > begin && std::isspace(static_cast<unsigned char>(s[end - 1]))) --end;
  return s.substr(begin, end - begin);
}

}  // namespace

std::string Speaker::tag() const {
  if (is_agent()) return std::string(kAgentTag);
  return "Speaker_" + std::to_string(index_);
}

Speaker parse_speaker_tag(std::string_view tag) {
  if (tag == kAgentTag) return Speaker::agent();
  constexpr std::string_view prefix = "Speaker_";
  if (tag.size() > prefix.size() && tag.substr(0, prefix.size()) == prefix) {
    const std::string_view digits = tag.substr(prefix.size());
    int index = 0;
    const auto [ptr, ec] =
        std::from_chars(digits.data(), digits.data() + digits.size(), index);
    if (ec == std::errc() && ptr == digits.data() + digits.size() && index >= 0) {
      return Speaker::human(index);
    }
  }
  throw Error(Errc::unknown_speaker_tag, std::string(tag));
}

const char* violation_name(Violation v) {
  switch (v) {
    case Violation::exchange_count_below_20: return "ExchangeCountBelow20";
    case Violation::too_many_interventions: return "TooManyInterventions";
    case Violation::speaker_count_out_of_range: return "SpeakerCountOutOfRange";
    case Violation::non_contiguous_speakers: return "NonContiguousSpeakers";
    case Violation::broken_alternation: return "BrokenAlternation";
  }
  return "Unknown";
}

const char* transcript_warning_name(TranscriptWarning w) {
  switch (w) {
    case TranscriptWarning::zero_interventions: return "ZeroInterventions";
  }
  return "Unknown";
}

GenerationSpec sample_spec(std::uint64_t rng_seed) {
  Rng rng(rng_seed);
  GenerationSpec spec;
  spec.style = std::string(kConversationStyles[rng.below(kConversationStyles.size())]);
  spec.tone = std::string(kToneVariations[rng.below(kToneVariations.size())]);
  spec.follow_up = std::string(kFollowUpBehaviors[rng.below(kFollowUpBehaviors.size())]);
  spec.human_count =
      kMinHumans + static_cast<int>(rng.below(kMaxHumans - kMinHumans + 1));
  spec.seed = rng_seed;
  return spec;
}

std::string build_transcript_prompt(const SourceRecord& record,
                                    const Scenario& scenario,
                                    const GenerationSpec& spec) {
  return render_template(
      kTranscriptPromptTemplate,
      {{"human_count", std::to_string(spec.human_count)},
       {"selected_style", spec.style},
       {"selected_tone", spec.tone},
       {"follow_up", spec.follow_up},
       {"question_title", record.question_title},
       {"question_content", record.question_content},
       {"context", scenario.social_context},
       {"intervention_type", intervention_type_label(scenario.intervention_type)},
       {"best_answer", record.best_answer}});
}

std::vector<Turn> parse_transcript(std::string_view raw) {
  std::vector<Turn> turns;
  std::size_t pos = 0;
  while (pos <= raw.size()) {
    const std::size_t eol = raw.find('\n', pos);
    const std::string_view line =
        raw.substr(pos, eol == std::string_view::npos ? raw.size() - pos : eol - pos);
    pos = eol == std::string_view::npos ? raw.size() + 1 : eol + 1;

    const std::string_view stripped = trim(line);
    if (stripped.empty()) continue;

    const std::size_t colon = stripped.find(':');
    if (colon == std::string_view::npos) {
      throw Error(Errc::malformed_line, std::string(stripped));
    }
    const std::string_view tag = trim(stripped.substr(0, colon));
    const std::string_view text = trim(stripped.substr(colon + 1));
    if (text.empty()) {
      throw Error(Errc::malformed_line, "empty text: " + std::string(stripped));
    }
    Turn turn;
    turn.speaker = parse_speaker_tag(tag);
    turn.text = std::string(text);
    turn.index = static_cast<int>(turns.size());
    turns.push_back(std::move(turn));
  }
  if (turns.empty()) throw Error(Errc::empty_transcript, "no turns");
  return turns;
}

std::string render_transcript(std::span<const Turn> turns) {
  std::ostringstream out;
  for (const Turn& turn : turns) {
    out << turn.speaker.tag() << ": " << turn.text << '\n';
  }
  return out.str();
}

ValidationReport validate_transcript(const Transcript& transcript) {
  ValidationReport report;
  const auto& turns = transcript.turns;
  report.exchange_count = static_cast<int>(turns.size());

  std::set<int> humans;
  for (const Turn& turn : turns) {
    if (turn.is_intervention()) ++report.intervention_count;
    if (turn.speaker.is_human()) humans.insert(turn.speaker.human_index());
  }
  report.distinct_humans = static_cast<int>(humans.size());

  auto flag = [&report](Violation v) {
    if (std::find(report.violations.begin(), report.violations.end(), v) ==
        report.violations.end()) {
      report.violations.push_back(v);
    }
  };

  if (report.exchange_count < kMinExchanges) {
    flag(Violation::exchange_count_below_20);
  }
  if (report.intervention_count > kMaxInterventions) {
    flag(Violation::too_many_interventions);
  }
  if (report.distinct_humans < kMinHumans || report.distinct_humans > kMaxHumans ||
      report.distinct_humans != transcript.spec.human_count) {
    flag(Violation::speaker_count_out_of_range);
  }
  if (!humans.empty() && (*humans.begin() != 0 ||
                          *humans.rbegin() != report.distinct_humans - 1)) {
    flag(Violation::non_contiguous_speakers);
  }

  // Rule 9: every human line has an agent line right after it, and the agent
  // never opens.
  if (!turns.empty() && turns.front().speaker.is_agent()) {
    flag(Violation::broken_alternation);
  }
  for (std::size_t i = 0; i < turns.size(); ++i) {
    if (!turns[i].speaker.is_human()) continue;
    if (i + 1 >= turns.size() || !turns[i + 1].speaker.is_agent()) {
      flag(Violation::broken_alternation);
    }
  }

  if (report.intervention_count == 0) {
    report.warnings.push_back(TranscriptWarning::zero_interventions);
  }
  return report;
}

}  // namespace turnwise

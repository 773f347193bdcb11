#include "turnwise/stats.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

#include <nlohmann/json.hpp>

#include "turnwise/error.hpp"

namespace turnwise {

namespace {

using nlohmann::json;

bool is_word_char(unsigned char c) { return std::isalnum(c) != 0; }

char ascii_lower(unsigned char c) {
  return static_cast<char>(std::tolower(c));
}

// Case-insensitive substring scan with word boundaries at both ends of the
// match. The marker may span several words ("no that's not").
bool contains_marker(std::string_view text, std::string_view marker) {
  if (marker.empty() || marker.size() > text.size()) return false;
  for (std::size_t pos = 0; pos + marker.size() <= text.size(); ++pos) {
    bool hit = true;
    for (std::size_t k = 0; k < marker.size(); ++k) {
      if (ascii_lower(static_cast<unsigned char>(text[pos + k])) !=
          ascii_lower(static_cast<unsigned char>(marker[k]))) {
        hit = false;
        break;
      }
    }
    if (!hit) continue;
    const bool left_ok =
        pos == 0 || !is_word_char(static_cast<unsigned char>(text[pos - 1]));
    const std::size_t end = pos + marker.size();
    const bool right_ok =
        end == text.size() || !is_word_char(static_cast<unsigned char>(text[end]));
    if (left_ok && right_ok) return true;
  }
  return false;
}

double population_std(std::span<const int> values, double mean) {
  if (values.empty()) return 0.0;
  double sum_sq = 0.0;
  for (int v : values) {
    const double d = static_cast<double>(v) - mean;
    sum_sq += d * d;
  }
  return std::sqrt(sum_sq / static_cast<double>(values.size()));
}

double median_of_sorted(std::vector<int>& values) {
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  if (n == 0) return 0.0;
  if (n % 2 == 1) return static_cast<double>(values[n / 2]);
  return (static_cast<double>(values[n / 2 - 1]) +
          static_cast<double>(values[n / 2])) /
         2.0;
}

json histogram_to_json(const std::map<InterventionType, TypeCount>& histogram) {
  json out = json::object();
  for (const auto& [type, cell] : histogram) {
    out[std::string(intervention_type_label(type))] = {
        {"count", cell.count}, {"fraction", cell.fraction}};
  }
  return out;
}

}  // namespace

const std::vector<std::string>& default_disagreement_markers() {
  static const std::vector<std::string> markers = {
      "disagree", "wrong", "no that's not", "i don't think", "actually",
  };
  return markers;
}

bool detect_direct_address(std::span<const Turn> context) {
  for (auto it = context.rbegin(); it != context.rend(); ++it) {
    if (!it->speaker.is_human()) continue;
    // Only the immediately preceding human turn counts as a solicitation.
    std::string_view text = it->text;
    for (std::size_t pos = 0; pos + kAgentTag.size() <= text.size(); ++pos) {
      bool hit = true;
      for (std::size_t k = 0; k < kAgentTag.size(); ++k) {
        if (ascii_lower(static_cast<unsigned char>(text[pos + k])) !=
            ascii_lower(static_cast<unsigned char>(kAgentTag[k]))) {
          hit = false;
          break;
        }
      }
      if (hit) return true;
    }
    return false;
  }
  return false;
}

bool detect_disagreement(const Transcript& transcript,
                         std::span<const std::string> markers) {
  for (const Turn& turn : transcript.turns) {
    if (!turn.speaker.is_human()) continue;
    for (const std::string& marker : markers) {
      if (contains_marker(turn.text, marker)) return true;
    }
  }
  return false;
}

CorpusStats analyze(std::span<const Transcript> transcripts,
                    std::span<const std::string> markers) {
  if (transcripts.empty()) throw Error(Errc::empty_corpus, "no transcripts");
  if (markers.empty()) markers = default_disagreement_markers();

  CorpusStats stats;
  stats.conv_count = static_cast<std::int64_t>(transcripts.size());

  std::vector<int> intervention_counts;
  intervention_counts.reserve(transcripts.size());
  std::int64_t direct_count = 0;
  std::int64_t zero_count = 0;
  std::int64_t disagreement_count = 0;

  for (const Transcript& transcript : transcripts) {
    int interventions = 0;
    for (std::size_t i = 0; i < transcript.turns.size(); ++i) {
      const Turn& turn = transcript.turns[i];
      if (!turn.is_intervention()) continue;
      ++interventions;
      ++stats.speak_turn_count;
      const std::span<const Turn> context(transcript.turns.data(), i);
      if (detect_direct_address(context)) ++direct_count;
      ++stats.type_histogram[transcript.scenario.intervention_type].count;
    }
    intervention_counts.push_back(interventions);
    if (interventions == 0) ++zero_count;
    ++stats.type_histogram_conversations[transcript.scenario.intervention_type]
          .count;
    if (detect_disagreement(transcript, markers)) ++disagreement_count;
  }

  double sum = 0.0;
  for (int c : intervention_counts) sum += c;
  stats.interventions_mean = sum / static_cast<double>(intervention_counts.size());
  stats.interventions_std =
      population_std(intervention_counts, stats.interventions_mean);
  stats.interventions_median = median_of_sorted(intervention_counts);

  if (stats.speak_turn_count > 0) {
    stats.direct_address_fraction =
        static_cast<double>(direct_count) /
        static_cast<double>(stats.speak_turn_count);
    stats.no_invitation_fraction = 1.0 - stats.direct_address_fraction;
  }
  stats.zero_intervention_fraction =
      static_cast<double>(zero_count) / static_cast<double>(stats.conv_count);
  stats.disagreement_fraction =
      static_cast<double>(disagreement_count) /
      static_cast<double>(stats.conv_count);

  for (auto& [type, cell] : stats.type_histogram) {
    cell.fraction = static_cast<double>(cell.count) /
                    static_cast<double>(stats.speak_turn_count);
  }
  for (auto& [type, cell] : stats.type_histogram_conversations) {
    cell.fraction = static_cast<double>(cell.count) /
                    static_cast<double>(stats.conv_count);
  }
  return stats;
}

std::string stats_to_json(const CorpusStats& stats) {
  json j{{"conv_count", stats.conv_count},
         {"interventions_mean", stats.interventions_mean},
         {"interventions_median", stats.interventions_median},
         {"interventions_std", stats.interventions_std},
         {"direct_address_fraction", stats.direct_address_fraction},
         {"no_invitation_fraction", stats.no_invitation_fraction},
         {"zero_intervention_fraction", stats.zero_intervention_fraction},
         {"disagreement_fraction", stats.disagreement_fraction},
         {"speak_turn_count", stats.speak_turn_count},
         {"type_histogram_speak_turns", histogram_to_json(stats.type_histogram)},
         {"type_histogram_conversations",
          histogram_to_json(stats.type_histogram_conversations)}};
  return j.dump(2);
}

}  // namespace turnwise

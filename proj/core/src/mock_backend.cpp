#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "request_canon.hpp"
#include "turnwise/error.hpp"
#include "turnwise/gateway.hpp"
#include "turnwise/rng.hpp"
#include "turnwise/scenario.hpp"
#include "turnwise/transcript.hpp"

namespace turnwise {

namespace {

using nlohmann::json;

std::string_view line_after(std::string_view text, std::string_view marker) {
  const std::size_t pos = text.find(marker);
  if (pos == std::string_view::npos) return {};
  const std::size_t begin = pos + marker.size();
  const std::size_t end = text.find('\n', begin);
  return text.substr(begin,
                     end == std::string_view::npos ? text.size() - begin : end - begin);
}

std::vector<std::string> topic_words(std::string_view topic) {
  std::vector<std::string> words;
  std::string current;
  for (unsigned char c : topic) {
    if (std::isalnum(c)) {
      current.push_back(static_cast<char>(std::tolower(c)));
    } else if (!current.empty()) {
      if (current.size() >= 3) words.push_back(current);
      current.clear();
    }
  }
  if (current.size() >= 3) words.push_back(current);
  if (words.size() > 8) words.resize(8);
  if (words.empty()) words = {"this", "topic"};
  return words;
}

const std::vector<std::string>& filler_words() {
  static const std::vector<std::string> words = {
      "honestly", "maybe",   "probably", "somehow",  "clearly", "often",
      "rarely",   "mostly",  "together", "earlier",  "later",   "around",
      "because",  "instead", "perhaps",  "basically"};
  return words;
}

std::string pick(Rng& rng, const std::vector<std::string>& words) {
  return words[rng.below(words.size())];
}

std::string human_sentence(Rng& rng, const std::vector<std::string>& topic) {
  static const std::vector<std::string> openers = {
      "i think", "i feel like", "it seems", "we should consider",
      "my experience with", "what about"};
  std::string out = pick(rng, openers);
  const int extra = 4 + static_cast<int>(rng.below(5));
  for (int i = 0; i < extra; ++i) {
    out += ' ';
    out += rng.below(2) == 0 ? pick(rng, topic) : pick(rng, filler_words());
  }
  return out;
}

std::string intervention_sentence(Rng& rng, const std::vector<std::string>& topic,
                                  std::string_view type_label) {
  std::string lead;
  if (type_label == "Factual Correction") {
    lead = "actually the claim about";
  } else if (type_label == "Concept Definition") {
    lead = "to clarify the idea of";
  } else if (type_label == "Data Provision") {
    lead = "the available numbers on";
  } else if (type_label == "Source Identification") {
    lead = "a reliable source on";
  } else {
    lead = "bringing these views on";
  }
  std::string out = lead;
  out += ' ';
  out += pick(rng, topic);
  const int extra = 5 + static_cast<int>(rng.below(4));
  for (int i = 0; i < extra; ++i) {
    out += ' ';
    out += rng.below(2) == 0 ? pick(rng, topic) : pick(rng, filler_words());
  }
  return out;
}

enum class FollowUpKind { ask, refute, agree, disregard };

FollowUpKind follow_up_kind(std::string_view prompt) {
  const std::string_view rule = line_after(prompt, "the user should ");
  if (rule.find("refute") != std::string_view::npos) return FollowUpKind::refute;
  if (rule.find("agree") != std::string_view::npos) return FollowUpKind::agree;
  if (rule.find("disregard") != std::string_view::npos) return FollowUpKind::disregard;
  return FollowUpKind::ask;
}

std::string reaction_sentence(Rng& rng, FollowUpKind kind,
                              const std::vector<std::string>& topic) {
  switch (kind) {
    case FollowUpKind::ask:
      return "interesting point [AGENT] we should dig into " + pick(rng, topic) +
             " more later";
    case FollowUpKind::refute:
      return "i disagree with that [AGENT] the part about " + pick(rng, topic) +
             " feels wrong to me";
    case FollowUpKind::agree:
      return "thanks [AGENT] that actually settles the " + pick(rng, topic) +
             " question for me";
    case FollowUpKind::disregard:
      return "anyway back to " + pick(rng, topic) + " where were we";
  }
  return "lets keep going";
}

ChatResponse mock_scenario(Rng& rng, const ChatRequest& request) {
  const std::vector<std::string> topic =
      topic_words(line_after(request.system, "Question Title: "));
  static const std::vector<std::string> kinds = {
      "students", "hobbyists", "colleagues", "neighbors", "researchers"};
  const std::string context = "A group of " + pick(rng, kinds) +
                              " discussing " + pick(rng, topic) + " and " +
                              pick(rng, topic) + " over coffee.";
  const InterventionType type = kAllInterventionTypes[rng.below(5)];
  json body{{"social_context", context},
            {"intervention_type", std::string(intervention_type_label(type))}};

  ChatResponse response;
  if (rng.below(4) == 0) {
    response.text = "```json\n" + body.dump(2) + "\n```";
  } else {
    response.text = body.dump();
  }
  return response;
}

ChatResponse mock_transcript(Rng& rng, const ChatRequest& request) {
  const std::string_view prompt = request.system;

  int human_count = kMinHumans;
  const std::string_view count_text = line_after(prompt, "must feature ");
  std::from_chars(count_text.data(), count_text.data() + count_text.size(),
                  human_count);
  human_count = std::clamp(human_count, kMinHumans, kMaxHumans);

  const std::vector<std::string> topic =
      topic_words(line_after(prompt, "- Topic: "));
  std::string type_label(line_after(prompt, "- AI Intervention Type: "));
  const FollowUpKind follow_up = follow_up_kind(prompt);

  // Human turns, each answered by an agent line (rule 9); 2*n >= 20.
  const int human_turns = 10 + static_cast<int>(rng.below(4));

  int interventions;
  const std::uint64_t roll = rng.below(100);
  if (roll < 6) {
    interventions = 0;
  } else if (roll < 40) {
    interventions = 1;
  } else if (roll < 75) {
    interventions = 2;
  } else {
    interventions = 3;
  }

  // Which human turns the agent answers out loud. Never the opener.
  std::vector<int> slots;
  for (int i = 1; i < human_turns; ++i) slots.push_back(i);
  Rng slot_rng(rng.next_u64());
  slot_rng.shuffle(slots);
  slots.resize(static_cast<std::size_t>(interventions));
  std::sort(slots.begin(), slots.end());

  const bool with_disagreement = rng.below(4) == 0;
  const int disagreement_at =
      1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(human_turns - 1)));

  std::string out;
  int pending_reaction = -1;
  for (int i = 0; i < human_turns; ++i) {
    const bool speak_here =
        std::find(slots.begin(), slots.end(), i) != slots.end();

    std::string text;
    if (i == pending_reaction) {
      text = reaction_sentence(rng, follow_up, topic);
    } else if (speak_here && rng.below(10) < 3) {
      // Occasionally the intervention is directly solicited.
      text = "what do you think [AGENT] about " + pick(rng, topic);
    } else {
      text = human_sentence(rng, topic);
      if (with_disagreement && i == disagreement_at) {
        text += " and honestly i disagree with the last point";
      }
    }

    out += "Speaker_" + std::to_string(i % human_count) + ": " + text + "\n";
    if (speak_here) {
      out += "[AGENT]: " + intervention_sentence(rng, topic, type_label) + "\n";
      pending_reaction = i + 1;
    } else {
      out += "[AGENT]: >\n";
    }
  }

  ChatResponse response;
  response.text = std::move(out);
  return response;
}

ChatResponse mock_zero_shot(Rng& rng, const ChatRequest& request) {
  // Bias toward silence, like the corpus itself.
  const double speak_probability = 0.05 + 0.9 * rng.unit();
  ChatResponse response;
  response.text = speak_probability >= 0.65 ? "<" : ">";
  if (request.want_scores) {
    response.speak_score = std::log(speak_probability);
  }
  return response;
}

ChatResponse mock_judge(Rng& rng) {
  const InterventionType type = kAllInterventionTypes[rng.below(5)];
  std::string label(intervention_type_label(type));
  if (rng.below(3) == 0) {
    // Case/ampersand variants show up in real judge output.
    for (char& c : label) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    const std::size_t amp = label.find('&');
    if (amp != std::string::npos) label.replace(amp, 1, "and");
  }
  ChatResponse response;
  response.text = std::move(label);
  return response;
}

}  // namespace

ChatResponse mock_complete(const ChatRequest& request) {
  Rng rng(fnv1a64(detail::canonical_request(request)));
  const std::string_view system = request.system;

  ChatResponse response;
  if (system.find("creative scenario writer") != std::string_view::npos) {
    response = mock_scenario(rng, request);
  } else if (system.find("sophisticated data generator") != std::string_view::npos) {
    response = mock_transcript(rng, request);
  } else if (system.find("Respond with exactly one character") !=
             std::string_view::npos) {
    response = mock_zero_shot(rng, request);
  } else if (system.find("precise conversation analyst") != std::string_view::npos) {
    response = mock_judge(rng);
  } else {
    throw Error(Errc::unrecognized_stage,
                "mock backend cannot serve this system prompt");
  }
  response.attempts = 1;
  return response;
}

}  // namespace turnwise

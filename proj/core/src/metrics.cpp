#include "turnwise/metrics.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>

#include <nlohmann/json.hpp>

#include "turnwise/error.hpp"

namespace turnwise {

namespace {

using nlohmann::json;

constexpr std::string_view kZeroShotSystemPrompt =
    R"(You are [AGENT], an AI conversational agent participating in a multi-party discussion. Your role is to contribute meaningfully when appropriate, but also to exercise restraint - remaining silent when others are engaged in dialogue that does not require your input.

At each turn, you will see the recent conversation history. Decide whether to speak or stay silent.

Respond with exactly one character:
< if you should speak at this turn (you have something valuable to add, someone needs help, or there is a natural opening)
> if you should remain silent (the conversation is flowing well without you, or your input is not needed)

Output only < or > - no explanation, no other text.)";

std::string_view trim(std::string_view s) {
  std::size_t begin = 0;
  std::size_t end = s.size();
  while (begin < end && std::isspace(static_cast<unsigned char>(s[begin]))) ++begin;
  while (end > begin && std::isspace(static_cast<unsigned char>(s[end - 1]))) --end;
  return s.substr(begin, end - begin);
}

// Ratio with the degenerate-denominator convention: report 0 and record the
// ratio's name instead of producing NaN.
double ratio(std::int64_t numerator, std::int64_t denominator,
             const char* name, std::vector<std::string>& degenerate) {
  if (denominator <= 0) {
    degenerate.emplace_back(name);
    return 0.0;
  }
  return static_cast<double>(numerator) / static_cast<double>(denominator);
}

double f1_from(double precision, double recall) {
  if (precision + recall <= 0.0) return 0.0;
  return 2.0 * precision * recall / (precision + recall);
}

json metrics_to_json(const MetricsReport& report) {
  json j{{"macro_f1", report.macro_f1},
         {"speak_f1", report.speak_f1},
         {"silent_f1", report.silent_f1},
         {"speak_recall", report.speak_recall},
         {"speak_precision", report.speak_precision},
         {"fir", report.fir},
         {"mir", report.mir},
         {"degenerate", report.degenerate},
         {"counts",
          {{"tp", report.counts.tp},
           {"tn", report.counts.tn},
           {"fp", report.counts.fp},
           {"fn", report.counts.fn}}}};
  if (report.rouge_l_tp) j["rouge_l_tp"] = *report.rouge_l_tp;
  return j;
}

}  // namespace

ConfusionCounts& ConfusionCounts::operator+=(const ConfusionCounts& other) {
  tp += other.tp;
  tn += other.tn;
  fp += other.fp;
  fn += other.fn;
  return *this;
}

MetricsReport compute_metrics(const ConfusionCounts& counts) {
  if (counts.total() == 0) {
    throw Error(Errc::empty_evaluation, "confusion table is empty");
  }
  MetricsReport report;
  report.counts = counts;

  report.speak_precision =
      ratio(counts.tp, counts.tp + counts.fp, "speak_precision", report.degenerate);
  report.speak_recall =
      ratio(counts.tp, counts.tp + counts.fn, "speak_recall", report.degenerate);
  const double silent_precision =
      ratio(counts.tn, counts.tn + counts.fn, "silent_precision", report.degenerate);
  const double silent_recall =
      ratio(counts.tn, counts.tn + counts.fp, "silent_recall", report.degenerate);

  report.speak_f1 = f1_from(report.speak_precision, report.speak_recall);
  report.silent_f1 = f1_from(silent_precision, silent_recall);
  report.macro_f1 = (report.speak_f1 + report.silent_f1) / 2.0;

  report.fir = ratio(counts.fp, counts.fp + counts.tn, "fir", report.degenerate);
  report.mir = ratio(counts.fn, counts.fn + counts.tp, "mir", report.degenerate);
  return report;
}

void ConfusionAccumulator::add(DecisionLabel predicted, DecisionLabel gold,
                               std::span<const std::string> slice_keys) {
  auto bump = [&](ConfusionCounts& counts) {
    if (predicted == DecisionLabel::speak && gold == DecisionLabel::speak) {
      ++counts.tp;
    } else if (predicted == DecisionLabel::silent && gold == DecisionLabel::silent) {
      ++counts.tn;
    } else if (predicted == DecisionLabel::speak) {
      ++counts.fp;
    } else {
      ++counts.fn;
    }
  };
  bump(global_);
  for (const std::string& key : slice_keys) bump(slices_[key]);
}

void ConfusionAccumulator::merge(const ConfusionAccumulator& other) {
  global_ += other.global_;
  for (const auto& [key, counts] : other.slices_) slices_[key] += counts;
}

std::string render_context_lines(std::span<const Turn> context) {
  std::string out;
  for (const Turn& turn : context) {
    out += turn.speaker.tag();
    out += ": ";
    out += turn.text;
    out += '\n';
  }
  if (!out.empty()) out.pop_back();
  return out;
}

ZeroShotPrompt build_zero_shot_prompt(std::span<const Turn> context) {
  ZeroShotPrompt prompt;
  prompt.system = std::string(kZeroShotSystemPrompt);
  prompt.user = render_context_lines(context);
  return prompt;
}

ParsedDecision parse_decision(std::string_view model_output, DecisionMode mode) {
  const std::string_view body = trim(model_output);
  ParsedDecision decision;
  if (body.empty()) {
    decision.status = ParsedDecision::Status::empty_output;
    return decision;
  }
  if (mode == DecisionMode::token) {
    if (body == kSpeakToken) {
      decision.label = DecisionLabel::speak;
    } else if (body == kSilenceToken) {
      decision.label = DecisionLabel::silent;
    } else {
      decision.status = ParsedDecision::Status::parse_failure;
    }
    return decision;
  }
  if (body == kSilenceToken) {
    decision.label = DecisionLabel::silent;
  } else {
    decision.label = DecisionLabel::speak;
    decision.utterance = std::string(body);
  }
  return decision;
}

std::vector<std::string> rouge_tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string current;
  for (unsigned char c : text) {
    if (std::isspace(c)) {
      if (!current.empty()) tokens.push_back(std::move(current));
      current.clear();
    } else {
      current.push_back(static_cast<char>(std::tolower(c)));
    }
  }
  if (!current.empty()) tokens.push_back(std::move(current));
  return tokens;
}

std::size_t lcs_length(std::span<const std::string> a, std::span<const std::string> b) {
  if (a.empty() || b.empty()) return 0;
  // Two-row DP table.
  std::vector<std::size_t> prev(b.size() + 1, 0);
  std::vector<std::size_t> row(b.size() + 1, 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j) {
      if (a[i - 1] == b[j - 1]) {
        row[j] = prev[j - 1] + 1;
      } else {
        row[j] = std::max(prev[j], row[j - 1]);
      }
    }
    std::swap(prev, row);
  }
  return prev[b.size()];
}

RougeScore rouge_l(std::string_view candidate, std::string_view reference) {
  const auto candidate_tokens = rouge_tokenize(candidate);
  const auto reference_tokens = rouge_tokenize(reference);
  RougeScore score;
  if (candidate_tokens.empty() || reference_tokens.empty()) return score;
  const double lcs = static_cast<double>(lcs_length(candidate_tokens, reference_tokens));
  score.precision = lcs / static_cast<double>(candidate_tokens.size());
  score.recall = lcs / static_cast<double>(reference_tokens.size());
  score.f1 = f1_from(score.precision, score.recall);
  return score;
}

std::string serialize_prediction(const Prediction& prediction) {
  json j{{"conversation_id", prediction.conversation_id},
         {"decision_index", prediction.decision_index},
         {"output_text", prediction.output_text}};
  if (prediction.speak_score) j["speak_score"] = *prediction.speak_score;
  return j.dump();
}

Prediction parse_prediction(std::string_view line) {
  json j = json::parse(line, nullptr, false);
  if (j.is_discarded() || !j.is_object()) {
    throw Error(Errc::io_error, "bad prediction line");
  }
  Prediction prediction;
  prediction.conversation_id = j.at("conversation_id").get<std::string>();
  prediction.decision_index = j.at("decision_index").get<int>();
  prediction.output_text = j.at("output_text").get<std::string>();
  if (j.contains("speak_score") && !j["speak_score"].is_null()) {
    prediction.speak_score = j["speak_score"].get<double>();
  }
  return prediction;
}

std::vector<Prediction> read_predictions_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::io_error, "cannot open " + path);
  std::vector<Prediction> predictions;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    predictions.push_back(parse_prediction(line));
  }
  return predictions;
}

EvaluationReport evaluate_predictions(std::span<const DatasetRecord> records,
                                      std::span<const Prediction> predictions,
                                      DecisionMode mode,
                                      ParseFailurePolicy policy) {
  std::map<std::pair<std::string, int>, const Prediction*> by_key;
  for (const Prediction& prediction : predictions) {
    by_key[{prediction.conversation_id, prediction.decision_index}] = &prediction;
  }

  EvaluationReport report;
  ConfusionAccumulator accumulator;
  double rouge_sum = 0.0;
  std::int64_t rouge_count = 0;

  for (const DatasetRecord& record : records) {
    const auto it = by_key.find({record.conversation_id, record.decision_index});
    ParsedDecision decision;
    if (it == by_key.end()) {
      ++report.missing_predictions;
      decision.status = ParsedDecision::Status::parse_failure;
    } else {
      decision = parse_decision(it->second->output_text, mode);
      if (decision.status != ParsedDecision::Status::ok) ++report.parse_failures;
    }

    if (decision.status != ParsedDecision::Status::ok) {
      switch (policy) {
        case ParseFailurePolicy::count_as_silent:
          decision.label = DecisionLabel::silent;
          break;
        case ParseFailurePolicy::count_as_speak:
          decision.label = DecisionLabel::speak;
          break;
        case ParseFailurePolicy::skip:
          ++report.skipped;
          continue;
      }
    }

    const std::string slice(record.directly_addressed ? kDirectAddressSlice
                                                      : kNoInvitationSlice);
    accumulator.add(decision.label, record.label, {&slice, 1});

    if (mode == DecisionMode::dialogue && decision.label == DecisionLabel::speak &&
        record.label == DecisionLabel::speak &&
        decision.status == ParsedDecision::Status::ok) {
      const RougeScore score = rouge_l(decision.utterance, record.target_text);
      rouge_sum += score.f1;
      ++rouge_count;
    }
  }

  report.overall = compute_metrics(accumulator.global());
  if (rouge_count > 0) {
    report.overall.rouge_l_tp = rouge_sum / static_cast<double>(rouge_count);
  }
  for (const auto& [key, counts] : accumulator.slices()) {
    if (counts.total() > 0) report.slices[key] = compute_metrics(counts);
  }
  return report;
}

std::string evaluation_report_to_json(const EvaluationReport& report) {
  json slices = json::object();
  for (const auto& [key, metrics] : report.slices) {
    slices[key] = metrics_to_json(metrics);
  }
  json j{{"overall", metrics_to_json(report.overall)},
         {"slices", std::move(slices)},
         {"parse_failures", report.parse_failures},
         {"missing_predictions", report.missing_predictions},
         {"skipped", report.skipped}};
  return j.dump(2);
}

}  // namespace turnwise

#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "turnwise/dataset.hpp"
#include "turnwise/transcript.hpp"

namespace turnwise {

struct ConfusionCounts {
  std::int64_t tp = 0;  // correct SPEAK
  std::int64_t tn = 0;  // correct SILENT
  std::int64_t fp = 0;  // wrong SPEAK (interruption)
  std::int64_t fn = 0;  // wrong SILENT (missed intervention)

  std::int64_t total() const { return tp + tn + fp + fn; }
  ConfusionCounts& operator+=(const ConfusionCounts& other);
  bool operator==(const ConfusionCounts&) const = default;
};

struct MetricsReport {
  double macro_f1 = 0.0;
  double speak_f1 = 0.0;
  double silent_f1 = 0.0;
  double speak_recall = 0.0;
  double speak_precision = 0.0;
  double fir = 0.0;  // FP / (FP + TN)
  double mir = 0.0;  // FN / (FN + TP)
  // Ratios whose denominator was zero; they are reported as 0, not NaN.
  std::vector<std::string> degenerate;
  ConfusionCounts counts;
  std::optional<double> rouge_l_tp;
};

/// Macro F1, SPEAK precision/recall, FIR and MIR from raw counts.
/// Throws Errc::empty_evaluation when all four cells are zero.
MetricsReport compute_metrics(const ConfusionCounts& counts);

inline constexpr std::string_view kDirectAddressSlice = "DA";
inline constexpr std::string_view kNoInvitationSlice = "NI";

/// Confusion accumulator with named slices. Merges are associative and
/// commutative, so partial counts can be computed independently.
class ConfusionAccumulator {
 public:
  void add(DecisionLabel predicted, DecisionLabel gold,
           std::span<const std::string> slice_keys = {});
  void merge(const ConfusionAccumulator& other);

  const ConfusionCounts& global() const { return global_; }
  const std::map<std::string, ConfusionCounts>& slices() const { return slices_; }

 private:
  ConfusionCounts global_;
  std::map<std::string, ConfusionCounts> slices_;
};

/// `tag: text` rendering of context turns, one line per turn, in order.
std::string render_context_lines(std::span<const Turn> context);

struct ZeroShotPrompt {
  std::string system;
  std::string user;
};

/// Zero-shot decision prompt: fixed system instructions plus the rendered
/// conversation history.
ZeroShotPrompt build_zero_shot_prompt(std::span<const Turn> context);

enum class DecisionMode { token, dialogue };

struct ParsedDecision {
  enum class Status { ok, parse_failure, empty_output };
  Status status = Status::ok;
  DecisionLabel label = DecisionLabel::silent;
  std::string utterance;  // dialogue-mode SPEAK output
};

/// Token mode: trimmed `<`/`>` or parse_failure. Dialogue mode: trimmed `>`
/// is SILENT, any other non-empty text is SPEAK with that utterance.
ParsedDecision parse_decision(std::string_view model_output, DecisionMode mode);

std::vector<std::string> rouge_tokenize(std::string_view text);

/// Longest-common-subsequence length over token sequences.
std::size_t lcs_length(std::span<const std::string> a, std::span<const std::string> b);

struct RougeScore {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

/// ROUGE-L over lowercased whitespace tokens: precision = LCS/|candidate|,
/// recall = LCS/|reference|, f1 their harmonic mean. Empty inputs score 0.
RougeScore rouge_l(std::string_view candidate, std::string_view reference);

/// One prediction line: model output for a single decision point.
struct Prediction {
  std::string conversation_id;
  int decision_index = 0;
  std::string output_text;
  std::optional<double> speak_score;
};

std::string serialize_prediction(const Prediction& prediction);
Prediction parse_prediction(std::string_view line);
std::vector<Prediction> read_predictions_file(const std::string& path);

enum class ParseFailurePolicy { count_as_silent, count_as_speak, skip };

struct EvaluationReport {
  MetricsReport overall;
  std::map<std::string, MetricsReport> slices;  // "DA" / "NI"
  std::int64_t parse_failures = 0;
  std::int64_t missing_predictions = 0;
  std::int64_t skipped = 0;
};

/// Joins predictions to dataset records on (conversation_id, decision_index)
/// and scores them. In dialogue mode, mean ROUGE-L is computed over true
/// positives against the gold target text.
EvaluationReport evaluate_predictions(
    std::span<const DatasetRecord> records, std::span<const Prediction> predictions,
    DecisionMode mode,
    ParseFailurePolicy policy = ParseFailurePolicy::count_as_silent);

std::string evaluation_report_to_json(const EvaluationReport& report);

}  // namespace turnwise

#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "turnwise/scenario.hpp"
#include "turnwise/transcript.hpp"

namespace turnwise {

enum class DecisionLabel { speak, silent };

/// "SPEAK" / "SILENT".
std::string_view decision_label_name(DecisionLabel label);
DecisionLabel parse_decision_label(std::string_view name);

/// Token-variant action symbol for interventions.
inline constexpr std::string_view kSpeakToken = "<";

inline constexpr int kDefaultWindowSize = 8;

/// One decision point: up to window_size turns of context before an agent
/// turn, plus the gold SPEAK/SILENT outcome.
struct WindowExample {
  std::string conversation_id;
  int decision_index = 0;  // 0-based among the conversation's agent turns
  std::vector<Turn> context;
  DecisionLabel label = DecisionLabel::silent;
  std::string gold_utterance;  // non-empty iff label == speak
  bool directly_addressed = false;
  std::optional<InterventionType> intervention_type;
};

enum class DatasetVariant { token, dialogue };

/// "token" / "dialogue".
std::string_view variant_name(DatasetVariant variant);
DatasetVariant parse_variant(std::string_view name);

struct VariantTarget {
  DatasetVariant variant = DatasetVariant::token;
  std::string target_text;
};

enum class Split { train, validation, test };

inline constexpr std::array<Split, 3> kAllSplits = {Split::train, Split::validation,
                                                    Split::test};

/// "train" / "validation" / "test".
std::string_view split_name(Split split);
Split parse_split(std::string_view name);

inline constexpr std::array<double, 3> kDefaultSplitRatios = {0.8, 0.1, 0.1};

struct SplitAssignment {
  std::map<std::string, Split> by_conversation;
  std::array<double, 3> ratios = kDefaultSplitRatios;
  std::uint64_t seed = 0;
};

/// One example per agent turn; context is the up-to-window_size turns
/// immediately preceding it (humans and earlier agent turns alike).
std::vector<WindowExample> build_windows(const Transcript& transcript,
                                         int window_size = kDefaultWindowSize);

/// Token target is `<`/`>`; Dialogue target is the utterance or `>`.
VariantTarget render_target(const WindowExample& example, DatasetVariant variant);

/// Split sizes under largest-remainder rounding, ties to the earlier split.
std::array<std::size_t, 3> split_sizes(std::size_t count,
                                       const std::array<double, 3>& ratios);

/// Deterministic conversation-level split: seed-driven shuffle, then
/// contiguous allocation by ratio. Throws Errc::empty_corpus and
/// Errc::invalid_argument (ratios must sum to 1 within 1e-9, ids be unique).
SplitAssignment split_conversations(const std::vector<std::string>& ids,
                                    const std::array<double, 3>& ratios,
                                    std::uint64_t seed);

/// Flat serialized form of one training example; what a JSONL line carries.
struct DatasetRecord {
  struct ContextLine {
    std::string speaker;  // "Speaker_3" or "[AGENT]"
    std::string text;
    bool operator==(const ContextLine&) const = default;
  };

  std::string conversation_id;
  int decision_index = 0;
  std::vector<ContextLine> context;
  std::string target_text;
  DecisionLabel label = DecisionLabel::silent;
  DatasetVariant variant = DatasetVariant::token;
  bool directly_addressed = false;
  std::optional<InterventionType> intervention_type;

  bool operator==(const DatasetRecord&) const = default;
};

DatasetRecord make_record(const WindowExample& example, DatasetVariant variant);

/// One compact JSON object, no trailing newline.
std::string serialize_record(const DatasetRecord& record);
DatasetRecord parse_record(std::string_view line);

struct SplitCounts {
  std::size_t train = 0;
  std::size_t validation = 0;
  std::size_t test = 0;

  std::size_t total() const { return train + validation + test; }
  std::size_t& operator[](Split split);
};

/// Writes one JSONL file per split (UTF-8, `\n`-separated). Every example's
/// conversation must be present in the assignment. Write failures surface as
/// Errc::io_error with the path.
SplitCounts serialize_examples(const std::vector<WindowExample>& examples,
                               DatasetVariant variant,
                               const SplitAssignment& assignment,
                               const std::map<Split, std::string>& paths);

std::vector<DatasetRecord> read_records_file(const std::string& path);

}  // namespace turnwise

#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "turnwise/corpus.hpp"
#include "turnwise/dataset.hpp"
#include "turnwise/gateway.hpp"
#include "turnwise/metrics.hpp"
#include "turnwise/reward.hpp"
#include "turnwise/scenario.hpp"
#include "turnwise/stats.hpp"
#include "turnwise/transcript.hpp"

namespace turnwise {

/// Tool configuration: backend registry plus run defaults. Loaded from one
/// JSON file; command-line flags override individual fields.
struct ToolConfig {
  std::string default_backend = std::string(kMockBackendId);
  std::uint64_t seed = 7;
  int parallelism = 4;
  std::vector<std::string> disagreement_markers;  // empty: built-in defaults
  std::map<std::string, BackendConfig> backends;
};

ToolConfig default_config();
/// Throws Errc::config_invalid.
ToolConfig load_config(const std::string& path);
std::string config_hash(const ToolConfig& config);

/// Per-run audit record; every subcommand writes one next to its outputs.
struct RunManifest {
  std::string subcommand;
  std::string config_hash;
  std::uint64_t seed = 0;
  std::map<std::string, std::string> inputs;
  std::map<std::string, std::string> outputs;
  std::string tool_version;
  std::string started_at;
  std::string finished_at;
  std::map<std::string, std::int64_t> counts;
};

void write_manifest(const RunManifest& manifest, const std::string& path);

/// Tracks start/finish timestamps and fills the boilerplate fields.
class ManifestScope {
 public:
  ManifestScope(std::string subcommand, const ToolConfig& config,
                std::uint64_t seed);
  RunManifest& manifest() { return manifest_; }
  void finish_and_write(const std::string& path);

 private:
  RunManifest manifest_;
};

// ---- Stage wiring -----------------------------------------------------

struct AugmentedRecord {
  SourceRecord record;
  Scenario scenario;
};

void write_augmented_jsonl(const std::string& path,
                           const std::vector<AugmentedRecord>& rows);
std::vector<AugmentedRecord> read_augmented_jsonl(const std::string& path);

/// Builds the per-record chat request for each generation stage. The stage
/// prompt travels as the system message (the mock backend fingerprints it);
/// the user message is a fixed directive.
ChatRequest make_stage_request(const ToolConfig& config,
                               const std::string& backend_id,
                               std::string system_prompt);

inline constexpr std::string_view kStageUserDirective =
    "Follow the instructions above and produce the output now.";

struct CleanResult {
  CleaningReport report;
  std::size_t written = 0;
};

/// Stage 1: CSV in, cleaned records JSONL out, report JSON alongside.
CleanResult run_clean(const std::string& input_csv, const std::string& output_jsonl,
                      std::size_t limit, const std::string& report_path);

struct AugmentResult {
  std::size_t scenarios = 0;
  std::size_t failed = 0;
};

/// Stage 2: scenario inference for every record, with up to three fresh
/// re-requests per record on malformed responses before dropping it.
AugmentResult run_augment(Gateway& gateway, const ToolConfig& config,
                          const std::string& backend_id,
                          const std::string& records_jsonl,
                          const std::string& output_jsonl);

struct SynthesizeResult {
  std::size_t accepted = 0;
  std::size_t rejected = 0;  // transcripts with validation violations
  std::size_t failed = 0;    // unparseable model output
};

/// Stage 3: one transcript file per conversation plus manifest.json mapping
/// conversation_id to spec and scenario.
SynthesizeResult run_synthesize(Gateway& gateway, const ToolConfig& config,
                                const std::string& backend_id,
                                const std::string& augmented_jsonl,
                                const std::string& output_dir, std::uint64_t seed);

std::string conversation_id_for(std::int64_t record_id);

/// Reads a synthesize output directory back into memory.
std::vector<Transcript> read_transcripts_dir(const std::string& dir);

struct BuildDatasetResult {
  SplitCounts token_counts;
  SplitCounts dialogue_counts;
  std::size_t conversations = 0;
};

enum class VariantSelection { token, dialogue, both };

/// Stage 4: sliding-window examples, conversation-level split, and up to six
/// {variant}_{split}.jsonl files plus split_manifest.json under out_dir.
BuildDatasetResult run_build_dataset(const std::string& transcripts_dir,
                                     const std::string& out_dir,
                                     VariantSelection variants, std::uint64_t seed);

/// Corpus statistics report (JSON) for a synthesize output directory.
CorpusStats run_stats(const std::string& transcripts_dir,
                      const std::string& markers_path, const std::string& out_path,
                      const ToolConfig& config);

struct EvaluateOptions {
  std::string dataset_path;
  std::string predictions;  // JSONL path, or a backend id for live zero-shot
  DecisionMode mode = DecisionMode::token;
  std::string report_path;
  ParseFailurePolicy policy = ParseFailurePolicy::count_as_silent;
};

EvaluationReport run_evaluate(Gateway& gateway, const ToolConfig& config,
                              const EvaluateOptions& options);

struct RewardScoreOptions {
  std::string rollouts_path;
  std::string out_path;
  RewardConfig reward;
  int group_size = kDefaultGroupSize;
  std::string judge_backend;  // empty: use judged_type from the file
};

struct RewardScoreResult {
  std::size_t rollouts = 0;
  std::size_t groups = 0;
};

RewardScoreResult run_reward_score(Gateway& gateway, const ToolConfig& config,
                                   const RewardScoreOptions& options);

/// Reads {"speak_score": s, "gold": "SPEAK"} lines and sweeps the threshold.
CalibrationResult run_calibrate(const std::string& scored_path, double fir_target,
                                const std::string& out_path);

struct AblateReportResult {
  std::vector<AblationRow> rows;
  std::string rendered;  // aligned text table
};

AblateReportResult run_ablate_report(const std::string& runs_dir,
                                     const std::string& baseline_path,
                                     const std::string& out_path);

struct PipelineOptions {
  std::string input_csv;  // empty: deterministic built-in demo corpus
  std::string out_dir;
  std::string backend_id;
  std::size_t conversations = 50;
  std::uint64_t seed = 7;
};

struct PipelineResult {
  CleanResult clean;
  AugmentResult augment;
  SynthesizeResult synthesize;
  BuildDatasetResult dataset;
  CorpusStats stats;
};

/// clean -> augment -> synthesize -> build-dataset -> stats under one
/// output directory.
PipelineResult run_pipeline(Gateway& gateway, const ToolConfig& config,
                            const PipelineOptions& options);

/// Deterministic synthetic source corpus for demo/mock runs without an
/// input file.
std::vector<SourceRecord> make_demo_corpus(std::size_t n, std::uint64_t seed);

/// Reward components flag parser: "all", "acc", "acc+soft", "acc+soft+type".
RewardConfig parse_reward_components(std::string_view components, double lambda);

}  // namespace turnwise

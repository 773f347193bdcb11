#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "turnwise/dataset.hpp"
#include "turnwise/scenario.hpp"
#include "turnwise/transcript.hpp"

namespace turnwise {

inline constexpr double kAccuracyReward = 1.0;
inline constexpr int kSoftTimingNearTurns = 2;
inline constexpr int kSoftTimingFarTurns = 4;
inline constexpr double kSoftTimingNearBonus = 0.1;
inline constexpr double kSoftTimingFarPenalty = -0.1;
inline constexpr double kTypeBonus = 0.3;
inline constexpr int kDefaultGroupSize = 8;

struct RewardConfig {
  double lambda = 0.5;
  bool enable_accuracy = true;
  bool enable_soft_timing = true;
  bool enable_type_bonus = true;
  bool enable_necessity = true;
  // Alternative reading of the timing tolerance: waive the necessity penalty
  // for false positives at most kSoftTimingNearTurns decisions early.
  bool waive_necessity_for_near_miss = false;
};

/// Outcome of one rollout at one decision point. turns_early is the distance,
/// in agent decision steps, from a predicted SPEAK to the nearest gold SPEAK
/// at or after it; absent when no such gold SPEAK exists.
struct RolloutOutcome {
  DecisionLabel predicted = DecisionLabel::silent;
  DecisionLabel gold = DecisionLabel::silent;
  std::optional<int> turns_early;
  std::optional<InterventionType> judged_type;
  std::optional<InterventionType> gold_type;
};

/// Per-component reward values. necessity holds the positive magnitude; it
/// enters the total as -lambda * necessity.
struct RewardBreakdown {
  double accuracy = 0.0;
  double soft_timing = 0.0;
  double type_bonus = 0.0;
  double necessity = 0.0;
  double total = 0.0;
};

/// Asymmetric reward: accuracy +/-1 always, soft timing on SPEAK predictions,
/// type bonus on matched true positives, necessity penalty on false
/// positives. Throws Errc::invalid_outcome on ill-formed outcomes
/// (judged_type off a true positive, turns_early on a SILENT prediction).
RewardBreakdown score(const RolloutOutcome& outcome, const RewardConfig& config);

/// Group-normalized advantages: (r - mean) / max(population std, eps).
/// Constant groups yield all zeros. Throws Errc::group_too_small for
/// fewer than two rewards.
std::vector<double> group_advantages(std::span<const double> rewards,
                                     double eps = 1e-8);

/// Emits batches holding exactly batch_size/2 SPEAK and batch_size/2 SILENT
/// indices. Each class pool is shuffled per epoch and reshuffled when
/// exhausted, so the minority class repeats. Deterministic per seed.
class BalancedBatchSampler {
 public:
  /// Throws Errc::invalid_argument (odd batch size) and Errc::missing_class.
  BalancedBatchSampler(std::span<const DecisionLabel> labels, int batch_size,
                       std::uint64_t seed);

  /// Indices into the labeled list, batch_size of them, half per class.
  std::vector<std::size_t> next_batch();

  int batch_size() const { return batch_size_; }

 private:
  struct Pool {
    std::vector<std::size_t> indices;
    std::size_t cursor = 0;
  };
  std::size_t draw(Pool& pool);

  Pool speak_;
  Pool silent_;
  int batch_size_;
  std::uint64_t rng_state_;
};

/// Judge backend: maps (context, utterance) to a raw label string.
using JudgeFn =
    std::function<std::string(std::span<const Turn>, std::string_view)>;

std::string build_judge_system_prompt();
std::string build_judge_user_prompt(std::span<const Turn> context,
                                    std::string_view utterance);

/// Classifies a true-positive intervention via the judge backend and
/// normalizes the label. Throws Errc::unknown_intervention_type.
InterventionType judge_type(std::span<const Turn> context,
                            std::string_view utterance, const JudgeFn& judge);

struct ScoredExample {
  double speak_score = 0.0;
  DecisionLabel gold = DecisionLabel::silent;
};

struct CalibrationResult {
  double threshold = 0.0;
  double achieved_fir = 0.0;
  double achieved_recall = 0.0;

  bool operator==(const CalibrationResult&) const = default;
};

/// Sweeps thresholds at midpoints of consecutive distinct scores plus +/-inf
/// sentinels; predicts SPEAK iff score >= threshold. Returns the threshold
/// maximizing SPEAK recall subject to FIR <= fir_target; ties break toward
/// lower FIR, then lower threshold. The +inf sentinel (always SILENT) has
/// FIR 0, so a feasible point always exists.
CalibrationResult calibrate_threshold(std::span<const ScoredExample> scored,
                                      double fir_target);

/// Per-run evaluation metrics, as consumed by the ablation aggregator.
struct RunMetrics {
  double macro_f1 = 0.0;
  double speak_recall = 0.0;
  double fir = 0.0;
  double mir = 0.0;
};

struct AblationCell {
  double mean = 0.0;
  double stddev = 0.0;  // sample std (n-1), 0 for a single run
};

struct AblationRow {
  double lambda = 0.0;
  int run_count = 0;
  AblationCell macro_f1;
  AblationCell speak_recall;
  AblationCell fir;
  AblationCell mir;
  double delta_mir = 0.0;  // mean MIR - baseline MIR
};

/// Mean and sample std per lambda for each metric, plus the MIR delta
/// against a baseline run.
std::vector<AblationRow> aggregate_ablation(
    const std::map<double, std::vector<RunMetrics>>& runs_by_lambda,
    const RunMetrics& baseline);

}  // namespace turnwise

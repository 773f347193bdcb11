#include "turnwise/reward.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "turnwise/error.hpp"
#include "turnwise/metrics.hpp"
#include "turnwise/rng.hpp"

namespace turnwise {

RewardBreakdown score(const RolloutOutcome& outcome, const RewardConfig& config) {
  const bool correct = outcome.predicted == outcome.gold;
  const bool true_positive = correct && outcome.predicted == DecisionLabel::speak;
  const bool false_positive = !correct && outcome.predicted == DecisionLabel::speak;

  if (outcome.predicted == DecisionLabel::silent && outcome.turns_early) {
    throw Error(Errc::invalid_outcome, "turns_early on a SILENT prediction");
  }
  if (outcome.judged_type && !true_positive) {
    throw Error(Errc::invalid_outcome, "judged_type on a non-true-positive");
  }
  if (!config.enable_accuracy && !config.enable_soft_timing &&
      !config.enable_type_bonus && !config.enable_necessity) {
    throw Error(Errc::invalid_argument, "no reward component enabled");
  }

  RewardBreakdown breakdown;

  if (config.enable_accuracy) {
    breakdown.accuracy = correct ? kAccuracyReward : -kAccuracyReward;
  }

  const bool near_miss =
      outcome.turns_early && *outcome.turns_early <= kSoftTimingNearTurns;

  if (config.enable_soft_timing && outcome.predicted == DecisionLabel::speak) {
    if (near_miss) {
      breakdown.soft_timing = kSoftTimingNearBonus;
    } else if (outcome.turns_early && *outcome.turns_early <= kSoftTimingFarTurns) {
      breakdown.soft_timing = 0.0;
    } else {
      // More than four decisions early, or no upcoming gold SPEAK at all.
      breakdown.soft_timing = kSoftTimingFarPenalty;
    }
  }

  if (config.enable_type_bonus && true_positive && outcome.judged_type &&
      outcome.gold_type && *outcome.judged_type == *outcome.gold_type) {
    breakdown.type_bonus = kTypeBonus;
  }

  if (config.enable_necessity && false_positive &&
      !(config.waive_necessity_for_near_miss && near_miss)) {
    breakdown.necessity = 1.0;
  }

  breakdown.total = breakdown.accuracy + breakdown.soft_timing +
                    breakdown.type_bonus - config.lambda * breakdown.necessity;
  return breakdown;
}

std::vector<double> group_advantages(std::span<const double> rewards, double eps) {
  if (rewards.size() < 2) {
    throw Error(Errc::group_too_small,
                "group has " + std::to_string(rewards.size()) + " rewards");
  }
  double mean = 0.0;
  for (double r : rewards) mean += r;
  mean /= static_cast<double>(rewards.size());

  double variance = 0.0;
  for (double r : rewards) variance += (r - mean) * (r - mean);
  variance /= static_cast<double>(rewards.size());
  const double stddev = std::max(std::sqrt(variance), eps);

  std::vector<double> advantages;
  advantages.reserve(rewards.size());
  for (double r : rewards) advantages.push_back((r - mean) / stddev);
  return advantages;
}

BalancedBatchSampler::BalancedBatchSampler(std::span<const DecisionLabel> labels,
                                           int batch_size, std::uint64_t seed)
    : batch_size_(batch_size), rng_state_(seed) {
  if (batch_size < 2 || batch_size % 2 != 0) {
    throw Error(Errc::invalid_argument, "batch_size must be even and >= 2");
  }
  for (std::size_t i = 0; i < labels.size(); ++i) {
    (labels[i] == DecisionLabel::speak ? speak_ : silent_).indices.push_back(i);
  }
  if (speak_.indices.empty() || silent_.indices.empty()) {
    throw Error(Errc::missing_class,
                speak_.indices.empty() ? "no SPEAK examples" : "no SILENT examples");
  }
  Rng rng(rng_state_);
  rng.shuffle(speak_.indices);
  rng.shuffle(silent_.indices);
  rng_state_ = rng.next_u64();
}

std::size_t BalancedBatchSampler::draw(Pool& pool) {
  if (pool.cursor >= pool.indices.size()) {
    Rng rng(rng_state_);
    rng.shuffle(pool.indices);
    rng_state_ = rng.next_u64();
    pool.cursor = 0;
  }
  return pool.indices[pool.cursor++];
}

std::vector<std::size_t> BalancedBatchSampler::next_batch() {
  std::vector<std::size_t> batch;
  batch.reserve(static_cast<std::size_t>(batch_size_));
  const int half = batch_size_ / 2;
  for (int i = 0; i < half; ++i) batch.push_back(draw(speak_));
  for (int i = 0; i < half; ++i) batch.push_back(draw(silent_));
  return batch;
}

std::string build_judge_system_prompt() {
  return
      R"(You are a precise conversation analyst. An AI agent named [AGENT] has just made an intervention in a group discussion. Classify that intervention.

Choose exactly one intervention type from this list:
- Factual Correction
- Concept Definition
- Data Provision
- Source Identification
- Synthesis & Reframing

Respond with only the intervention type label, nothing else.)";
}

std::string build_judge_user_prompt(std::span<const Turn> context,
                                    std::string_view utterance) {
  std::string out = "Conversation:\n";
  out += render_context_lines(context);
  out += "\n\nIntervention:\n";
  out += utterance;
  return out;
}

InterventionType judge_type(std::span<const Turn> context,
                            std::string_view utterance, const JudgeFn& judge) {
  const std::string label = judge(context, utterance);
  return parse_intervention_type(label);
}

CalibrationResult calibrate_threshold(std::span<const ScoredExample> scored,
                                      double fir_target) {
  if (scored.empty()) throw Error(Errc::invalid_argument, "no scored examples");
  if (fir_target < 0.0 || fir_target > 1.0) {
    throw Error(Errc::invalid_argument, "fir_target must be in [0,1]");
  }

  std::vector<double> scores;
  scores.reserve(scored.size());
  for (const auto& example : scored) scores.push_back(example.speak_score);
  std::sort(scores.begin(), scores.end());
  scores.erase(std::unique(scores.begin(), scores.end()), scores.end());

  constexpr double inf = std::numeric_limits<double>::infinity();
  std::vector<double> candidates;
  candidates.reserve(scores.size() + 1);
  candidates.push_back(-inf);
  for (std::size_t i = 0; i + 1 < scores.size(); ++i) {
    candidates.push_back((scores[i] + scores[i + 1]) / 2.0);
  }
  candidates.push_back(inf);

  std::int64_t gold_speak = 0;
  for (const auto& example : scored) {
    if (example.gold == DecisionLabel::speak) ++gold_speak;
  }
  const std::int64_t gold_silent =
      static_cast<std::int64_t>(scored.size()) - gold_speak;

  // Sort once; for descending thresholds, SPEAK predictions grow by suffix.
  std::vector<ScoredExample> ordered(scored.begin(), scored.end());
  std::sort(ordered.begin(), ordered.end(),
            [](const ScoredExample& a, const ScoredExample& b) {
              return a.speak_score > b.speak_score;
            });

  CalibrationResult best;
  bool have_best = false;

  // Walk candidates from high to low, accumulating tp/fp incrementally.
  std::vector<double> descending(candidates.rbegin(), candidates.rend());
  std::size_t cursor = 0;
  std::int64_t tp = 0;
  std::int64_t fp = 0;
  for (double threshold : descending) {
    while (cursor < ordered.size() && ordered[cursor].speak_score >= threshold) {
      (ordered[cursor].gold == DecisionLabel::speak ? tp : fp)++;
      ++cursor;
    }
    const double recall =
        gold_speak > 0 ? static_cast<double>(tp) / static_cast<double>(gold_speak)
                       : 0.0;
    const double fir =
        gold_silent > 0 ? static_cast<double>(fp) / static_cast<double>(gold_silent)
                        : 0.0;
    if (fir > fir_target) continue;
    const bool better =
        !have_best || recall > best.achieved_recall ||
        (recall == best.achieved_recall && fir < best.achieved_fir) ||
        (recall == best.achieved_recall && fir == best.achieved_fir &&
         threshold < best.threshold);
    if (better) {
      best = {threshold, fir, recall};
      have_best = true;
    }
  }
  return best;
}

namespace {

AblationCell cell_of(std::span<const double> values) {
  AblationCell cell;
  const auto n = static_cast<double>(values.size());
  for (double v : values) cell.mean += v;
  cell.mean /= n;
  if (values.size() > 1) {
    double sum_sq = 0.0;
    for (double v : values) sum_sq += (v - cell.mean) * (v - cell.mean);
    cell.stddev = std::sqrt(sum_sq / (n - 1.0));
  }
  return cell;
}

}  // namespace

std::vector<AblationRow> aggregate_ablation(
    const std::map<double, std::vector<RunMetrics>>& runs_by_lambda,
    const RunMetrics& baseline) {
  std::vector<AblationRow> rows;
  for (const auto& [lambda, runs] : runs_by_lambda) {
    if (runs.empty()) {
      throw Error(Errc::invalid_argument, "lambda with no runs");
    }
    std::vector<double> f1s, recalls, firs, mirs;
    for (const RunMetrics& run : runs) {
      f1s.push_back(run.macro_f1);
      recalls.push_back(run.speak_recall);
      firs.push_back(run.fir);
      mirs.push_back(run.mir);
    }
    AblationRow row;
    row.lambda = lambda;
    row.run_count = static_cast<int>(runs.size());
    row.macro_f1 = cell_of(f1s);
    row.speak_recall = cell_of(recalls);
    row.fir = cell_of(firs);
    row.mir = cell_of(mirs);
    row.delta_mir = row.mir.mean - baseline.mir;
    rows.push_back(row);
  }
  return rows;
}

}  // namespace turnwise

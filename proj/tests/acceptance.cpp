// Acceptance suite: ten end-to-end criteria, one pass/fail line each.
// Exits nonzero if any criterion fails.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "turnwise/dataset.hpp"
#include "turnwise/error.hpp"
#include "turnwise/gateway.hpp"
#include "turnwise/metrics.hpp"
#include "turnwise/pipeline.hpp"
#include "turnwise/reward.hpp"
#include "turnwise/rng.hpp"
#include "turnwise/stats.hpp"
#include "turnwise/transcript.hpp"

using namespace turnwise;
namespace fs = std::filesystem;

namespace {

std::vector<std::string> g_notes;

void note(const std::string& message) { g_notes.push_back(message); }

#define EXPECT(condition)                                                   \
  do {                                                                      \
    if (!(condition)) {                                                     \
      note(std::string("failed: ") + #condition + " (line " +               \
           std::to_string(__LINE__) + ")");                                 \
      return false;                                                         \
    }                                                                       \
  } while (0)

bool near(double a, double b, double tolerance) {
  return std::abs(a - b) <= tolerance;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

// ---- criterion 1: end-to-end mock pipeline ------------------------------

bool criterion_pipeline() {
  const fs::path dir = fs::temp_directory_path() / "turnwise_acceptance_run";
  fs::remove_all(dir);

  const std::string command = std::string(TURNWISE_CLI_PATH) +
                              " pipeline --backend mock --conversations 50" +
                              " --seed 7 --out " + (dir / "run").string() +
                              " > /dev/null 2>&1";
  const auto start = std::chrono::steady_clock::now();
  const int status = std::system(command.c_str());
  const double elapsed_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
          .count();
  EXPECT(status == 0);
  note("pipeline wall time " + std::to_string(elapsed_s) + "s");
  EXPECT(elapsed_s < 60.0);

  // All 50 transcripts validate with zero violations.
  const auto transcripts = read_transcripts_dir((dir / "run" / "transcripts").string());
  EXPECT(transcripts.size() == 50);
  for (const auto& transcript : transcripts) {
    const ValidationReport report = validate_transcript(transcript);
    EXPECT(report.violations.empty());
    EXPECT(report.exchange_count >= 20);
    EXPECT(report.intervention_count >= 0);
    EXPECT(report.intervention_count <= 3);
    EXPECT(report.distinct_humans >= 2);
    EXPECT(report.distinct_humans <= 6);
  }

  // Equal per-split counts across variants; no conversation spans splits.
  std::map<std::string, std::size_t> token_counts, dialogue_counts;
  std::map<std::string, std::set<std::string>> ids_by_split;
  for (const std::string variant : {"token", "dialogue"}) {
    for (const std::string split : {"train", "validation", "test"}) {
      const fs::path path =
          dir / "run" / "dataset" / (variant + "_" + split + ".jsonl");
      EXPECT(fs::exists(path));
      const auto records = read_records_file(path.string());
      (variant == "token" ? token_counts : dialogue_counts)[split] = records.size();
      for (const auto& record : records) {
        ids_by_split[split].insert(record.conversation_id);
      }
    }
  }
  for (const std::string split : {"train", "validation", "test"}) {
    EXPECT(token_counts[split] == dialogue_counts[split]);
  }
  std::size_t id_total = 0;
  std::set<std::string> id_union;
  for (const auto& [split, ids] : ids_by_split) {
    id_total += ids.size();
    id_union.insert(ids.begin(), ids.end());
  }
  EXPECT(id_total == id_union.size());  // pairwise disjoint

  // 80/10/10 with largest-remainder rounding over 50 conversations.
  const auto sizes = split_sizes(50, kDefaultSplitRatios);
  EXPECT(ids_by_split["train"].size() == sizes[0]);
  EXPECT(ids_by_split["validation"].size() == sizes[1]);
  EXPECT(ids_by_split["test"].size() == sizes[2]);
  EXPECT(sizes == (std::array<std::size_t, 3>{40, 5, 5}));

  EXPECT(fs::exists(dir / "run" / "manifest.json"));
  EXPECT(fs::exists(dir / "run" / "stats.json"));
  fs::remove_all(dir);
  return true;
}

// ---- criterion 2: metric identities --------------------------------------

bool criterion_metric_identities() {
  Rng rng(424242);
  for (int i = 0; i < 10000; ++i) {
    const ConfusionCounts counts{static_cast<std::int64_t>(rng.below(1000)),
                                 static_cast<std::int64_t>(rng.below(1000)),
                                 static_cast<std::int64_t>(rng.below(1000)),
                                 static_cast<std::int64_t>(rng.below(1000))};
    if (counts.total() == 0) continue;
    const MetricsReport report = compute_metrics(counts);

    // Independent evaluations of the two defining ratios.
    const double fir = counts.fp + counts.tn > 0
                           ? static_cast<double>(counts.fp) /
                                 static_cast<double>(counts.fp + counts.tn)
                           : 0.0;
    const double mir = counts.fn + counts.tp > 0
                           ? static_cast<double>(counts.fn) /
                                 static_cast<double>(counts.fn + counts.tp)
                           : 0.0;
    EXPECT(report.fir == fir);
    EXPECT(report.mir == mir);
    if (counts.tp + counts.fn > 0) {
      EXPECT(std::abs(report.mir - (1.0 - report.speak_recall)) <= 1e-12);
    }
  }

  const MetricsReport sft = compute_metrics({479, 10000, 0, 521});
  EXPECT(near(sft.speak_recall, 0.479, 5e-4));
  EXPECT(near(sft.mir, 0.521, 5e-4));
  return true;
}

// ---- criterion 3: reward arithmetic --------------------------------------

bool criterion_reward_arithmetic() {
  RewardConfig config;
  config.lambda = 0.5;

  const auto outcome = [](DecisionLabel predicted, DecisionLabel gold,
                          std::optional<int> turns_early = std::nullopt,
                          std::optional<InterventionType> judged = std::nullopt,
                          std::optional<InterventionType> gold_type = std::nullopt) {
    RolloutOutcome result;
    result.predicted = predicted;
    result.gold = gold;
    result.turns_early = turns_early;
    result.judged_type = judged;
    result.gold_type = gold_type;
    return result;
  };

  using DL = DecisionLabel;
  using IT = InterventionType;
  const std::vector<std::pair<RolloutOutcome, double>> fixture = {
      // Matched-type on-time true positive.
      {outcome(DL::speak, DL::speak, 0, IT::data_provision, IT::data_provision), 1.4},
      // False positive with no upcoming gold SPEAK.
      {outcome(DL::speak, DL::silent), -1.6},
      // True negative / false negative: accuracy only.
      {outcome(DL::silent, DL::silent), 1.0},
      {outcome(DL::silent, DL::speak), -1.0},
      // Slightly-early false positive keeps the near bonus and the penalty.
      {outcome(DL::speak, DL::silent, 2), -1.4},
      // In-band timing is neutral; mismatched judgment earns no bonus.
      {outcome(DL::speak, DL::speak, 3, IT::data_provision, IT::data_provision), 1.3},
      {outcome(DL::speak, DL::speak, 5, IT::concept_definition, IT::data_provision),
       0.9},
      // Neutral-band false positive.
      {outcome(DL::speak, DL::silent, 4), -1.5},
  };
  for (const auto& [rollout, expected] : fixture) {
    const RewardBreakdown breakdown = score(rollout, config);
    EXPECT(near(breakdown.total, expected, 1e-12));
  }

  // Lambda monotonicity on false positives; invariance elsewhere.
  const std::vector<double> lambdas = {0.25, 0.5, 1.0};
  for (const auto& fp :
       {outcome(DL::speak, DL::silent), outcome(DL::speak, DL::silent, 1)}) {
    double previous = std::numeric_limits<double>::infinity();
    for (double lambda : lambdas) {
      RewardConfig swept = config;
      swept.lambda = lambda;
      const double total = score(fp, swept).total;
      EXPECT(total <= previous);
      EXPECT(total < previous);  // strictly decreasing for enabled necessity
      previous = total;
    }
  }
  for (const auto& unaffected :
       {outcome(DL::silent, DL::silent), outcome(DL::silent, DL::speak),
        outcome(DL::speak, DL::speak, 0, IT::data_provision, IT::data_provision)}) {
    const double reference = score(unaffected, config).total;
    for (double lambda : lambdas) {
      RewardConfig swept = config;
      swept.lambda = lambda;
      EXPECT(score(unaffected, swept).total == reference);
    }
  }
  return true;
}

// ---- criterion 4: GRPO advantages ----------------------------------------

bool criterion_grpo_advantages() {
  Rng rng(777);
  for (int g = 0; g < 1000; ++g) {
    std::vector<double> rewards;
    for (int i = 0; i < 8; ++i) rewards.push_back(-1.6 + 3.0 * rng.unit());
    const auto advantages = group_advantages(rewards);

    double mean = 0.0;
    for (double a : advantages) mean += a;
    mean /= 8.0;
    double variance = 0.0;
    for (double a : advantages) variance += (a - mean) * (a - mean);
    variance /= 8.0;

    EXPECT(std::abs(mean) < 1e-9);
    EXPECT(std::abs(std::sqrt(variance) - 1.0) < 1e-9);
  }

  const std::vector<double> constant(8, 0.25);
  for (double advantage : group_advantages(constant)) {
    EXPECT(advantage == 0.0);
  }
  return true;
}

// ---- criterion 5: balanced sampling --------------------------------------

bool criterion_balanced_sampling() {
  // 87% SILENT pool, like the corpus.
  std::vector<DecisionLabel> labels;
  for (int i = 0; i < 1000; ++i) {
    labels.push_back(i < 130 ? DecisionLabel::speak : DecisionLabel::silent);
  }

  BalancedBatchSampler sampler(labels, 32, 42);
  BalancedBatchSampler replay(labels, 32, 42);
  for (int b = 0; b < 500; ++b) {
    const auto batch = sampler.next_batch();
    EXPECT(batch.size() == 32);
    int speak = 0;
    for (std::size_t index : batch) {
      speak += labels[index] == DecisionLabel::speak ? 1 : 0;
    }
    EXPECT(speak == 16);
    EXPECT(batch == replay.next_batch());
  }
  return true;
}

// ---- criterion 6: threshold calibration ----------------------------------

CalibrationResult brute_force_calibration(const std::vector<ScoredExample>& scored,
                                          double fir_target) {
  std::vector<double> scores;
  for (const auto& example : scored) scores.push_back(example.speak_score);
  std::sort(scores.begin(), scores.end());
  scores.erase(std::unique(scores.begin(), scores.end()), scores.end());

  constexpr double inf = std::numeric_limits<double>::infinity();
  std::vector<double> candidates{-inf};
  for (std::size_t i = 0; i + 1 < scores.size(); ++i) {
    candidates.push_back((scores[i] + scores[i + 1]) / 2.0);
  }
  candidates.push_back(inf);

  CalibrationResult best;
  bool have_best = false;
  for (double threshold : candidates) {
    std::int64_t tp = 0, fp = 0, tn = 0, fn = 0;
    for (const auto& example : scored) {
      const bool speak = example.speak_score >= threshold;
      if (example.gold == DecisionLabel::speak) {
        (speak ? tp : fn)++;
      } else {
        (speak ? fp : tn)++;
      }
    }
    const double recall =
        tp + fn > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0;
    const double fir =
        fp + tn > 0 ? static_cast<double>(fp) / static_cast<double>(fp + tn) : 0.0;
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

bool criterion_calibration() {
  Rng rng(31337);
  double worst_seconds = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<ScoredExample> scored;
    scored.reserve(1000);
    for (int i = 0; i < 1000; ++i) {
      const bool speak_gold = rng.below(100) < 13;
      const double center = speak_gold ? 0.25 : -0.25;
      // Overlapping distributions, quantized to create score ties.
      const double value =
          std::round((center + 2.0 * (rng.unit() - 0.5)) * 40.0) / 40.0;
      scored.push_back(
          {value, speak_gold ? DecisionLabel::speak : DecisionLabel::silent});
    }
    for (double target : {0.05, 0.10, 0.20}) {
      const auto start = std::chrono::steady_clock::now();
      const CalibrationResult fast = calibrate_threshold(scored, target);
      worst_seconds = std::max(
          worst_seconds,
          std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
              .count());
      const CalibrationResult slow = brute_force_calibration(scored, target);
      EXPECT(fast.threshold == slow.threshold);
      EXPECT(fast.achieved_fir == slow.achieved_fir);
      EXPECT(fast.achieved_recall == slow.achieved_recall);
      EXPECT(fast.achieved_fir <= target);
    }
  }
  note("slowest calibration " + std::to_string(worst_seconds) + "s");
  EXPECT(worst_seconds < 1.0);
  return true;
}

// ---- criterion 7: ROUGE-L -------------------------------------------------

std::size_t brute_force_lcs(const std::vector<std::string>& a,
                            const std::vector<std::string>& b) {
  std::size_t best = 0;
  for (std::size_t mask = 0; mask < (std::size_t{1} << a.size()); ++mask) {
    std::vector<std::string> candidate;
    for (std::size_t i = 0; i < a.size(); ++i) {
      if (mask & (std::size_t{1} << i)) candidate.push_back(a[i]);
    }
    std::size_t j = 0;
    for (const auto& token : b) {
      if (j < candidate.size() && token == candidate[j]) ++j;
    }
    if (j == candidate.size()) best = std::max(best, candidate.size());
  }
  return best;
}

bool criterion_rouge() {
  Rng rng(90210);
  const std::vector<std::string> vocabulary = {"ash", "birch", "cedar", "doum",
                                               "elm", "fir"};
  for (int i = 0; i < 100; ++i) {
    std::vector<std::string> a, b;
    const std::size_t len_a = 1 + rng.below(10);
    const std::size_t len_b = 1 + rng.below(10);
    for (std::size_t k = 0; k < len_a; ++k) {
      a.push_back(vocabulary[rng.below(vocabulary.size())]);
    }
    for (std::size_t k = 0; k < len_b; ++k) {
      b.push_back(vocabulary[rng.below(vocabulary.size())]);
    }
    const std::size_t expected = brute_force_lcs(a, b);
    EXPECT(lcs_length(a, b) == expected);

    std::string candidate, reference;
    for (const auto& token : a) candidate += token + " ";
    for (const auto& token : b) reference += token + " ";
    const RougeScore score = rouge_l(candidate, reference);
    EXPECT(score.precision ==
           static_cast<double>(expected) / static_cast<double>(a.size()));
    EXPECT(score.recall ==
           static_cast<double>(expected) / static_cast<double>(b.size()));
  }

  const RougeScore same = rouge_l("one two three", "one two three");
  EXPECT(same.precision == 1.0);
  EXPECT(same.recall == 1.0);
  EXPECT(same.f1 == 1.0);
  const RougeScore disjoint = rouge_l("one two", "three four");
  EXPECT(disjoint.precision == 0.0);
  EXPECT(disjoint.recall == 0.0);
  EXPECT(disjoint.f1 == 0.0);
  return true;
}

// ---- criterion 8: stats analyzer -----------------------------------------

Transcript stats_fixture(int interventions, InterventionType type,
                         const std::string& id) {
  Transcript transcript;
  transcript.conversation_id = id;
  transcript.spec.human_count = 2;
  transcript.scenario.intervention_type = type;
  for (int d = 0; d < 10; ++d) {
    Turn human;
    human.speaker = Speaker::human(d % 2);
    human.text = "an unremarkable human line";
    human.index = static_cast<int>(transcript.turns.size());
    transcript.turns.push_back(human);
    Turn agent;
    agent.speaker = Speaker::agent();
    agent.text = d < interventions ? "a pointed intervention" : ">";
    agent.index = static_cast<int>(transcript.turns.size());
    transcript.turns.push_back(agent);
  }
  return transcript;
}

bool criterion_stats() {
  std::vector<Transcript> fixture;
  fixture.push_back(stats_fixture(2, InterventionType::data_provision, "c0"));
  fixture.push_back(stats_fixture(2, InterventionType::data_provision, "c1"));
  fixture.push_back(stats_fixture(1, InterventionType::factual_correction, "c2"));
  fixture.push_back(stats_fixture(3, InterventionType::synthesis_reframing, "c3"));

  const CorpusStats stats = analyze(fixture);
  EXPECT(near(stats.interventions_mean, 2.0, 1e-12));
  EXPECT(near(stats.interventions_median, 2.0, 1e-12));
  EXPECT(near(stats.interventions_std, std::sqrt(0.5), 1e-12));
  EXPECT(near(stats.direct_address_fraction + stats.no_invitation_fraction, 1.0,
              1e-12));

  double histogram_sum = 0.0;
  for (const auto& [type, cell] : stats.type_histogram) histogram_sum += cell.fraction;
  EXPECT(near(histogram_sum, 1.0, 1e-9));

  // Mock corpora keep every conversation inside the 0..3 band.
  ToolConfig config;
  Gateway gateway(config.backends);
  const fs::path dir = fs::temp_directory_path() / "turnwise_acceptance_stats";
  fs::remove_all(dir);
  PipelineOptions options;
  options.out_dir = (dir / "run").string();
  options.backend_id = std::string(kMockBackendId);
  options.conversations = 40;
  options.seed = 23;
  run_pipeline(gateway, config, options);
  const auto transcripts = read_transcripts_dir((dir / "run" / "transcripts").string());
  EXPECT(transcripts.size() == 40);
  for (const auto& transcript : transcripts) {
    int interventions = 0;
    for (const auto& turn : transcript.turns) {
      interventions += turn.is_intervention() ? 1 : 0;
    }
    EXPECT(interventions >= 0);
    EXPECT(interventions <= 3);
  }
  fs::remove_all(dir);
  return true;
}

// ---- criterion 9: ablation aggregation -----------------------------------

bool criterion_ablation() {
  std::map<double, std::vector<RunMetrics>> runs;
  runs[0.5] = {{0.68, 0.80, 0.22, 0.18},
               {0.67, 0.81, 0.23, 0.19},
               {0.67, 0.82, 0.23, 0.19}};
  const RunMetrics baseline{0.740, 0.479, 0.044, 0.521};
  const auto rows = aggregate_ablation(runs, baseline);
  EXPECT(rows.size() == 1);
  EXPECT(near(rows[0].mir.mean, (0.18 + 0.19 + 0.19) / 3.0, 1e-12));
  // Sample std with the n-1 denominator, from first principles.
  const double mean = (0.18 + 0.19 + 0.19) / 3.0;
  const double sample_std = std::sqrt(((0.18 - mean) * (0.18 - mean) +
                                       (0.19 - mean) * (0.19 - mean) +
                                       (0.19 - mean) * (0.19 - mean)) /
                                      2.0);
  EXPECT(near(rows[0].mir.stddev, sample_std, 1e-12));
  EXPECT(near(rows[0].macro_f1.mean, (0.68 + 0.67 + 0.67) / 3.0, 1e-12));

  // Table-anchored delta: baseline 0.521 against a lambda mean of 0.186.
  std::map<double, std::vector<RunMetrics>> single;
  single[0.5] = {{0.673, 0.814, 0.227, 0.186}};
  const auto anchored = aggregate_ablation(single, baseline);
  EXPECT(anchored.size() == 1);
  EXPECT(near(anchored[0].delta_mir, -0.335, 1e-9));
  EXPECT(anchored[0].mir.stddev == 0.0);
  return true;
}

// ---- criterion 10: gateway cache, retry, in-flight ------------------------

class AcceptanceClock final : public Clock {
 public:
  std::chrono::steady_clock::time_point now() override { return now_; }
  void sleep_for(std::chrono::milliseconds duration) override {
    now_ += duration;
    slept_.push_back(duration);
  }
  std::vector<std::chrono::milliseconds> slept_;

 private:
  std::chrono::steady_clock::time_point now_{};
};

class AcceptanceTransport final : public Transport {
 public:
  explicit AcceptanceTransport(std::vector<HttpResult> script)
      : script_(std::move(script)) {}

  HttpResult post(const std::string&, const HttpHeaders&,
                  const std::string&) override {
    const int active = ++active_;
    int peak = peak_.load();
    while (active > peak && !peak_.compare_exchange_weak(peak, active)) {
    }
    if (pause_) std::this_thread::sleep_for(std::chrono::milliseconds(3));
    --active_;
    const std::size_t index = cursor_.fetch_add(1);
    ++calls_;
    if (index < script_.size()) return script_[index];
    return {200, R"({"choices":[{"message":{"content":"ok"}}]})", false, ""};
  }

  std::atomic<int> calls_{0};
  bool pause_ = false;

  int peak() const { return peak_.load(); }

 private:
  std::vector<HttpResult> script_;
  std::atomic<std::size_t> cursor_{0};
  std::atomic<int> active_{0};
  std::atomic<int> peak_{0};
};

bool criterion_gateway() {
  const std::string ok = R"({"choices":[{"message":{"content":"cached text"}}]})";

  // Cache hit: byte-identical text, zero further transport calls.
  {
    BackendConfig backend;
    backend.endpoint = "https://fake.test/v1";
    backend.requests_per_minute = 600000;
    auto transport =
        std::make_unique<AcceptanceTransport>(std::vector<HttpResult>{{200, ok, false, ""}});
    auto* probe = transport.get();
    Gateway gateway({{"remote", backend}}, std::move(transport),
                    std::make_shared<AcceptanceClock>());
    ChatRequest request;
    request.backend_id = "remote";
    request.system = "acceptance system";
    request.user = "acceptance user";
    const ChatResponse first = gateway.complete(request);
    const ChatResponse second = gateway.complete(request);
    EXPECT(first.text == "cached text");
    EXPECT(second.cached);
    EXPECT(second.text == first.text);
    EXPECT(probe->calls_.load() == 1);
  }

  // Retry/backoff against a scripted transport with a virtual clock.
  {
    BackendConfig backend;
    backend.endpoint = "https://fake.test/v1";
    backend.requests_per_minute = 600000;
    backend.retry.max_attempts = 3;
    backend.retry.base_backoff_s = 0.5;
    auto transport = std::make_unique<AcceptanceTransport>(std::vector<HttpResult>{
        {503, "", false, ""}, {0, "", true, "reset"}, {200, ok, false, ""}});
    auto clock = std::make_shared<AcceptanceClock>();
    Gateway gateway({{"remote", backend}}, std::move(transport), clock);
    ChatRequest request;
    request.backend_id = "remote";
    request.system = "acceptance system";
    request.user = "retry user";
    const ChatResponse response = gateway.complete(request);
    EXPECT(response.attempts == 3);
    EXPECT(clock->slept_.size() == 2);
    EXPECT(clock->slept_[0] == std::chrono::milliseconds(500));
    EXPECT(clock->slept_[1] == std::chrono::milliseconds(1000));
  }

  // In-flight bound under concurrency.
  {
    BackendConfig backend;
    backend.endpoint = "https://fake.test/v1";
    backend.requests_per_minute = 600000;
    backend.max_in_flight = 3;
    auto transport = std::make_unique<AcceptanceTransport>(std::vector<HttpResult>{});
    transport->pause_ = true;
    auto* probe = transport.get();
    Gateway gateway({{"remote", backend}}, std::move(transport));
    std::vector<std::thread> threads;
    for (int i = 0; i < 12; ++i) {
      threads.emplace_back([&gateway, i] {
        ChatRequest request;
        request.backend_id = "remote";
        request.system = "acceptance system";
        request.user = "parallel user " + std::to_string(i);
        gateway.complete(request);
      });
    }
    for (auto& thread : threads) thread.join();
    EXPECT(probe->peak() <= 3);
    EXPECT(probe->calls_.load() == 12);
  }
  return true;
}

}  // namespace

int main() {
  struct Criterion {
    int number;
    const char* name;
    std::function<bool()> run;
  };
  const std::vector<Criterion> criteria = {
      {1, "end-to-end mock pipeline", criterion_pipeline},
      {2, "metric identities", criterion_metric_identities},
      {3, "reward arithmetic", criterion_reward_arithmetic},
      {4, "GRPO group advantages", criterion_grpo_advantages},
      {5, "balanced batch sampling", criterion_balanced_sampling},
      {6, "threshold calibration vs brute force", criterion_calibration},
      {7, "ROUGE-L vs brute-force LCS", criterion_rouge},
      {8, "stats analyzer", criterion_stats},
      {9, "ablation aggregation", criterion_ablation},
      {10, "gateway cache, retry and in-flight bound", criterion_gateway},
  };

  int failures = 0;
  for (const auto& criterion : criteria) {
    g_notes.clear();
    bool ok = false;
    try {
      ok = criterion.run();
    } catch (const std::exception& e) {
      note(std::string("exception: ") + e.what());
    }
    std::printf("[%s] criterion %2d: %s\n", ok ? "PASS" : "FAIL",
                criterion.number, criterion.name);
    if (!ok) {
      ++failures;
      for (const auto& message : g_notes) {
        std::printf("        %s\n", message.c_str());
      }
    }
  }
  if (failures > 0) {
    std::printf("%d criterion(s) failed\n", failures);
    return 1;
  }
  std::printf("all %zu criteria passed\n", criteria.size());
  return 0;
}

// turnwise: generate, analyze and evaluate grounded multi-party conversation
// data with explicit SPEAK/SILENT agent decisions.

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "turnwise/error.hpp"
#include "turnwise/pipeline.hpp"
#include "turnwise/version.hpp"

namespace {

using namespace turnwise;

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitStageFailure = 2;

std::string manifest_path_for_file(const std::string& output) {
  return output + ".manifest.json";
}

std::string manifest_path_for_dir(const std::string& dir) {
  return (std::filesystem::path(dir) / "run_manifest.json").string();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"turnwise - multi-party conversation dataset and evaluation toolchain"};
  app.set_version_flag("--version", std::string("turnwise ") + kVersion);
  app.require_subcommand(1);

  std::string config_path;
  app.add_option("--config", config_path, "JSON configuration file");

  // clean
  auto* clean_cmd = app.add_subcommand("clean", "Clean the raw source corpus");
  std::string clean_input, clean_output, clean_report;
  std::size_t clean_limit = 16000;
  clean_cmd->add_option("--input", clean_input, "Raw corpus CSV")->required();
  clean_cmd->add_option("--output", clean_output, "Cleaned records JSONL")->required();
  clean_cmd->add_option("--limit", clean_limit, "Rows to keep after cleaning");
  clean_cmd->add_option("--report", clean_report, "Cleaning report JSON");

  // augment
  auto* augment_cmd =
      app.add_subcommand("augment", "Infer social context and intervention type");
  std::string augment_input, augment_output, augment_backend;
  augment_cmd->add_option("--input", augment_input, "Cleaned records JSONL")->required();
  augment_cmd->add_option("--output", augment_output, "Scenario JSONL")->required();
  augment_cmd->add_option("--backend", augment_backend, "Backend name");

  // synthesize
  auto* synth_cmd = app.add_subcommand("synthesize", "Generate transcripts");
  std::string synth_scenarios, synth_output, synth_backend;
  std::uint64_t synth_seed = 0;
  bool synth_seed_set = false;
  synth_cmd->add_option("--scenarios", synth_scenarios, "Scenario JSONL")->required();
  synth_cmd->add_option("--output", synth_output, "Transcripts directory")->required();
  synth_cmd->add_option("--backend", synth_backend, "Backend name");
  synth_cmd->add_option("--seed", synth_seed, "Sampling seed")
      ->each([&](const std::string&) { synth_seed_set = true; });

  // build-dataset
  auto* build_cmd =
      app.add_subcommand("build-dataset", "Build sliding-window JSONL datasets");
  std::string build_transcripts, build_out, build_variant = "both";
  std::uint64_t build_seed = 0;
  bool build_seed_set = false;
  build_cmd->add_option("--transcripts", build_transcripts, "Transcripts directory")
      ->required();
  build_cmd->add_option("--out", build_out, "Output directory")->required();
  build_cmd->add_option("--variant", build_variant, "token|dialogue|both")
      ->check(CLI::IsMember({"token", "dialogue", "both"}));
  build_cmd->add_option("--seed", build_seed, "Split shuffle seed")
      ->each([&](const std::string&) { build_seed_set = true; });

  // stats
  auto* stats_cmd = app.add_subcommand("stats", "Corpus statistics report");
  std::string stats_transcripts, stats_markers, stats_out;
  stats_cmd->add_option("--transcripts", stats_transcripts, "Transcripts directory")
      ->required();
  stats_cmd->add_option("--markers", stats_markers,
                        "Disagreement marker list, one per line");
  stats_cmd->add_option("--out", stats_out, "Report path")->required();

  // evaluate
  auto* eval_cmd = app.add_subcommand("evaluate", "Score SPEAK/SILENT predictions");
  std::string eval_dataset, eval_predictions, eval_mode = "token", eval_report;
  std::string eval_policy = "silent";
  eval_cmd->add_option("--dataset", eval_dataset, "Dataset JSONL")->required();
  eval_cmd
      ->add_option("--predictions", eval_predictions,
                   "Predictions JSONL, or a backend name for live zero-shot")
      ->required();
  eval_cmd->add_option("--mode", eval_mode, "token|dialogue")
      ->check(CLI::IsMember({"token", "dialogue"}));
  eval_cmd->add_option("--report", eval_report, "Report path");
  eval_cmd
      ->add_option("--parse-failure-policy", eval_policy,
                   "How unparseable outputs count: silent|speak|skip")
      ->check(CLI::IsMember({"silent", "speak", "skip"}));

  // reward-score
  auto* reward_cmd = app.add_subcommand("reward-score", "Score rollouts and advantages");
  std::string reward_rollouts, reward_out, reward_judge;
  std::string reward_components = "all";
  double reward_lambda = 0.5;
  int reward_group_size = kDefaultGroupSize;
  bool reward_waive_near_miss = false;
  reward_cmd->add_option("--rollouts", reward_rollouts, "Rollout JSONL")->required();
  reward_cmd->add_option("--out", reward_out, "Scored JSONL output")->required();
  reward_cmd->add_option("--lambda", reward_lambda, "Necessity penalty weight");
  reward_cmd
      ->add_option("--components", reward_components,
                   "all|acc|acc+soft|acc+soft+type")
      ->check(CLI::IsMember({"all", "acc", "acc+soft", "acc+soft+type"}));
  reward_cmd->add_option("--judge", reward_judge,
                         "Backend used to judge intervention types");
  reward_cmd->add_option("--group-size", reward_group_size, "Rollout group size");
  reward_cmd->add_flag("--waive-near-miss", reward_waive_near_miss,
                       "Waive the necessity penalty for near-miss early SPEAKs");

  // calibrate
  auto* calibrate_cmd =
      app.add_subcommand("calibrate", "Sweep the speak-score threshold");
  std::string calibrate_scored, calibrate_out;
  double calibrate_target = 0.10;
  calibrate_cmd->add_option("--scored", calibrate_scored, "Scored JSONL")->required();
  calibrate_cmd->add_option("--fir-target", calibrate_target, "Maximum FIR");
  calibrate_cmd->add_option("--out", calibrate_out, "Result JSON path");

  // ablate-report
  auto* ablate_cmd =
      app.add_subcommand("ablate-report", "Aggregate per-seed runs per lambda");
  std::string ablate_runs, ablate_baseline, ablate_out;
  ablate_cmd->add_option("--runs", ablate_runs, "Directory of run report JSONs")
      ->required();
  ablate_cmd->add_option("--baseline", ablate_baseline, "Baseline report JSON")
      ->required();
  ablate_cmd->add_option("--out", ablate_out, "Aggregated JSON path");

  // pipeline
  auto* pipeline_cmd =
      app.add_subcommand("pipeline", "clean -> augment -> synthesize -> dataset -> stats");
  std::string pipeline_input, pipeline_backend, pipeline_out = "run";
  std::size_t pipeline_conversations = 50;
  std::uint64_t pipeline_seed = 0;
  bool pipeline_seed_set = false;
  pipeline_cmd->add_option("--input", pipeline_input,
                           "Raw corpus CSV (omit for the built-in demo corpus)");
  pipeline_cmd->add_option("--backend", pipeline_backend, "Backend name");
  pipeline_cmd->add_option("--conversations", pipeline_conversations,
                           "Conversations to generate");
  pipeline_cmd->add_option("--seed", pipeline_seed, "Run seed")
      ->each([&](const std::string&) { pipeline_seed_set = true; });
  pipeline_cmd->add_option("--out", pipeline_out, "Output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n\n" << app.help() << std::flush;
    return kExitUsage;
  }

  ToolConfig config;
  try {
    if (!config_path.empty()) config = load_config(config_path);
  } catch (const Error& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitUsage;
  }

  const auto backend_or_default = [&](const std::string& flag) {
    return flag.empty() ? config.default_backend : flag;
  };

  Gateway gateway(config.backends);

  try {
    if (*clean_cmd) {
      ManifestScope scope("clean", config, config.seed);
      const CleanResult result =
          run_clean(clean_input, clean_output, clean_limit, clean_report);
      auto& manifest = scope.manifest();
      manifest.inputs["input"] = clean_input;
      manifest.outputs["output"] = clean_output;
      if (!clean_report.empty()) manifest.outputs["report"] = clean_report;
      manifest.counts["input_rows"] = result.report.input_count;
      manifest.counts["retained"] = result.report.retained_count;
      manifest.counts["written"] = static_cast<std::int64_t>(result.written);
      scope.finish_and_write(manifest_path_for_file(clean_output));
      std::cout << "clean: kept " << result.written << " of "
                << result.report.input_count << " rows\n";
    } else if (*augment_cmd) {
      const std::string backend = backend_or_default(augment_backend);
      ManifestScope scope("augment", config, config.seed);
      const AugmentResult result =
          run_augment(gateway, config, backend, augment_input, augment_output);
      auto& manifest = scope.manifest();
      manifest.inputs["input"] = augment_input;
      manifest.inputs["backend"] = backend;
      manifest.outputs["output"] = augment_output;
      manifest.counts["scenarios"] = static_cast<std::int64_t>(result.scenarios);
      manifest.counts["failed"] = static_cast<std::int64_t>(result.failed);
      scope.finish_and_write(manifest_path_for_file(augment_output));
      std::cout << "augment: " << result.scenarios << " scenarios, "
                << result.failed << " failed\n";
    } else if (*synth_cmd) {
      const std::string backend = backend_or_default(synth_backend);
      const std::uint64_t seed = synth_seed_set ? synth_seed : config.seed;
      ManifestScope scope("synthesize", config, seed);
      const SynthesizeResult result = run_synthesize(
          gateway, config, backend, synth_scenarios, synth_output, seed);
      auto& manifest = scope.manifest();
      manifest.inputs["scenarios"] = synth_scenarios;
      manifest.inputs["backend"] = backend;
      manifest.outputs["output"] = synth_output;
      manifest.counts["accepted"] = static_cast<std::int64_t>(result.accepted);
      manifest.counts["rejected"] = static_cast<std::int64_t>(result.rejected);
      manifest.counts["failed"] = static_cast<std::int64_t>(result.failed);
      scope.finish_and_write(manifest_path_for_dir(synth_output));
      std::cout << "synthesize: " << result.accepted << " accepted, "
                << result.rejected << " rejected, " << result.failed
                << " failed\n";
    } else if (*build_cmd) {
      const std::uint64_t seed = build_seed_set ? build_seed : config.seed;
      const VariantSelection variants =
          build_variant == "token"
              ? VariantSelection::token
              : build_variant == "dialogue" ? VariantSelection::dialogue
                                            : VariantSelection::both;
      ManifestScope scope("build-dataset", config, seed);
      const BuildDatasetResult result =
          run_build_dataset(build_transcripts, build_out, variants, seed);
      auto& manifest = scope.manifest();
      manifest.inputs["transcripts"] = build_transcripts;
      manifest.outputs["out"] = build_out;
      manifest.counts["conversations"] =
          static_cast<std::int64_t>(result.conversations);
      manifest.counts["token_examples"] =
          static_cast<std::int64_t>(result.token_counts.total());
      manifest.counts["dialogue_examples"] =
          static_cast<std::int64_t>(result.dialogue_counts.total());
      scope.finish_and_write(manifest_path_for_dir(build_out));
      std::cout << "build-dataset: " << result.conversations << " conversations, "
                << result.token_counts.total() << " token examples, "
                << result.dialogue_counts.total() << " dialogue examples\n";
    } else if (*stats_cmd) {
      ManifestScope scope("stats", config, config.seed);
      const CorpusStats stats =
          run_stats(stats_transcripts, stats_markers, stats_out, config);
      auto& manifest = scope.manifest();
      manifest.inputs["transcripts"] = stats_transcripts;
      manifest.outputs["out"] = stats_out;
      manifest.counts["conversations"] = stats.conv_count;
      manifest.counts["speak_turns"] = stats.speak_turn_count;
      scope.finish_and_write(manifest_path_for_file(stats_out));
      std::cout << "stats: " << stats.conv_count << " conversations, mean "
                << stats.interventions_mean << " interventions\n";
    } else if (*eval_cmd) {
      EvaluateOptions options;
      options.dataset_path = eval_dataset;
      options.predictions = eval_predictions;
      options.mode =
          eval_mode == "token" ? DecisionMode::token : DecisionMode::dialogue;
      options.report_path = eval_report;
      options.policy = eval_policy == "speak"
                           ? ParseFailurePolicy::count_as_speak
                           : eval_policy == "skip" ? ParseFailurePolicy::skip
                                                   : ParseFailurePolicy::count_as_silent;
      ManifestScope scope("evaluate", config, config.seed);
      const EvaluationReport report = run_evaluate(gateway, config, options);
      auto& manifest = scope.manifest();
      manifest.inputs["dataset"] = eval_dataset;
      manifest.inputs["predictions"] = eval_predictions;
      if (!eval_report.empty()) manifest.outputs["report"] = eval_report;
      manifest.counts["examples"] = report.overall.counts.total();
      manifest.counts["parse_failures"] = report.parse_failures;
      if (!eval_report.empty()) {
        scope.finish_and_write(manifest_path_for_file(eval_report));
      }
      std::cout << "evaluate: macro_f1 " << report.overall.macro_f1 << ", recall "
                << report.overall.speak_recall << ", fir " << report.overall.fir
                << ", mir " << report.overall.mir << "\n";
    } else if (*reward_cmd) {
      RewardScoreOptions options;
      options.rollouts_path = reward_rollouts;
      options.out_path = reward_out;
      options.reward = parse_reward_components(reward_components, reward_lambda);
      options.reward.waive_necessity_for_near_miss = reward_waive_near_miss;
      options.group_size = reward_group_size;
      options.judge_backend = reward_judge;
      ManifestScope scope("reward-score", config, config.seed);
      const RewardScoreResult result = run_reward_score(gateway, config, options);
      auto& manifest = scope.manifest();
      manifest.inputs["rollouts"] = reward_rollouts;
      manifest.outputs["out"] = reward_out;
      manifest.counts["rollouts"] = static_cast<std::int64_t>(result.rollouts);
      manifest.counts["groups"] = static_cast<std::int64_t>(result.groups);
      scope.finish_and_write(manifest_path_for_file(reward_out));
      std::cout << "reward-score: " << result.rollouts << " rollouts in "
                << result.groups << " groups\n";
    } else if (*calibrate_cmd) {
      const CalibrationResult result =
          run_calibrate(calibrate_scored, calibrate_target, calibrate_out);
      std::cout << "calibrate: threshold " << result.threshold << ", fir "
                << result.achieved_fir << ", recall " << result.achieved_recall
                << "\n";
    } else if (*ablate_cmd) {
      const AblateReportResult result =
          run_ablate_report(ablate_runs, ablate_baseline, ablate_out);
      std::cout << result.rendered;
    } else if (*pipeline_cmd) {
      PipelineOptions options;
      options.input_csv = pipeline_input;
      options.backend_id = backend_or_default(pipeline_backend);
      options.conversations = pipeline_conversations;
      options.seed = pipeline_seed_set ? pipeline_seed : config.seed;
      options.out_dir = pipeline_out;
      ManifestScope scope("pipeline", config, options.seed);
      const PipelineResult result = run_pipeline(gateway, config, options);
      auto& manifest = scope.manifest();
      if (!pipeline_input.empty()) manifest.inputs["input"] = pipeline_input;
      manifest.inputs["backend"] = options.backend_id;
      manifest.outputs["out"] = pipeline_out;
      manifest.counts["cleaned"] = static_cast<std::int64_t>(result.clean.written);
      manifest.counts["scenarios"] =
          static_cast<std::int64_t>(result.augment.scenarios);
      manifest.counts["transcripts"] =
          static_cast<std::int64_t>(result.synthesize.accepted);
      manifest.counts["token_examples"] =
          static_cast<std::int64_t>(result.dataset.token_counts.total());
      manifest.counts["dialogue_examples"] =
          static_cast<std::int64_t>(result.dataset.dialogue_counts.total());
      scope.finish_and_write(
          (std::filesystem::path(pipeline_out) / "manifest.json").string());
      std::cout << "pipeline: " << result.synthesize.accepted
                << " transcripts, "
                << result.dataset.token_counts.total() +
                       result.dataset.dialogue_counts.total()
                << " examples across both variants\n";
    }
  } catch (const Error& e) {
    std::cerr << app.get_subcommands().front()->get_name() << ": " << e.what()
              << "\n";
    return e.code() == Errc::config_invalid || e.code() == Errc::invalid_argument
               ? kExitUsage
               : kExitStageFailure;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitStageFailure;
  }
  return kExitOk;
}

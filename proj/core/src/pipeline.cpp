#include "turnwise/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <limits>
#include <mutex>
#include <sstream>
#include <thread>

#include <nlohmann/json.hpp>

#include "sha256.hpp"
#include "turnwise/error.hpp"
#include "turnwise/rng.hpp"
#include "turnwise/version.hpp"

namespace turnwise {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

constexpr int kMaxParseRetries = 3;

std::string iso_utc_now() {
  const std::time_t now = std::chrono::system_clock::to_time_t(
      std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buffer[32];
  std::strftime(buffer, sizeof buffer, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buffer;
}

std::uint64_t sub_seed(std::uint64_t seed, std::string_view tag, std::int64_t id) {
  return fnv1a64(std::to_string(seed) + ":" + std::string(tag) + ":" +
                 std::to_string(id));
}

/// Ordered parallel map: fn(i) runs on worker threads, the first exception
/// is rethrown after all workers join.
template <typename Fn>
void parallel_for(std::size_t count, int workers, Fn&& fn) {
  workers = std::max(1, std::min<int>(workers, static_cast<int>(count)));
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr first_error;
  std::mutex error_mutex;
  std::vector<std::thread> threads;
  threads.reserve(static_cast<std::size_t>(workers));
  for (int w = 0; w < workers; ++w) {
    threads.emplace_back([&] {
      for (;;) {
        const std::size_t i = next.fetch_add(1);
        if (i >= count) return;
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!first_error) first_error = std::current_exception();
        }
      }
    });
  }
  for (auto& thread : threads) thread.join();
  if (first_error) std::rethrow_exception(first_error);
}

json spec_to_json(const GenerationSpec& spec) {
  return json{{"style", spec.style},
              {"tone", spec.tone},
              {"follow_up", spec.follow_up},
              {"human_count", spec.human_count},
              {"seed", spec.seed}};
}

GenerationSpec spec_from_json(const json& j) {
  GenerationSpec spec;
  spec.style = j.at("style").get<std::string>();
  spec.tone = j.at("tone").get<std::string>();
  spec.follow_up = j.at("follow_up").get<std::string>();
  spec.human_count = j.at("human_count").get<int>();
  spec.seed = j.at("seed").get<std::uint64_t>();
  return spec;
}

json scenario_to_json(const Scenario& scenario) {
  return json{{"record_id", scenario.record_id},
              {"social_context", scenario.social_context},
              {"intervention_type",
               std::string(intervention_type_label(scenario.intervention_type))}};
}

Scenario scenario_from_json(const json& j) {
  Scenario scenario;
  scenario.record_id = j.value("record_id", std::int64_t{0});
  scenario.social_context = j.at("social_context").get<std::string>();
  scenario.intervention_type =
      parse_intervention_type(j.at("intervention_type").get<std::string>());
  return scenario;
}

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(Errc::io_error, "cannot create directory " + dir);
}

void write_text_file(const std::string& path, std::string_view text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::io_error, "cannot write " + path);
  out << text;
  if (!out) throw Error(Errc::io_error, "write failed for " + path);
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::io_error, "cannot open " + path);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

const BackendConfig* find_backend(const ToolConfig& config,
                                  const std::string& backend_id) {
  const auto it = config.backends.find(backend_id);
  return it == config.backends.end() ? nullptr : &it->second;
}

}  // namespace

ToolConfig default_config() { return ToolConfig{}; }

ToolConfig load_config(const std::string& path) {
  json j = json::parse(read_text_file(path), nullptr, false);
  if (j.is_discarded() || !j.is_object()) {
    throw Error(Errc::config_invalid, "config is not a JSON object: " + path);
  }

  static const std::vector<std::string> known_top = {
      "default_backend", "seed", "parallelism", "disagreement_markers", "backends"};
  for (const auto& [key, value] : j.items()) {
    if (std::find(known_top.begin(), known_top.end(), key) == known_top.end()) {
      throw Error(Errc::config_invalid, "unknown config key: " + key);
    }
  }

  ToolConfig config;
  try {
    config.default_backend = j.value("default_backend", config.default_backend);
    config.seed = j.value("seed", config.seed);
    config.parallelism = j.value("parallelism", config.parallelism);
    if (j.contains("disagreement_markers")) {
      config.disagreement_markers =
          j["disagreement_markers"].get<std::vector<std::string>>();
    }
    if (j.contains("backends")) {
      static const std::vector<std::string> known_backend = {
          "endpoint", "model", "auth_env", "max_in_flight",
          "requests_per_minute", "retry_max_attempts", "retry_base_backoff_s",
          "cache_dir", "temperature", "max_output"};
      for (const auto& [name, spec] : j["backends"].items()) {
        for (const auto& [key, value] : spec.items()) {
          if (std::find(known_backend.begin(), known_backend.end(), key) ==
              known_backend.end()) {
            throw Error(Errc::config_invalid,
                        "unknown backend key: " + name + "." + key);
          }
        }
        BackendConfig backend;
        backend.endpoint = spec.value("endpoint", "");
        backend.model = spec.value("model", "");
        backend.auth_env = spec.value("auth_env", "");
        backend.max_in_flight = spec.value("max_in_flight", backend.max_in_flight);
        backend.requests_per_minute =
            spec.value("requests_per_minute", backend.requests_per_minute);
        backend.retry.max_attempts =
            spec.value("retry_max_attempts", backend.retry.max_attempts);
        backend.retry.base_backoff_s =
            spec.value("retry_base_backoff_s", backend.retry.base_backoff_s);
        backend.cache_dir = spec.value("cache_dir", "");
        backend.temperature = spec.value("temperature", backend.temperature);
        backend.max_output = spec.value("max_output", backend.max_output);
        config.backends[name] = std::move(backend);
      }
    }
  } catch (const json::exception& e) {
    throw Error(Errc::config_invalid, std::string("bad config value: ") + e.what());
  }
  if (config.parallelism < 1) {
    throw Error(Errc::config_invalid, "parallelism must be >= 1");
  }
  return config;
}

std::string config_hash(const ToolConfig& config) {
  json backends = json::object();
  for (const auto& [name, backend] : config.backends) {
    backends[name] = {{"endpoint", backend.endpoint},
                      {"model", backend.model},
                      {"auth_env", backend.auth_env},
                      {"max_in_flight", backend.max_in_flight},
                      {"requests_per_minute", backend.requests_per_minute},
                      {"retry_max_attempts", backend.retry.max_attempts},
                      {"retry_base_backoff_s", backend.retry.base_backoff_s},
                      {"cache_dir", backend.cache_dir},
                      {"temperature", backend.temperature},
                      {"max_output", backend.max_output}};
  }
  json j{{"default_backend", config.default_backend},
         {"seed", config.seed},
         {"parallelism", config.parallelism},
         {"disagreement_markers", config.disagreement_markers},
         {"backends", std::move(backends)}};
  return detail::sha256_hex(j.dump());
}

void write_manifest(const RunManifest& manifest, const std::string& path) {
  json j{{"subcommand", manifest.subcommand},
         {"config_hash", manifest.config_hash},
         {"seed", manifest.seed},
         {"inputs", manifest.inputs},
         {"outputs", manifest.outputs},
         {"tool_version", manifest.tool_version},
         {"started_at", manifest.started_at},
         {"finished_at", manifest.finished_at},
         {"counts", manifest.counts}};
  write_text_file(path, j.dump(2) + "\n");
}

ManifestScope::ManifestScope(std::string subcommand, const ToolConfig& config,
                             std::uint64_t seed) {
  manifest_.subcommand = std::move(subcommand);
  manifest_.config_hash = config_hash(config);
  manifest_.seed = seed;
  manifest_.tool_version = kVersion;
  manifest_.started_at = iso_utc_now();
}

void ManifestScope::finish_and_write(const std::string& path) {
  manifest_.finished_at = iso_utc_now();
  write_manifest(manifest_, path);
}

void write_augmented_jsonl(const std::string& path,
                           const std::vector<AugmentedRecord>& rows) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::io_error, "cannot write " + path);
  for (const auto& row : rows) {
    json j{{"record",
            {{"id", row.record.id},
             {"question_title", row.record.question_title},
             {"question_content", row.record.question_content},
             {"best_answer", row.record.best_answer}}},
           {"scenario", scenario_to_json(row.scenario)}};
    out << j.dump() << '\n';
  }
  if (!out) throw Error(Errc::io_error, "write failed for " + path);
}

std::vector<AugmentedRecord> read_augmented_jsonl(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::io_error, "cannot open " + path);
  std::vector<AugmentedRecord> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded()) throw Error(Errc::io_error, "bad line in " + path);
    AugmentedRecord row;
    const json& record = j.at("record");
    row.record.id = record.at("id").get<std::int64_t>();
    row.record.question_title = record.at("question_title").get<std::string>();
    row.record.question_content = record.at("question_content").get<std::string>();
    row.record.best_answer = record.at("best_answer").get<std::string>();
    row.scenario = scenario_from_json(j.at("scenario"));
    row.scenario.record_id = row.record.id;
    rows.push_back(std::move(row));
  }
  return rows;
}

ChatRequest make_stage_request(const ToolConfig& config,
                               const std::string& backend_id,
                               std::string system_prompt) {
  ChatRequest request;
  request.backend_id = backend_id;
  request.system = std::move(system_prompt);
  request.user = std::string(kStageUserDirective);
  if (const BackendConfig* backend = find_backend(config, backend_id)) {
    request.model_id = backend->model;
    request.temperature = backend->temperature;
    request.max_output = backend->max_output;
  } else {
    request.temperature = 0.7;
    request.max_output = 2048;
  }
  return request;
}

CleanResult run_clean(const std::string& input_csv, const std::string& output_jsonl,
                      std::size_t limit, const std::string& report_path) {
  const auto raw = read_source_csv_file(input_csv);
  auto outcome = clean_corpus(raw);
  const auto selected = select_grounded(outcome.records, limit);
  write_records_jsonl(output_jsonl, selected);
  if (!report_path.empty()) {
    write_text_file(report_path, cleaning_report_to_json(outcome.report) + "\n");
  }
  return {outcome.report, selected.size()};
}

AugmentResult run_augment(Gateway& gateway, const ToolConfig& config,
                          const std::string& backend_id,
                          const std::string& records_jsonl,
                          const std::string& output_jsonl) {
  const auto records = read_records_jsonl(records_jsonl);
  std::vector<std::optional<AugmentedRecord>> results(records.size());

  parallel_for(records.size(), config.parallelism, [&](std::size_t i) {
    const SourceRecord& record = records[i];
    ChatRequest request =
        make_stage_request(config, backend_id, build_scenario_prompt(record));
    for (int attempt = 0; attempt <= kMaxParseRetries; ++attempt) {
      // Re-requests must not be served from the cache: same prompt, fresh
      // sample.
      const ChatResponse response =
          gateway.complete(request, {.bypass_cache_read = attempt > 0});
      try {
        AugmentedRecord row;
        row.record = record;
        row.scenario = parse_scenario_response(response.text, record.id);
        results[i] = std::move(row);
        return;
      } catch (const Error& e) {
        if (e.code() != Errc::malformed_response &&
            e.code() != Errc::unknown_intervention_type) {
          throw;
        }
      }
    }
  });

  AugmentResult result;
  std::vector<AugmentedRecord> rows;
  rows.reserve(records.size());
  for (auto& entry : results) {
    if (entry) {
      rows.push_back(std::move(*entry));
      ++result.scenarios;
    } else {
      ++result.failed;
    }
  }
  write_augmented_jsonl(output_jsonl, rows);
  return result;
}

std::string conversation_id_for(std::int64_t record_id) {
  char buffer[24];
  std::snprintf(buffer, sizeof buffer, "conv-%06lld",
                static_cast<long long>(record_id));
  return buffer;
}

SynthesizeResult run_synthesize(Gateway& gateway, const ToolConfig& config,
                                const std::string& backend_id,
                                const std::string& augmented_jsonl,
                                const std::string& output_dir, std::uint64_t seed) {
  const auto rows = read_augmented_jsonl(augmented_jsonl);
  ensure_dir(output_dir);

  struct Slot {
    Transcript transcript;
    bool accepted = false;
    bool parsed = false;
  };
  std::vector<Slot> slots(rows.size());

  parallel_for(rows.size(), config.parallelism, [&](std::size_t i) {
    const AugmentedRecord& row = rows[i];
    const GenerationSpec spec =
        sample_spec(sub_seed(seed, "spec", row.record.id));
    ChatRequest request = make_stage_request(
        config, backend_id, build_transcript_prompt(row.record, row.scenario, spec));
    const ChatResponse response = gateway.complete(request);

    Slot& slot = slots[i];
    slot.transcript.conversation_id = conversation_id_for(row.record.id);
    slot.transcript.spec = spec;
    slot.transcript.scenario = row.scenario;
    try {
      slot.transcript.turns = parse_transcript(response.text);
      slot.parsed = true;
    } catch (const Error&) {
      return;
    }
    slot.accepted = validate_transcript(slot.transcript).accepted();
  });

  SynthesizeResult result;
  json conversations = json::object();
  for (std::size_t i = 0; i < slots.size(); ++i) {
    Slot& slot = slots[i];
    if (!slot.parsed) {
      ++result.failed;
      continue;
    }
    if (!slot.accepted) {
      ++result.rejected;
      continue;
    }
    const std::string& id = slot.transcript.conversation_id;
    write_text_file((fs::path(output_dir) / (id + ".txt")).string(),
                    render_transcript(slot.transcript.turns));
    conversations[id] = {{"record_id", rows[i].record.id},
                         {"spec", spec_to_json(slot.transcript.spec)},
                         {"scenario", scenario_to_json(slot.transcript.scenario)}};
    ++result.accepted;
  }

  json manifest{{"seed", seed}, {"conversations", std::move(conversations)}};
  write_text_file((fs::path(output_dir) / "manifest.json").string(),
                  manifest.dump(2) + "\n");
  return result;
}

std::vector<Transcript> read_transcripts_dir(const std::string& dir) {
  const std::string manifest_path = (fs::path(dir) / "manifest.json").string();
  json manifest = json::parse(read_text_file(manifest_path), nullptr, false);
  if (manifest.is_discarded() || !manifest.contains("conversations")) {
    throw Error(Errc::io_error, "bad transcripts manifest: " + manifest_path);
  }

  std::vector<Transcript> transcripts;
  for (const auto& [id, entry] : manifest["conversations"].items()) {
    Transcript transcript;
    transcript.conversation_id = id;
    transcript.spec = spec_from_json(entry.at("spec"));
    transcript.scenario = scenario_from_json(entry.at("scenario"));
    transcript.turns =
        parse_transcript(read_text_file((fs::path(dir) / (id + ".txt")).string()));
    transcripts.push_back(std::move(transcript));
  }
  if (transcripts.empty()) {
    throw Error(Errc::empty_corpus, "no conversations under " + dir);
  }
  return transcripts;
}

BuildDatasetResult run_build_dataset(const std::string& transcripts_dir,
                                     const std::string& out_dir,
                                     VariantSelection variants, std::uint64_t seed) {
  const auto transcripts = read_transcripts_dir(transcripts_dir);
  ensure_dir(out_dir);

  std::vector<std::string> ids;
  ids.reserve(transcripts.size());
  std::vector<WindowExample> examples;
  for (const Transcript& transcript : transcripts) {
    ids.push_back(transcript.conversation_id);
    auto windows = build_windows(transcript);
    examples.insert(examples.end(), std::make_move_iterator(windows.begin()),
                    std::make_move_iterator(windows.end()));
  }

  const SplitAssignment assignment =
      split_conversations(ids, kDefaultSplitRatios, seed);

  BuildDatasetResult result;
  result.conversations = transcripts.size();

  auto emit = [&](DatasetVariant variant) {
    std::map<Split, std::string> paths;
    for (Split split : kAllSplits) {
      paths[split] = (fs::path(out_dir) /
                      (std::string(variant_name(variant)) + "_" +
                       std::string(split_name(split)) + ".jsonl"))
                         .string();
    }
    return serialize_examples(examples, variant, assignment, paths);
  };

  if (variants == VariantSelection::token || variants == VariantSelection::both) {
    result.token_counts = emit(DatasetVariant::token);
  }
  if (variants == VariantSelection::dialogue || variants == VariantSelection::both) {
    result.dialogue_counts = emit(DatasetVariant::dialogue);
  }

  json assignments = json::object();
  for (const auto& [id, split] : assignment.by_conversation) {
    assignments[id] = std::string(split_name(split));
  }
  json manifest{{"seed", seed},
                {"ratios", assignment.ratios},
                {"assignments", std::move(assignments)}};
  write_text_file((fs::path(out_dir) / "split_manifest.json").string(),
                  manifest.dump(2) + "\n");
  return result;
}

CorpusStats run_stats(const std::string& transcripts_dir,
                      const std::string& markers_path, const std::string& out_path,
                      const ToolConfig& config) {
  const auto transcripts = read_transcripts_dir(transcripts_dir);

  std::vector<std::string> markers = config.disagreement_markers;
  if (!markers_path.empty()) {
    markers.clear();
    std::ifstream in(markers_path);
    if (!in) throw Error(Errc::io_error, "cannot open " + markers_path);
    std::string line;
    while (std::getline(in, line)) {
      if (!line.empty()) markers.push_back(line);
    }
  }

  const CorpusStats stats = analyze(transcripts, markers);
  if (!out_path.empty()) {
    write_text_file(out_path, stats_to_json(stats) + "\n");
  }
  return stats;
}

EvaluationReport run_evaluate(Gateway& gateway, const ToolConfig& config,
                              const EvaluateOptions& options) {
  const auto records = read_records_file(options.dataset_path);

  std::vector<Prediction> predictions;
  if (fs::exists(options.predictions)) {
    predictions = read_predictions_file(options.predictions);
  } else if (gateway.has_backend(options.predictions)) {
    predictions.resize(records.size());
    parallel_for(records.size(), config.parallelism, [&](std::size_t i) {
      const DatasetRecord& record = records[i];
      std::vector<Turn> context;
      context.reserve(record.context.size());
      for (const auto& line : record.context) {
        Turn turn;
        turn.speaker = parse_speaker_tag(line.speaker);
        turn.text = line.text;
        turn.index = static_cast<int>(context.size());
        context.push_back(std::move(turn));
      }
      const ZeroShotPrompt prompt = build_zero_shot_prompt(context);
      ChatRequest request;
      request.backend_id = options.predictions;
      request.system = prompt.system;
      request.user = prompt.user;
      request.temperature = 0.0;
      request.max_output = 4;
      request.want_scores = true;
      if (const BackendConfig* backend = find_backend(config, options.predictions)) {
        request.model_id = backend->model;
      }
      const ChatResponse response = gateway.complete(request);
      predictions[i] = {record.conversation_id, record.decision_index,
                        response.text, response.speak_score};
    });
  } else {
    throw Error(Errc::invalid_argument,
                options.predictions + " is neither a file nor a configured backend");
  }

  const EvaluationReport report =
      evaluate_predictions(records, predictions, options.mode, options.policy);
  if (!options.report_path.empty()) {
    write_text_file(options.report_path, evaluation_report_to_json(report) + "\n");
  }
  return report;
}

namespace {

struct RolloutRow {
  RolloutOutcome outcome;
  std::vector<Turn> context;
  std::string utterance;
  std::optional<std::int64_t> group;
};

RolloutRow parse_rollout_line(const json& j) {
  RolloutRow row;
  row.outcome.predicted = parse_decision_label(j.at("predicted").get<std::string>());
  row.outcome.gold = parse_decision_label(j.at("gold").get<std::string>());
  if (j.contains("turns_early") && !j["turns_early"].is_null()) {
    row.outcome.turns_early = j["turns_early"].get<int>();
  }
  if (j.contains("gold_type") && !j["gold_type"].is_null()) {
    row.outcome.gold_type =
        parse_intervention_type(j["gold_type"].get<std::string>());
  }
  if (j.contains("judged_type") && !j["judged_type"].is_null()) {
    row.outcome.judged_type =
        parse_intervention_type(j["judged_type"].get<std::string>());
  }
  if (j.contains("utterance") && !j["utterance"].is_null()) {
    row.utterance = j["utterance"].get<std::string>();
  }
  if (j.contains("context") && j["context"].is_array()) {
    for (const auto& entry : j["context"]) {
      Turn turn;
      turn.speaker = parse_speaker_tag(entry.at("speaker").get<std::string>());
      turn.text = entry.at("text").get<std::string>();
      turn.index = static_cast<int>(row.context.size());
      row.context.push_back(std::move(turn));
    }
  }
  if (j.contains("group") && !j["group"].is_null()) {
    row.group = j["group"].get<std::int64_t>();
  }
  return row;
}

}  // namespace

RewardScoreResult run_reward_score(Gateway& gateway, const ToolConfig& config,
                                   const RewardScoreOptions& options) {
  std::ifstream in(options.rollouts_path, std::ios::binary);
  if (!in) throw Error(Errc::io_error, "cannot open " + options.rollouts_path);

  std::vector<RolloutRow> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded()) {
      throw Error(Errc::io_error, "bad rollout line in " + options.rollouts_path);
    }
    rows.push_back(parse_rollout_line(j));
  }

  // Fill judged types from the judge backend on true positives that lack one.
  if (!options.judge_backend.empty() && options.reward.enable_type_bonus) {
    parallel_for(rows.size(), config.parallelism, [&](std::size_t i) {
      RolloutRow& row = rows[i];
      const bool true_positive = row.outcome.predicted == DecisionLabel::speak &&
                                 row.outcome.gold == DecisionLabel::speak;
      if (!true_positive || row.outcome.judged_type || row.utterance.empty()) {
        return;
      }
      ChatRequest request;
      request.backend_id = options.judge_backend;
      request.system = build_judge_system_prompt();
      request.user = build_judge_user_prompt(row.context, row.utterance);
      request.temperature = 0.0;
      request.max_output = 16;
      if (const BackendConfig* backend =
              find_backend(config, options.judge_backend)) {
        request.model_id = backend->model;
      }
      const ChatResponse response = gateway.complete(request);
      if (auto type = try_parse_intervention_type(response.text)) {
        row.outcome.judged_type = type;
      }
    });
  }

  // Group either by the explicit field or by consecutive chunks.
  std::vector<std::vector<std::size_t>> groups;
  if (!rows.empty() && rows.front().group) {
    std::map<std::int64_t, std::size_t> group_index;
    for (std::size_t i = 0; i < rows.size(); ++i) {
      if (!rows[i].group) {
        throw Error(Errc::invalid_argument,
                    "mixed grouped and ungrouped rollout lines");
      }
      const auto [it, inserted] =
          group_index.try_emplace(*rows[i].group, groups.size());
      if (inserted) groups.emplace_back();
      groups[it->second].push_back(i);
    }
  } else {
    if (options.group_size < 2) {
      throw Error(Errc::invalid_argument, "group size must be >= 2");
    }
    if (rows.size() % static_cast<std::size_t>(options.group_size) != 0) {
      throw Error(Errc::group_too_small,
                  "rollout count is not a multiple of the group size");
    }
    for (std::size_t i = 0; i < rows.size();
         i += static_cast<std::size_t>(options.group_size)) {
      std::vector<std::size_t> group;
      for (int k = 0; k < options.group_size; ++k) group.push_back(i + k);
      groups.push_back(std::move(group));
    }
  }

  std::vector<RewardBreakdown> breakdowns(rows.size());
  std::vector<double> advantages(rows.size(), 0.0);
  std::vector<std::int64_t> group_of(rows.size(), 0);
  for (std::size_t g = 0; g < groups.size(); ++g) {
    std::vector<double> rewards;
    rewards.reserve(groups[g].size());
    for (std::size_t i : groups[g]) {
      breakdowns[i] = score(rows[i].outcome, options.reward);
      rewards.push_back(breakdowns[i].total);
      group_of[i] = static_cast<std::int64_t>(g);
    }
    const auto group_adv = group_advantages(rewards);
    for (std::size_t k = 0; k < groups[g].size(); ++k) {
      advantages[groups[g][k]] = group_adv[k];
    }
  }

  std::ofstream out(options.out_path, std::ios::binary);
  if (!out) throw Error(Errc::io_error, "cannot write " + options.out_path);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    json j{{"index", i},
           {"group", group_of[i]},
           {"predicted", std::string(decision_label_name(rows[i].outcome.predicted))},
           {"gold", std::string(decision_label_name(rows[i].outcome.gold))},
           {"reward",
            {{"accuracy", breakdowns[i].accuracy},
             {"soft_timing", breakdowns[i].soft_timing},
             {"type_bonus", breakdowns[i].type_bonus},
             {"necessity", breakdowns[i].necessity},
             {"total", breakdowns[i].total}}},
           {"advantage", advantages[i]}};
    out << j.dump() << '\n';
  }
  if (!out) throw Error(Errc::io_error, "write failed for " + options.out_path);

  return {rows.size(), groups.size()};
}

CalibrationResult run_calibrate(const std::string& scored_path, double fir_target,
                                const std::string& out_path) {
  std::ifstream in(scored_path, std::ios::binary);
  if (!in) throw Error(Errc::io_error, "cannot open " + scored_path);
  std::vector<ScoredExample> scored;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded()) throw Error(Errc::io_error, "bad line in " + scored_path);
    ScoredExample example;
    example.speak_score = j.at("speak_score").get<double>();
    example.gold = parse_decision_label(j.at("gold").get<std::string>());
    scored.push_back(example);
  }

  const CalibrationResult result = calibrate_threshold(scored, fir_target);
  if (!out_path.empty()) {
    json threshold;
    if (std::isfinite(result.threshold)) {
      threshold = result.threshold;
    } else {
      threshold = result.threshold > 0 ? "+inf" : "-inf";
    }
    json j{{"threshold", threshold},
           {"achieved_fir", result.achieved_fir},
           {"achieved_recall", result.achieved_recall},
           {"fir_target", fir_target}};
    write_text_file(out_path, j.dump(2) + "\n");
  }
  return result;
}

namespace {

RunMetrics run_metrics_from_json(const json& j) {
  const json* metrics = &j;
  if (j.contains("metrics")) metrics = &j["metrics"];
  else if (j.contains("overall")) metrics = &j["overall"];
  RunMetrics out;
  out.macro_f1 = metrics->at("macro_f1").get<double>();
  out.speak_recall = metrics->at("speak_recall").get<double>();
  out.fir = metrics->at("fir").get<double>();
  out.mir = metrics->at("mir").get<double>();
  return out;
}

}  // namespace

AblateReportResult run_ablate_report(const std::string& runs_dir,
                                     const std::string& baseline_path,
                                     const std::string& out_path) {
  json baseline_json =
      json::parse(read_text_file(baseline_path), nullptr, false);
  if (baseline_json.is_discarded()) {
    throw Error(Errc::io_error, "bad baseline report: " + baseline_path);
  }
  const RunMetrics baseline = run_metrics_from_json(baseline_json);

  std::map<double, std::vector<RunMetrics>> runs_by_lambda;
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(runs_dir)) {
    if (entry.path().extension() == ".json") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  for (const auto& path : files) {
    json j = json::parse(read_text_file(path.string()), nullptr, false);
    if (j.is_discarded() || !j.contains("lambda")) {
      throw Error(Errc::io_error, "bad run report: " + path.string());
    }
    runs_by_lambda[j["lambda"].get<double>()].push_back(run_metrics_from_json(j));
  }
  if (runs_by_lambda.empty()) {
    throw Error(Errc::io_error, "no run reports under " + runs_dir);
  }

  AblateReportResult result;
  result.rows = aggregate_ablation(runs_by_lambda, baseline);

  std::ostringstream table;
  table << "lambda  n  macro_f1         speak_recall     fir              "
           "mir              delta_mir\n";
  char buffer[160];
  for (const AblationRow& row : result.rows) {
    std::snprintf(buffer, sizeof buffer,
                  "%-6.2f  %d  %.4f +- %.4f  %.4f +- %.4f  %.4f +- %.4f  "
                  "%.4f +- %.4f  %+.4f\n",
                  row.lambda, row.run_count, row.macro_f1.mean,
                  row.macro_f1.stddev, row.speak_recall.mean,
                  row.speak_recall.stddev, row.fir.mean, row.fir.stddev,
                  row.mir.mean, row.mir.stddev, row.delta_mir);
    table << buffer;
  }
  result.rendered = table.str();

  if (!out_path.empty()) {
    json rows = json::array();
    for (const AblationRow& row : result.rows) {
      rows.push_back(
          {{"lambda", row.lambda},
           {"runs", row.run_count},
           {"macro_f1", {{"mean", row.macro_f1.mean}, {"std", row.macro_f1.stddev}}},
           {"speak_recall",
            {{"mean", row.speak_recall.mean}, {"std", row.speak_recall.stddev}}},
           {"fir", {{"mean", row.fir.mean}, {"std", row.fir.stddev}}},
           {"mir", {{"mean", row.mir.mean}, {"std", row.mir.stddev}}},
           {"delta_mir", row.delta_mir}});
    }
    json j{{"baseline",
            {{"macro_f1", baseline.macro_f1},
             {"speak_recall", baseline.speak_recall},
             {"fir", baseline.fir},
             {"mir", baseline.mir}}},
           {"rows", std::move(rows)}};
    write_text_file(out_path, j.dump(2) + "\n");
  }
  return result;
}

std::vector<SourceRecord> make_demo_corpus(std::size_t n, std::uint64_t seed) {
  static const std::vector<std::string> subjects = {
      "sourdough baking",   "bicycle maintenance", "houseplant care",
      "night sky watching", "budget travel",       "learning the piano",
      "urban gardening",    "chess openings",      "trail running",
      "home coffee roasting", "beekeeping",        "watercolor painting",
      "retro computing",    "bird migration",      "knot tying",
      "fermented foods"};
  static const std::vector<std::string> title_patterns = {
      "how do people get started with", "what really matters most in",
      "why is it so hard to improve at", "what should beginners know about"};
  static const std::vector<std::string> content_patterns = {
      "our group keeps going back and forth about",
      "a few of us cannot agree on the basics of",
      "we tried reading guides but still argue about",
      "everyone seems to have a different take on"};
  static const std::vector<std::string> answer_patterns = {
      "the short version is that steady practice beats shortcuts in",
      "most guides agree the fundamentals carry you far in",
      "it comes down to patience and good habits with"};

  std::vector<SourceRecord> records;
  records.reserve(n);
  Rng rng(seed);
  for (std::size_t i = 0; i < n; ++i) {
    const std::string& subject = subjects[rng.below(subjects.size())];
    SourceRecord record;
    record.id = static_cast<std::int64_t>(i);
    record.question_title =
        title_patterns[rng.below(title_patterns.size())] + " " + subject;
    record.question_content = content_patterns[rng.below(content_patterns.size())] +
                              " " + subject + " lately in chat " +
                              std::to_string(i);
    record.best_answer =
        answer_patterns[rng.below(answer_patterns.size())] + " " + subject;
    records.push_back(std::move(record));
  }
  return records;
}

RewardConfig parse_reward_components(std::string_view components, double lambda) {
  RewardConfig config;
  config.lambda = lambda;
  if (components == "all") return config;
  config.enable_soft_timing = false;
  config.enable_type_bonus = false;
  config.enable_necessity = false;
  if (components == "acc") return config;
  config.enable_soft_timing = true;
  if (components == "acc+soft") return config;
  config.enable_type_bonus = true;
  if (components == "acc+soft+type") return config;
  throw Error(Errc::invalid_argument,
              "unknown components selection: " + std::string(components));
}

PipelineResult run_pipeline(Gateway& gateway, const ToolConfig& config,
                            const PipelineOptions& options) {
  ensure_dir(options.out_dir);
  const fs::path out(options.out_dir);
  const std::string clean_jsonl = (out / "clean.jsonl").string();
  const std::string clean_report = (out / "clean_report.json").string();
  const std::string scenarios_jsonl = (out / "scenarios.jsonl").string();
  const std::string transcripts_dir = (out / "transcripts").string();
  const std::string dataset_dir = (out / "dataset").string();
  const std::string stats_path = (out / "stats.json").string();

  PipelineResult result;

  if (options.input_csv.empty()) {
    // No source corpus supplied: generate the deterministic demo corpus.
    const auto raw = make_demo_corpus(options.conversations, options.seed);
    auto outcome = clean_corpus(raw);
    const auto selected = select_grounded(outcome.records, options.conversations);
    write_records_jsonl(clean_jsonl, selected);
    write_text_file(clean_report, cleaning_report_to_json(outcome.report) + "\n");
    result.clean = {outcome.report, selected.size()};
  } else {
    result.clean = run_clean(options.input_csv, clean_jsonl, options.conversations,
                             clean_report);
  }

  result.augment = run_augment(gateway, config, options.backend_id, clean_jsonl,
                               scenarios_jsonl);
  result.synthesize = run_synthesize(gateway, config, options.backend_id,
                                     scenarios_jsonl, transcripts_dir, options.seed);
  result.dataset = run_build_dataset(transcripts_dir, dataset_dir,
                                     VariantSelection::both, options.seed);
  result.stats = run_stats(transcripts_dir, "", stats_path, config);
  return result;
}

}  // namespace turnwise

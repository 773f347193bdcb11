#include "turnwise/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>

#include <nlohmann/json.hpp>

#include "turnwise/error.hpp"
#include "turnwise/rng.hpp"
#include "turnwise/stats.hpp"

namespace turnwise {

namespace {

using nlohmann::json;

}  // namespace

std::string_view decision_label_name(DecisionLabel label) {
  return label == DecisionLabel::speak ? "SPEAK" : "SILENT";
}

DecisionLabel parse_decision_label(std::string_view name) {
  if (name == "SPEAK") return DecisionLabel::speak;
  if (name == "SILENT") return DecisionLabel::silent;
  throw Error(Errc::invalid_argument, "bad decision label: " + std::string(name));
}

std::string_view variant_name(DatasetVariant variant) {
  return variant == DatasetVariant::token ? "token" : "dialogue";
}

DatasetVariant parse_variant(std::string_view name) {
  if (name == "token") return DatasetVariant::token;
  if (name == "dialogue") return DatasetVariant::dialogue;
  throw Error(Errc::invalid_argument, "bad variant: " + std::string(name));
}

std::string_view split_name(Split split) {
  switch (split) {
    case Split::train: return "train";
    case Split::validation: return "validation";
    case Split::test: return "test";
  }
  return "train";
}

Split parse_split(std::string_view name) {
  if (name == "train") return Split::train;
  if (name == "validation") return Split::validation;
  if (name == "test") return Split::test;
  throw Error(Errc::invalid_argument, "bad split: " + std::string(name));
}

std::size_t& SplitCounts::operator[](Split split) {
  switch (split) {
    case Split::train: return train;
    case Split::validation: return validation;
    case Split::test: return test;
  }
  return train;
}

std::vector<WindowExample> build_windows(const Transcript& transcript,
                                         int window_size) {
  if (window_size < 1) {
    throw Error(Errc::invalid_argument, "window_size must be >= 1");
  }
  std::vector<WindowExample> examples;
  int decision_index = 0;
  const auto& turns = transcript.turns;
  for (std::size_t i = 0; i < turns.size(); ++i) {
    if (!turns[i].speaker.is_agent()) continue;

    WindowExample example;
    example.conversation_id = transcript.conversation_id;
    example.decision_index = decision_index++;
    const std::size_t begin =
        i > static_cast<std::size_t>(window_size) ? i - window_size : 0;
    example.context.assign(turns.begin() + static_cast<std::ptrdiff_t>(begin),
                           turns.begin() + static_cast<std::ptrdiff_t>(i));
    if (turns[i].is_intervention()) {
      example.label = DecisionLabel::speak;
      example.gold_utterance = turns[i].text;
      example.intervention_type = transcript.scenario.intervention_type;
    } else {
      example.label = DecisionLabel::silent;
    }
    example.directly_addressed = detect_direct_address(example.context);
    examples.push_back(std::move(example));
  }
  return examples;
}

VariantTarget render_target(const WindowExample& example, DatasetVariant variant) {
  VariantTarget target;
  target.variant = variant;
  if (example.label == DecisionLabel::silent) {
    target.target_text = std::string(kSilenceToken);
  } else if (variant == DatasetVariant::token) {
    target.target_text = std::string(kSpeakToken);
  } else {
    target.target_text = example.gold_utterance;
  }
  return target;
}

std::array<std::size_t, 3> split_sizes(std::size_t count,
                                       const std::array<double, 3>& ratios) {
  std::array<std::size_t, 3> sizes{};
  std::array<double, 3> remainders{};
  std::size_t assigned = 0;
  for (std::size_t k = 0; k < 3; ++k) {
    const double exact = static_cast<double>(count) * ratios[k];
    sizes[k] = static_cast<std::size_t>(std::floor(exact));
    remainders[k] = exact - static_cast<double>(sizes[k]);
    assigned += sizes[k];
  }
  std::array<std::size_t, 3> order = {0, 1, 2};
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return remainders[a] > remainders[b];
  });
  for (std::size_t k = 0; assigned < count; ++k) {
    ++sizes[order[k % 3]];
    ++assigned;
  }
  return sizes;
}

SplitAssignment split_conversations(const std::vector<std::string>& ids,
                                    const std::array<double, 3>& ratios,
                                    std::uint64_t seed) {
  if (ids.empty()) throw Error(Errc::empty_corpus, "no conversations to split");
  const double sum = std::accumulate(ratios.begin(), ratios.end(), 0.0);
  if (std::abs(sum - 1.0) > 1e-9) {
    throw Error(Errc::invalid_argument, "split ratios must sum to 1");
  }
  if (std::set<std::string>(ids.begin(), ids.end()).size() != ids.size()) {
    throw Error(Errc::invalid_argument, "conversation ids must be unique");
  }

  std::vector<std::string> shuffled = ids;
  Rng rng(seed);
  rng.shuffle(shuffled);

  const auto sizes = split_sizes(shuffled.size(), ratios);

  SplitAssignment assignment;
  assignment.ratios = ratios;
  assignment.seed = seed;
  std::size_t cursor = 0;
  for (std::size_t k = 0; k < kAllSplits.size(); ++k) {
    for (std::size_t j = 0; j < sizes[k]; ++j) {
      assignment.by_conversation[shuffled[cursor++]] = kAllSplits[k];
    }
  }
  return assignment;
}

DatasetRecord make_record(const WindowExample& example, DatasetVariant variant) {
  DatasetRecord record;
  record.conversation_id = example.conversation_id;
  record.decision_index = example.decision_index;
  record.context.reserve(example.context.size());
  for (const Turn& turn : example.context) {
    record.context.push_back({turn.speaker.tag(), turn.text});
  }
  record.target_text = render_target(example, variant).target_text;
  record.label = example.label;
  record.variant = variant;
  record.directly_addressed = example.directly_addressed;
  record.intervention_type = example.intervention_type;
  return record;
}

std::string serialize_record(const DatasetRecord& record) {
  json context = json::array();
  for (const auto& line : record.context) {
    context.push_back({{"speaker", line.speaker}, {"text", line.text}});
  }
  json j{{"conversation_id", record.conversation_id},
         {"decision_index", record.decision_index},
         {"context", std::move(context)},
         {"target_text", record.target_text},
         {"label", std::string(decision_label_name(record.label))},
         {"variant", std::string(variant_name(record.variant))},
         {"directly_addressed", record.directly_addressed}};
  if (record.intervention_type) {
    j["intervention_type"] =
        std::string(intervention_type_label(*record.intervention_type));
  }
  return j.dump();
}

DatasetRecord parse_record(std::string_view line) {
  json j = json::parse(line, nullptr, false);
  if (j.is_discarded() || !j.is_object()) {
    throw Error(Errc::io_error, "bad dataset record line");
  }
  DatasetRecord record;
  record.conversation_id = j.at("conversation_id").get<std::string>();
  record.decision_index = j.at("decision_index").get<int>();
  for (const auto& entry : j.at("context")) {
    record.context.push_back({entry.at("speaker").get<std::string>(),
                              entry.at("text").get<std::string>()});
  }
  record.target_text = j.at("target_text").get<std::string>();
  record.label = parse_decision_label(j.at("label").get<std::string>());
  record.variant = parse_variant(j.at("variant").get<std::string>());
  record.directly_addressed = j.at("directly_addressed").get<bool>();
  if (j.contains("intervention_type")) {
    record.intervention_type =
        parse_intervention_type(j.at("intervention_type").get<std::string>());
  }
  return record;
}

SplitCounts serialize_examples(const std::vector<WindowExample>& examples,
                               DatasetVariant variant,
                               const SplitAssignment& assignment,
                               const std::map<Split, std::string>& paths) {
  std::map<Split, std::ofstream> streams;
  for (const auto& [split, path] : paths) {
    auto& out = streams[split];
    out.open(path, std::ios::binary);
    if (!out) throw Error(Errc::io_error, "cannot write " + path);
  }

  SplitCounts counts;
  for (const auto& example : examples) {
    const auto it = assignment.by_conversation.find(example.conversation_id);
    if (it == assignment.by_conversation.end()) {
      throw Error(Errc::invalid_argument,
                  "no split for conversation " + example.conversation_id);
    }
    const Split split = it->second;
    const auto stream = streams.find(split);
    if (stream == streams.end()) {
      throw Error(Errc::invalid_argument,
                  "no output path for split " + std::string(split_name(split)));
    }
    stream->second << serialize_record(make_record(example, variant)) << '\n';
    ++counts[split];
  }

  for (auto& [split, out] : streams) {
    out.flush();
    if (!out) {
      throw Error(Errc::io_error, "write failed for " + paths.at(split));
    }
  }
  return counts;
}

std::vector<DatasetRecord> read_records_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::io_error, "cannot open " + path);
  std::vector<DatasetRecord> records;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    records.push_back(parse_record(line));
  }
  return records;
}

}  // namespace turnwise

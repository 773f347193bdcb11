#include "turnwise/corpus.hpp"

#include <cctype>
#include <fstream>
#include <istream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "turnwise/error.hpp"

namespace turnwise {

namespace {

using nlohmann::json;

bool is_ascii_space(unsigned char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' ||
         c == '\v';
}

}  // namespace

bool allowed_char(unsigned char c) {
  if (c >= 0x80) return false;
  if (std::isalnum(c)) return true;
  if (is_ascii_space(c)) return true;
  switch (c) {
    case '.': case ',': case '?': case '!': case '\'': case '"':
    case '(': case ')': case '-': case ':': case ';':
      return true;
    default:
      return false;
  }
}

int count_words(std::string_view text) {
  int words = 0;
  bool in_word = false;
  for (unsigned char c : text) {
    if (is_ascii_space(c)) {
      in_word = false;
    } else if (!in_word) {
      in_word = true;
      ++words;
    }
  }
  return words;
}

CleanVerdict clean_record(const SourceRecord& record) {
  const std::string_view fields[] = {record.question_title,
                                     record.question_content,
                                     record.best_answer};
  for (auto field : fields) {
    if (field.empty()) return CleanVerdict::drop_missing;
  }
  for (auto field : fields) {
    if (count_words(field) < kMinWordsPerField) return CleanVerdict::drop_short;
  }
  for (auto field : fields) {
    for (unsigned char c : field) {
      if (!allowed_char(c)) return CleanVerdict::drop_chars;
    }
  }
  return CleanVerdict::keep;
}

CleanOutcome clean_corpus(const std::vector<SourceRecord>& records) {
  CleanOutcome outcome;
  outcome.report.input_count = static_cast<std::int64_t>(records.size());
  for (const auto& record : records) {
    switch (clean_record(record)) {
      case CleanVerdict::keep:
        outcome.records.push_back(record);
        ++outcome.report.retained_count;
        break;
      case CleanVerdict::drop_missing:
        ++outcome.report.dropped_missing;
        break;
      case CleanVerdict::drop_short:
        ++outcome.report.dropped_short;
        break;
      case CleanVerdict::drop_chars:
        ++outcome.report.dropped_chars;
        break;
    }
  }
  return outcome;
}

std::vector<SourceRecord> select_grounded(const std::vector<SourceRecord>& records,
                                          std::size_t n) {
  if (records.size() < n) {
    throw Error(Errc::insufficient_rows,
                "need " + std::to_string(n) + " cleaned records, have " +
                    std::to_string(records.size()));
  }
  return {records.begin(), records.begin() + static_cast<std::ptrdiff_t>(n)};
}

namespace {

// RFC 4180-ish row reader: quoted fields may contain commas, newlines and
// doubled quotes. Returns false at end of input.
bool read_csv_row(std::istream& in, std::vector<std::string>& fields) {
  fields.clear();
  int c = in.get();
  if (c == std::istream::traits_type::eof()) return false;

  std::string field;
  bool quoted = false;
  for (;; c = in.get()) {
    if (c == std::istream::traits_type::eof()) {
      fields.push_back(std::move(field));
      return true;
    }
    if (quoted) {
      if (c == '"') {
        if (in.peek() == '"') {
          field.push_back('"');
          in.get();
        } else {
          quoted = false;
        }
      } else {
        field.push_back(static_cast<char>(c));
      }
      continue;
    }
    switch (c) {
      case '"':
        if (field.empty()) {
          quoted = true;
        } else {
          field.push_back('"');
        }
        break;
      case ',':
        fields.push_back(std::move(field));
        field.clear();
        break;
      case '\r':
        if (in.peek() == '\n') in.get();
        [[fallthrough]];
      case '\n':
        fields.push_back(std::move(field));
        return true;
      default:
        field.push_back(static_cast<char>(c));
        break;
    }
  }
}

}  // namespace

std::vector<SourceRecord> read_source_csv(std::istream& in) {
  std::vector<SourceRecord> records;
  std::vector<std::string> fields;
  std::int64_t row = 0;
  while (read_csv_row(in, fields)) {
    SourceRecord record;
    record.id = row++;
    if (fields.size() == 3) {
      record.question_title = std::move(fields[0]);
      record.question_content = std::move(fields[1]);
      record.best_answer = std::move(fields[2]);
    }
    // Wrong column count leaves the fields empty; the cleaner drops the row.
    records.push_back(std::move(record));
  }
  return records;
}

std::vector<SourceRecord> read_source_csv_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::io_error, "cannot open " + path);
  return read_source_csv(in);
}

namespace {

json record_to_json(const SourceRecord& record) {
  return json{{"id", record.id},
              {"question_title", record.question_title},
              {"question_content", record.question_content},
              {"best_answer", record.best_answer}};
}

SourceRecord record_from_json(const json& j) {
  SourceRecord record;
  record.id = j.at("id").get<std::int64_t>();
  record.question_title = j.at("question_title").get<std::string>();
  record.question_content = j.at("question_content").get<std::string>();
  record.best_answer = j.at("best_answer").get<std::string>();
  return record;
}

}  // namespace

void write_records_jsonl(const std::string& path,
                         const std::vector<SourceRecord>& records) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::io_error, "cannot write " + path);
  for (const auto& record : records) {
    out << record_to_json(record).dump() << '\n';
  }
  if (!out) throw Error(Errc::io_error, "write failed for " + path);
}

std::vector<SourceRecord> read_records_jsonl(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::io_error, "cannot open " + path);
  std::vector<SourceRecord> records;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded()) {
      throw Error(Errc::io_error, "bad record line in " + path);
    }
    records.push_back(record_from_json(j));
  }
  return records;
}

std::string cleaning_report_to_json(const CleaningReport& report) {
  json j{{"input_count", report.input_count},
         {"dropped_missing", report.dropped_missing},
         {"dropped_short", report.dropped_short},
         {"dropped_chars", report.dropped_chars},
         {"retained_count", report.retained_count}};
  return j.dump(2);
}

}  // namespace turnwise

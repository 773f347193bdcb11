#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace turnwise {

/// One grounded question/answer row. The three text fields seed scenario and
/// transcript generation downstream.
struct SourceRecord {
  std::int64_t id = 0;
  std::string question_title;
  std::string question_content;
  std::string best_answer;

  bool operator==(const SourceRecord&) const = default;
};

enum class CleanVerdict { keep, drop_missing, drop_short, drop_chars };

struct CleaningReport {
  std::int64_t input_count = 0;
  std::int64_t dropped_missing = 0;
  std::int64_t dropped_short = 0;
  std::int64_t dropped_chars = 0;
  std::int64_t retained_count = 0;
};

inline constexpr int kMinWordsPerField = 5;

/// Characters a retained field may contain: ASCII letters, digits,
/// whitespace, and the punctuation set . , ? ! ' " ( ) - : ;
bool allowed_char(unsigned char c);

/// Number of maximal non-whitespace runs.
int count_words(std::string_view text);

/// Gate for one record. Checks run in order: missing, short, characters.
CleanVerdict clean_record(const SourceRecord& record);

struct CleanOutcome {
  std::vector<SourceRecord> records;
  CleaningReport report;
};

/// Applies clean_record over the corpus, preserving input order of survivors.
CleanOutcome clean_corpus(const std::vector<SourceRecord>& records);

/// First n cleaned records in stable input order.
/// Throws Errc::insufficient_rows when fewer than n remain.
std::vector<SourceRecord> select_grounded(const std::vector<SourceRecord>& records,
                                          std::size_t n);

/// Reads the raw corpus: CSV with three columns per row
/// (question_title, question_content, best_answer), RFC 4180 quoting,
/// no header. Record ids are 0-based row positions. Structurally broken rows
/// surface as records with empty fields so the cleaner drops them.
std::vector<SourceRecord> read_source_csv(std::istream& in);
std::vector<SourceRecord> read_source_csv_file(const std::string& path);

/// Line-delimited record files used between pipeline stages.
void write_records_jsonl(const std::string& path,
                         const std::vector<SourceRecord>& records);
std::vector<SourceRecord> read_records_jsonl(const std::string& path);

std::string cleaning_report_to_json(const CleaningReport& report);

}  // namespace turnwise

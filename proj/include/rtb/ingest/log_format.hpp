#pragma once

#include <cstddef>
#include <filesystem>
#include <istream>
#include <string>
#include <string_view>
#include <vector>

#include "rtb/common/error.hpp"
#include "rtb/ingest/record.hpp"

namespace rtb::ingest {

// Column layout of a tab-separated impression log. The default is the processed
// iPinYou layout (click, weekday, hour, bidid, timestamp, ..., payprice, ...).
struct LogSchema {
  std::vector<std::string> columns;
  std::string click_column = "click";
  std::string timestamp_column = "timestamp";  // yyyymmddHHMMSS[mmm]
  std::string price_column = "payprice";
  std::vector<std::string> feature_columns;

  static LogSchema ipinyou();

  // Key/value schema file: `columns`, `click`, `timestamp`, `market_price`, `features`.
  // List values are comma or whitespace separated; '#' starts a comment.
  static LogSchema parse(std::string_view text);
  static LogSchema load(const std::filesystem::path& path);

  // Column indices; throws ConfigError when a named column is absent.
  struct Resolved {
    std::size_t column_count = 0;
    std::size_t click = 0;
    std::size_t timestamp = 0;
    std::size_t price = 0;
    std::vector<std::size_t> features;
  };
  Resolved resolve() const;
};

// Parses one record. Features become "column=value" tokens interned into `pool`; the
// market price is clipped into [0, 300]. Throws ParseError tagged with `line_number`.
ImpressionRecord parse_log_record(std::string_view line, const LogSchema::Resolved& schema,
                                  const LogSchema& names, std::size_t line_number,
                                  TokenPool& pool);

// Inverse of parse_log_record for the semantic fields. Columns the record does not carry
// are written as "null"; the timestamp is written with zero milliseconds.
std::string format_log_record(const ImpressionRecord& record, const LogSchema& schema,
                              const TokenPool& pool);

std::string format_log_header(const LogSchema& schema);

struct LogReadResult {
  std::vector<ImpressionRecord> records;
  std::size_t skipped_lines = 0;
  std::vector<std::string> first_errors;  // up to 10 diagnostics
};

// Reads a whole log, skipping malformed lines (each reported through the result) and an
// optional header line whose first field equals the click column name.
LogReadResult read_log(std::istream& in, const LogSchema& schema, TokenPool& pool);
LogReadResult read_log_file(const std::filesystem::path& path, const LogSchema& schema,
                            TokenPool& pool);

}  // namespace rtb::ingest

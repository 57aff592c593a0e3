#include "rtb/ingest/log_format.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "rtb/common/log.hpp"
#include "rtb/common/text.hpp"

namespace rtb::ingest {
namespace {

std::size_t column_index(const std::vector<std::string>& columns, const std::string& name,
                         const char* field) {
  const auto it = std::find(columns.begin(), columns.end(), name);
  if (it == columns.end()) throw ConfigError(field, "column '" + name + "' not in schema");
  return static_cast<std::size_t>(it - columns.begin());
}

// Accepts yyyymmddHHMMSS with an optional 3-digit millisecond suffix.
bool parse_timestamp(std::string_view s, std::int32_t& date, std::int32_t& second) {
  s = text::trim(s);
  if (s.size() != 14 && s.size() != 17) return false;
  if (!std::all_of(s.begin(), s.end(), [](char c) { return c >= '0' && c <= '9'; })) return false;
  const auto d = text::parse_int<std::int32_t>(s.substr(0, 8));
  const auto hh = text::parse_int<int>(s.substr(8, 2));
  const auto mm = text::parse_int<int>(s.substr(10, 2));
  const auto ss = text::parse_int<int>(s.substr(12, 2));
  if (!d || !hh || !mm || !ss || *hh > 23 || *mm > 59 || *ss > 59) return false;
  const int month = (*d / 100) % 100;
  const int day = *d % 100;
  if (month < 1 || month > 12 || day < 1 || day > 31) return false;
  date = *d;
  second = *hh * 3600 + *mm * 60 + *ss;
  return true;
}

}  // namespace

LogSchema LogSchema::ipinyou() {
  LogSchema s;
  s.columns = {"click",      "weekday",    "hour",           "bidid",      "timestamp",
               "logtype",    "ipinyouid",  "useragent",      "IP",         "region",
               "city",       "adexchange", "domain",         "url",        "urlid",
               "slotid",     "slotwidth",  "slotheight",     "slotvisibility", "slotformat",
               "slotprice",  "creative",   "bidprice",       "payprice",   "keypage",
               "advertiser", "usertag"};
  s.feature_columns = {"weekday",   "hour",       "useragent",  "region",
                       "city",      "adexchange", "domain",     "slotid",
                       "slotwidth", "slotheight", "slotvisibility", "slotformat",
                       "creative",  "keypage"};
  return s;
}

LogSchema LogSchema::parse(std::string_view body) {
  LogSchema s = ipinyou();
  std::size_t line_no = 0;
  for (auto line : text::split(body, '\n')) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = text::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError("schema", "line " + std::to_string(line_no) + ": expected key = value");
    }
    const std::string key(text::trim(line.substr(0, eq)));
    const std::string value(text::trim(line.substr(eq + 1)));
    if (key == "columns") {
      s.columns = text::split_list(value);
    } else if (key == "features") {
      s.feature_columns = text::split_list(value);
    } else if (key == "click") {
      s.click_column = value;
    } else if (key == "timestamp") {
      s.timestamp_column = value;
    } else if (key == "market_price") {
      s.price_column = value;
    } else {
      throw ConfigError("schema." + key, "unknown schema key");
    }
  }
  s.resolve();
  return s;
}

LogSchema LogSchema::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open schema file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

LogSchema::Resolved LogSchema::resolve() const {
  Resolved r;
  r.column_count = columns.size();
  r.click = column_index(columns, click_column, "schema.click");
  r.timestamp = column_index(columns, timestamp_column, "schema.timestamp");
  r.price = column_index(columns, price_column, "schema.market_price");
  for (const auto& f : feature_columns) r.features.push_back(column_index(columns, f, "schema.features"));
  return r;
}

ImpressionRecord parse_log_record(std::string_view line, const LogSchema::Resolved& schema,
                                  const LogSchema& names, std::size_t line_number,
                                  TokenPool& pool) {
  if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
  const auto fields = text::split(line, '\t');
  if (fields.size() != schema.column_count) {
    throw ParseError(line_number, "expected " + std::to_string(schema.column_count) +
                                      " columns, found " + std::to_string(fields.size()));
  }
  ImpressionRecord r;
  const auto click = text::parse_int<int>(fields[schema.click]);
  if (!click) throw ParseError(line_number, "click is not an integer");
  if (*click != 0 && *click != 1) throw ParseError(line_number, "click must be 0 or 1");
  r.click = *click;

  const auto price = text::parse_int<long long>(fields[schema.price]);
  if (!price) throw ParseError(line_number, "market price is not an integer");
  r.market_price = static_cast<std::int32_t>(std::clamp<long long>(*price, 0, kMaxMarketPrice));

  if (!parse_timestamp(fields[schema.timestamp], r.date, r.second_of_day)) {
    throw ParseError(line_number, "bad timestamp '" + std::string(fields[schema.timestamp]) + "'");
  }

  r.features.reserve(schema.features.size());
  std::string token;
  for (std::size_t i = 0; i < schema.features.size(); ++i) {
    const auto& column = names.feature_columns[i];
    token.assign(column);
    token.push_back('=');
    token.append(text::trim(fields[schema.features[i]]));
    r.features.push_back(pool.intern(token));
  }
  return r;
}

std::string format_log_header(const LogSchema& schema) {
  std::string out;
  for (std::size_t i = 0; i < schema.columns.size(); ++i) {
    if (i) out.push_back('\t');
    out += schema.columns[i];
  }
  return out;
}

std::string format_log_record(const ImpressionRecord& record, const LogSchema& schema,
                              const TokenPool& pool) {
  const auto resolved = schema.resolve();
  std::vector<std::string> fields(resolved.column_count, "null");
  fields[resolved.click] = std::to_string(record.click);
  fields[resolved.price] = std::to_string(record.market_price);
  char ts[64];
  std::snprintf(ts, sizeof ts, "%08d%02d%02d%02d000", record.date, record.second_of_day / 3600,
                (record.second_of_day / 60) % 60, record.second_of_day % 60);
  fields[resolved.timestamp] = ts;
  for (const TokenId id : record.features) {
    const std::string& token = pool.token(id);
    const auto eq = token.find('=');
    if (eq == std::string::npos) continue;
    const std::string column = token.substr(0, eq);
    for (std::size_t i = 0; i < schema.feature_columns.size(); ++i) {
      if (schema.feature_columns[i] == column) fields[resolved.features[i]] = token.substr(eq + 1);
    }
  }
  std::string out;
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) out.push_back('\t');
    out += fields[i];
  }
  return out;
}

LogReadResult read_log(std::istream& in, const LogSchema& schema, TokenPool& pool) {
  const auto resolved = schema.resolve();
  LogReadResult result;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    if (line_no == 1) {
      const auto first = text::split(line, '\t').front();
      if (text::trim(first) == schema.click_column) continue;
    }
    try {
      result.records.push_back(parse_log_record(line, resolved, schema, line_no, pool));
    } catch (const ParseError& e) {
      ++result.skipped_lines;
      if (result.first_errors.size() < 10) result.first_errors.emplace_back(e.what());
    }
  }
  if (result.skipped_lines > 0) {
    log::warn("skipped " + std::to_string(result.skipped_lines) + " malformed log line(s); first: " +
              result.first_errors.front());
  }
  return result;
}

LogReadResult read_log_file(const std::filesystem::path& path, const LogSchema& schema,
                            TokenPool& pool) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open log file " + path.string());
  return read_log(in, schema, pool);
}

}  // namespace rtb::ingest

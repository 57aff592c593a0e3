#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace rtb::ingest {

using TokenId = std::uint32_t;

inline constexpr int kSecondsPerDay = 86400;
inline constexpr int kMaxMarketPrice = 300;

// Interns categorical "field=value" tokens so records carry 32-bit ids.
class TokenPool {
 public:
  TokenId intern(std::string_view token);
  std::optional<TokenId> find(std::string_view token) const;
  const std::string& token(TokenId id) const { return tokens_.at(id); }
  std::size_t size() const noexcept { return tokens_.size(); }
  const std::vector<std::string>& tokens() const noexcept { return tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, TokenId> index_;
};

// One logged (won) auction. Losing impressions never appear in the log.
struct ImpressionRecord {
  std::int32_t date = 0;           // yyyymmdd
  std::int32_t second_of_day = 0;  // [0, 86400)
  std::int32_t market_price = 0;   // [0, 300]
  std::int32_t click = 0;          // 0 or 1
  std::optional<double> pctr;      // filled by the CTR model
  std::vector<TokenId> features;

  friend bool operator==(const ImpressionRecord&, const ImpressionRecord&) = default;
};

inline bool chronological(const ImpressionRecord& a, const ImpressionRecord& b) {
  return a.date != b.date ? a.date < b.date : a.second_of_day < b.second_of_day;
}

// Stable sort by (date, second_of_day).
void sort_chronologically(std::vector<ImpressionRecord>& records);

}  // namespace rtb::ingest

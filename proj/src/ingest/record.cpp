#include "rtb/ingest/record.hpp"

#include <algorithm>

namespace rtb::ingest {

TokenId TokenPool::intern(std::string_view token) {
  std::string key(token);
  if (auto it = index_.find(key); it != index_.end()) return it->second;
  const auto id = static_cast<TokenId>(tokens_.size());
  tokens_.push_back(key);
  index_.emplace(std::move(key), id);
  return id;
}

std::optional<TokenId> TokenPool::find(std::string_view token) const {
  if (auto it = index_.find(std::string(token)); it != index_.end()) return it->second;
  return std::nullopt;
}

void sort_chronologically(std::vector<ImpressionRecord>& records) {
  std::stable_sort(records.begin(), records.end(), chronological);
}

}  // namespace rtb::ingest

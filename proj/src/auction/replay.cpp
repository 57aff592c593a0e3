#include "rtb/auction/replay.hpp"

#include "json.hpp"

namespace rtb::auction {

void SlotStats::finalize() {
  win_rate = imps_seen > 0 ? static_cast<double>(imps_won) / static_cast<double>(imps_seen) : 0.0;
  cpm = imps_won > 0 ? static_cast<double>(cost) / static_cast<double>(imps_won) * 1000.0 : 0.0;
  budget_cost_ratio = budget_start > 0 ? static_cast<double>(cost) / static_cast<double>(budget_start) : 0.0;
}

EpisodeResult run_episode(BidStrategy& strategy, const ingest::Episode& episode) {
  if (episode.budget() <= 0) {
    throw DataError("episode " + std::to_string(episode.date()) + " has a non-positive budget");
  }
  strategy.begin_episode(episode);
  auto result = replay_episode(
      episode, [&](const ingest::ImpressionRecord& r, const BidContext& c) { return strategy.bid(r, c); },
      [&](int t, const SlotStats* prev, std::int64_t remaining) { strategy.begin_slot(t, prev, remaining); });
  strategy.end_episode(result);
  return result;
}

Objective objective_value(const EpisodeResult& result) { return {result.clicks, result.pctr_sum}; }

std::string to_json_line(const EpisodeResult& result, const std::string& strategy) {
  nlohmann::json j;
  j["strategy"] = strategy;
  j["date"] = result.date;
  j["budget"] = result.budget;
  j["imps"] = result.imps;
  j["wins"] = result.wins;
  j["clicks"] = result.clicks;
  j["pctr_sum"] = result.pctr_sum;
  j["cost"] = result.cost;
  j["early_stop_slot"] = result.early_stop_slot ? nlohmann::json(*result.early_stop_slot) : nlohmann::json();
  j["foregone_clicks"] = result.foregone_clicks;
  auto& slots = j["slots"] = nlohmann::json::array();
  for (const auto& s : result.slots) {
    slots.push_back({{"slot", s.slot},
                     {"imps_seen", s.imps_seen},
                     {"imps_won", s.imps_won},
                     {"clicks", s.clicks},
                     {"pctr_sum", s.pctr_sum},
                     {"cost", s.cost},
                     {"budget_remaining_at_end", s.budget_remaining_at_end}});
  }
  return j.dump();
}

void write_slot_trace_header(std::ostream& out) {
  out << "label,date,slot,imps_seen,imps_won,clicks,pctr_sum,cost,budget_start,"
         "budget_remaining_at_end,win_rate,cpm,budget_cost_ratio,imps_lost_to_budget\n";
}

void write_slot_trace_rows(std::ostream& out, const EpisodeResult& result, const std::string& label) {
  const auto precision = out.precision(12);
  for (const auto& s : result.slots) {
    out << label << ',' << result.date << ',' << s.slot << ',' << s.imps_seen << ',' << s.imps_won << ','
        << s.clicks << ',' << s.pctr_sum << ',' << s.cost << ',' << s.budget_start << ','
        << s.budget_remaining_at_end << ',' << s.win_rate << ',' << s.cpm << ',' << s.budget_cost_ratio
        << ',' << s.imps_lost_to_budget << '\n';
  }
  out.precision(precision);
}

void write_slot_trace_csv(std::ostream& out, const EpisodeResult& result) {
  write_slot_trace_header(out);
  write_slot_trace_rows(out, result, "episode");
}

}  // namespace rtb::auction

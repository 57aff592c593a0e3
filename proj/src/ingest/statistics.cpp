#include "rtb/ingest/statistics.hpp"

#include <sstream>

namespace rtb::ingest {
namespace {

void add_day(SplitStatistics& s, const DayLog& day, double& pctr_sum) {
  ++s.days;
  for (const auto& r : day.records) {
    ++s.imps;
    s.clicks += r.click;
    s.cost += r.market_price;
    pctr_sum += r.pctr.value_or(0.0);
  }
}

std::string format_optional(const std::optional<double>& v) {
  if (!v) return kUndefinedMarker;
  std::ostringstream os;
  os.precision(10);
  os << *v;
  return os.str();
}

}  // namespace

SplitStatistics split_statistics(const std::string& name, const std::vector<DayPtr>& days) {
  SplitStatistics s;
  s.split = name;
  double pctr_sum = 0.0;
  for (const auto& d : days) add_day(s, *d, pctr_sum);
  if (s.days > 0) s.avg_cost_per_day = static_cast<double>(s.cost) / static_cast<double>(s.days);
  if (s.imps > 0) {
    s.ctr = static_cast<double>(s.clicks) / static_cast<double>(s.imps);
    s.avg_pctr = pctr_sum / static_cast<double>(s.imps);
    s.cpm = static_cast<double>(s.cost) / static_cast<double>(s.imps) * 1000.0;
  }
  if (s.clicks > 0) s.cpc = static_cast<double>(s.cost) / static_cast<double>(s.clicks);
  return s;
}

DatasetStatistics dataset_statistics(const CampaignDataset& dataset, int slot_count) {
  DatasetStatistics out;
  out.train = split_statistics("train", dataset.train_days);
  out.test = split_statistics("test", dataset.test_days);
  auto per_day = [&](const std::vector<DayPtr>& days, const std::string& split) {
    for (const auto& d : days) {
      DayStatistics ds;
      ds.date = d->date;
      ds.split = split;
      for (const auto& r : d->records) {
        ++ds.imps;
        ds.clicks += r.click;
        ds.cost += r.market_price;
      }
      if (ds.imps > 0) ds.cpm = static_cast<double>(ds.cost) / static_cast<double>(ds.imps) * 1000.0;
      out.days.push_back(ds);

      const Episode ep(d, slot_count, BudgetFraction{1});
      for (int t = 0; t < slot_count; ++t) {
        SlotPriceStatistics sp;
        sp.date = d->date;
        sp.slot = t;
        const auto recs = ep.slot(t);
        sp.imps = static_cast<std::int64_t>(recs.size());
        if (!recs.empty()) {
          sp.mean_price = static_cast<double>(ep.slot_cost(t)) / static_cast<double>(recs.size());
        }
        out.slot_prices.push_back(sp);
      }
    }
  };
  per_day(dataset.train_days, "train");
  per_day(dataset.test_days, "test");
  return out;
}

void write_split_statistics_csv(std::ostream& out, const DatasetStatistics& stats) {
  out << "split,imps,clicks,cost,days,avg_cost_per_day,ctr,avg_pctr,cpm,cpc\n";
  out.precision(10);
  for (const auto* s : {&stats.train, &stats.test}) {
    out << s->split << ',' << s->imps << ',' << s->clicks << ',' << s->cost << ',' << s->days << ','
        << s->avg_cost_per_day << ',' << s->ctr << ',' << s->avg_pctr << ',' << s->cpm << ','
        << format_optional(s->cpc) << '\n';
  }
}

void write_daily_market_csv(std::ostream& out, const DatasetStatistics& stats) {
  out << "date,split,imps,clicks,cost,cpm\n";
  out.precision(10);
  for (const auto& d : stats.days) {
    out << d.date << ',' << d.split << ',' << d.imps << ',' << d.clicks << ',' << d.cost << ','
        << d.cpm << '\n';
  }
}

void write_slot_market_price_csv(std::ostream& out, const DatasetStatistics& stats) {
  out << "date,slot,imps,mean_price\n";
  out.precision(10);
  for (const auto& s : stats.slot_prices) {
    out << s.date << ',' << s.slot << ',' << s.imps << ',' << s.mean_price << '\n';
  }
}

}  // namespace rtb::ingest

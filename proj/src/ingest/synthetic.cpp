#include "rtb/ingest/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <numeric>
#include <random>
#include <sstream>

#include "rtb/common/error.hpp"
#include "rtb/common/text.hpp"

namespace rtb::ingest {
namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

// Howard Hinnant's civil-from-days / days-from-civil.
std::int64_t days_from_civil(int y, unsigned m, unsigned d) {
  y -= m <= 2;
  const int era = (y >= 0 ? y : y - 399) / 400;
  const unsigned yoe = static_cast<unsigned>(y - era * 400);
  const unsigned doy = (153 * (m > 2 ? m - 3 : m + 9) + 2) / 5 + d - 1;
  const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
  return static_cast<std::int64_t>(era) * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

void civil_from_days(std::int64_t z, int& y, unsigned& m, unsigned& d) {
  z += 719468;
  const std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
  const unsigned doe = static_cast<unsigned>(z - era * 146097);
  const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
  const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
  const unsigned mp = (5 * doy + 2) / 153;
  d = doy - (153 * mp + 2) / 5 + 1;
  m = mp < 10 ? mp + 3 : mp - 9;
  y = static_cast<int>(yoe) + static_cast<int>(era) * 400 + (m <= 2);
}

double logit(double p) { return std::log(p / (1.0 - p)); }
double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Relative traffic per hour: trough at 04:00, peak at 16:00.
double traffic_profile(int hour) {
  return 0.35 + 0.65 * (0.5 - 0.5 * std::cos(kTwoPi * (hour - 4) / 24.0));
}

// Click propensity shift per hour, strongest in the evening.
double hour_click_effect(int hour) { return 0.5 * std::cos(kTwoPi * (hour - 20) / 24.0); }

}  // namespace

std::int32_t add_days(std::int32_t yyyymmdd, int days) {
  const int y = yyyymmdd / 10000;
  const unsigned m = static_cast<unsigned>((yyyymmdd / 100) % 100);
  const unsigned d = static_cast<unsigned>(yyyymmdd % 100);
  int ny = 0;
  unsigned nm = 0, nd = 0;
  civil_from_days(days_from_civil(y, m, d) + days, ny, nm, nd);
  return ny * 10000 + static_cast<std::int32_t>(nm * 100 + nd);
}

SyntheticConfig SyntheticConfig::parse(const std::string& spec) {
  SyntheticConfig c;
  for (const auto& item : text::split_list(spec)) {
    const auto eq = item.find('=');
    if (eq == std::string::npos) throw ConfigError("synthetic", "expected key=value, got '" + item + "'");
    const std::string key = item.substr(0, eq);
    const std::string value = item.substr(eq + 1);
    auto number = [&]() {
      const auto v = text::parse_double(value);
      if (!v) throw ConfigError("synthetic." + key, "not a number: '" + value + "'");
      return *v;
    };
    auto integer = [&]() {
      const auto v = text::parse_int<long long>(value);
      if (!v || *v < 0) throw ConfigError("synthetic." + key, "not a non-negative integer: '" + value + "'");
      return *v;
    };
    if (key == "seed") c.seed = static_cast<std::uint64_t>(integer());
    else if (key == "n") c.n_impressions = static_cast<std::size_t>(integer());
    else if (key == "days") c.n_days = static_cast<int>(integer());
    else if (key == "test_days") c.test_days = static_cast<int>(integer());
    else if (key == "fields") c.n_fields = static_cast<int>(integer());
    else if (key == "cardinality") c.field_cardinality = static_cast<int>(integer());
    else if (key == "signal") c.click_signal_strength = number();
    else if (key == "ctr") c.base_ctr = number();
    else if (key == "test_volume") c.test_volume_factor = number();
    else if (key == "price_mean") c.price.log_price_mean = std::log(number());
    else if (key == "price_sigma") c.price.log_price_sigma = number();
    else if (key == "value_corr") c.price.value_correlation = number();
    else if (key == "intraday") c.price.intraday_amplitude = number();
    else if (key == "day_sigma") c.price.day_level_sigma = number();
    else if (key == "test_shift") c.price.test_level_shift = number();
    else throw ConfigError("synthetic." + key, "unknown synthetic parameter");
  }
  if (c.n_impressions == 0) throw ConfigError("synthetic.n", "must be positive");
  if (c.click_signal_strength < 0) throw ConfigError("synthetic.signal", "must be >= 0");
  if (c.base_ctr <= 0 || c.base_ctr >= 1) throw ConfigError("synthetic.ctr", "must be in (0, 1)");
  if (c.n_days < 1 || c.test_days < 0 || c.test_days > c.n_days) {
    throw ConfigError("synthetic.days", "need days >= 1 and 0 <= test_days <= days");
  }
  if (c.n_fields < 1 || c.field_cardinality < 1) throw ConfigError("synthetic.fields", "must be >= 1");
  return c;
}

std::string SyntheticConfig::describe() const {
  std::ostringstream os;
  os.precision(17);
  os << "seed=" << seed << ",n=" << n_impressions << ",days=" << n_days
     << ",test_days=" << test_days << ",fields=" << n_fields << ",cardinality=" << field_cardinality
     << ",signal=" << click_signal_strength << ",ctr=" << base_ctr
     << ",test_volume=" << test_volume_factor << ",price_mean=" << std::exp(price.log_price_mean)
     << ",price_sigma=" << price.log_price_sigma << ",value_corr=" << price.value_correlation
     << ",intraday=" << price.intraday_amplitude << ",day_sigma=" << price.day_level_sigma
     << ",test_shift=" << price.test_level_shift;
  return os.str();
}

LogSchema synthetic_schema(int n_fields) {
  LogSchema s;
  s.columns = {"click", "hour", "timestamp", "payprice"};
  s.feature_columns = {"hour"};
  for (int j = 0; j < n_fields; ++j) {
    s.columns.push_back("f" + std::to_string(j));
    s.feature_columns.push_back("f" + std::to_string(j));
  }
  return s;
}

SyntheticLog gen_synthetic_log(const SyntheticConfig& c) {
  std::mt19937_64 rng(c.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  SyntheticLog out;
  out.tokens = std::make_shared<TokenPool>();
  auto& pool = *out.tokens;

  // Planted model: per-field value weights and Zipf-like value frequencies.
  const double field_sd = c.click_signal_strength * 1.3 / std::sqrt(static_cast<double>(c.n_fields));
  std::vector<std::vector<double>> weights(static_cast<std::size_t>(c.n_fields));
  std::vector<std::discrete_distribution<int>> value_dist;
  std::vector<std::vector<TokenId>> value_tokens(static_cast<std::size_t>(c.n_fields));
  for (int j = 0; j < c.n_fields; ++j) {
    std::vector<double> freq;
    for (int v = 0; v < c.field_cardinality; ++v) {
      weights[static_cast<std::size_t>(j)].push_back(field_sd * gauss(rng));
      freq.push_back(1.0 / std::pow(v + 1.0, 0.7));
      value_tokens[static_cast<std::size_t>(j)].push_back(
          pool.intern("f" + std::to_string(j) + "=" + std::to_string(v)));
    }
    value_dist.emplace_back(freq.begin(), freq.end());
  }
  std::vector<TokenId> hour_tokens;
  std::vector<double> hour_weights;
  for (int h = 0; h < 24; ++h) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "hour=%02d", h);
    hour_tokens.push_back(pool.intern(buf));
    hour_weights.push_back(traffic_profile(h));
  }
  std::discrete_distribution<int> hour_dist(hour_weights.begin(), hour_weights.end());

  // Center the logit so the marginal CTR stays near base_ctr as the signal grows.
  const double signal_var = c.click_signal_strength * c.click_signal_strength * (1.3 * 1.3 + 0.125);
  const double base_logit = logit(c.base_ctr) - 0.5 * signal_var;

  // Day volumes (largest-remainder allocation) and price levels.
  std::vector<double> volume(static_cast<std::size_t>(c.n_days));
  std::vector<double> level(static_cast<std::size_t>(c.n_days));
  std::vector<double> phase1(static_cast<std::size_t>(c.n_days));
  std::vector<double> phase2(static_cast<std::size_t>(c.n_days));
  const int first_test = c.n_days - c.test_days;
  for (int d = 0; d < c.n_days; ++d) {
    const bool test = d >= first_test;
    volume[static_cast<std::size_t>(d)] =
        std::exp(0.1 * gauss(rng)) * (test ? c.test_volume_factor : 1.0);
    level[static_cast<std::size_t>(d)] =
        c.price.day_level_sigma * gauss(rng) + (test ? c.price.test_level_shift : 0.0);
    phase1[static_cast<std::size_t>(d)] = 1.0 + 0.5 * gauss(rng);
    phase2[static_cast<std::size_t>(d)] = 2.5 + 0.8 * gauss(rng);
  }
  const double volume_sum = std::accumulate(volume.begin(), volume.end(), 0.0);
  std::vector<std::size_t> counts(static_cast<std::size_t>(c.n_days));
  std::vector<std::pair<double, int>> remainders;
  std::size_t assigned = 0;
  for (int d = 0; d < c.n_days; ++d) {
    const double exact = static_cast<double>(c.n_impressions) * volume[static_cast<std::size_t>(d)] / volume_sum;
    counts[static_cast<std::size_t>(d)] = static_cast<std::size_t>(std::floor(exact));
    assigned += counts[static_cast<std::size_t>(d)];
    remainders.emplace_back(exact - std::floor(exact), d);
  }
  std::stable_sort(remainders.begin(), remainders.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t k = 0; assigned < c.n_impressions; ++k, ++assigned) {
    ++counts[static_cast<std::size_t>(remainders[k % remainders.size()].second)];
  }

  out.records.reserve(c.n_impressions);
  out.click_probability.reserve(c.n_impressions);
  for (int d = 0; d < c.n_days; ++d) {
    const std::int32_t date = add_days(c.first_date, d);
    std::vector<ImpressionRecord> day;
    std::vector<double> probability;
    for (std::size_t i = 0; i < counts[static_cast<std::size_t>(d)]; ++i) {
      ImpressionRecord r;
      r.date = date;
      const int hour = hour_dist(rng);
      r.second_of_day = hour * 3600 + static_cast<int>(unit(rng) * 3600.0) % 3600;
      double signal = c.click_signal_strength * hour_click_effect(hour);
      r.features.reserve(static_cast<std::size_t>(c.n_fields) + 1);
      r.features.push_back(hour_tokens[static_cast<std::size_t>(hour)]);
      for (int j = 0; j < c.n_fields; ++j) {
        const int v = value_dist[static_cast<std::size_t>(j)](rng);
        signal += weights[static_cast<std::size_t>(j)][static_cast<std::size_t>(v)];
        r.features.push_back(value_tokens[static_cast<std::size_t>(j)][static_cast<std::size_t>(v)]);
      }
      probability.push_back(sigmoid(base_logit + signal));
      r.click = unit(rng) < probability.back() ? 1 : 0;

      const double day_fraction = r.second_of_day / static_cast<double>(kSecondsPerDay);
      const double intraday =
          c.price.intraday_amplitude *
          (0.6 * std::sin(kTwoPi * 2.0 * day_fraction + phase1[static_cast<std::size_t>(d)]) +
           0.4 * std::sin(kTwoPi * 5.0 * day_fraction + phase2[static_cast<std::size_t>(d)]));
      const double log_price = c.price.log_price_mean + level[static_cast<std::size_t>(d)] + intraday +
                               c.price.value_correlation * signal + c.price.log_price_sigma * gauss(rng);
      r.market_price = static_cast<std::int32_t>(
          std::clamp(std::floor(std::exp(log_price) + 0.5), 0.0, static_cast<double>(kMaxMarketPrice)));
      day.push_back(std::move(r));
    }
    std::vector<std::size_t> order(day.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return chronological(day[a], day[b]); });
    for (const auto i : order) {
      out.records.push_back(std::move(day[i]));
      out.click_probability.push_back(probability[i]);
    }
  }
  return out;
}

}  // namespace rtb::ingest

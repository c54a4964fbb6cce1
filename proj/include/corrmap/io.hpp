#pragma once

#include <charconv>
#include <cmath>
#include <cstdio>
#include <chrono>
#include <cstdint>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include <json.hpp>

#include "corrmap/core.hpp"
#include "corrmap/embedding.hpp"
#include "corrmap/error.hpp"
#include "corrmap/matrix.hpp"

namespace corrmap {

using json = nlohmann::json;

// Shortest decimal that round-trips; NaN renders as an empty field.
inline std::string format_number(double v) {
  if (is_missing(v)) return {};
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

inline json number_or_null(double v) { return is_missing(v) ? json(nullptr) : json(v); }
inline double number_from_json(const json& j) { return j.is_null() ? kMissing : j.get<double>(); }

// Config hash and seed stamped into every artifact.
struct Provenance {
  std::string config_hash;
  std::uint64_t seed = 0;

  std::string csv_comment() const {
    return "# config_hash=" + config_hash + " seed=" + std::to_string(seed) + "\n";
  }
  json to_json() const { return {{"config_hash", config_hash}, {"seed", seed}}; }
};

// ---------------------------------------------------------------------------
// CSV parsing helpers
// ---------------------------------------------------------------------------

namespace detail {

inline std::vector<std::string_view> split_csv(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    out.push_back(line.substr(start, comma == std::string_view::npos ? line.npos : comma - start));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

[[noreturn]] inline void csv_fail(std::size_t line, const std::string& msg) {
  throw validation_error("line " + std::to_string(line) + ": " + msg);
}

template <typename T>
T parse_number(std::string_view field, std::size_t line, const char* what) {
  field = trim(field);
  T value{};
  const auto res = std::from_chars(field.data(), field.data() + field.size(), value);
  if (res.ec != std::errc{} || res.ptr != field.data() + field.size())
    csv_fail(line, std::string("invalid ") + what + " '" + std::string(field) + "'");
  return value;
}

// Reads non-empty, non-comment lines; checks the header.
template <typename Fn>
void for_each_row(std::istream& in, std::string_view header, Fn&& fn) {
  std::string line;
  std::size_t lineno = 0;
  bool seen_header = false;
  while (std::getline(in, line)) {
    ++lineno;
    const auto view = trim(line);
    if (view.empty() || view.front() == '#') continue;
    if (!seen_header) {
      if (view != header) csv_fail(lineno, "expected header '" + std::string(header) + "'");
      seen_header = true;
      continue;
    }
    const auto fields = split_csv(view);
    fn(fields, lineno);
  }
  if (!seen_header) throw validation_error("missing header '" + std::string(header) + "'");
}

}  // namespace detail

// YYYY-MM-DD
inline Date parse_date(std::string_view s) {
  s = detail::trim(s);
  int y = 0;
  unsigned m = 0, d = 0;
  if (s.size() != 10 || s[4] != '-' || s[7] != '-')
    throw validation_error("invalid date '" + std::string(s) + "'");
  auto num = [&](std::string_view part, auto& out) {
    const auto res = std::from_chars(part.data(), part.data() + part.size(), out);
    if (res.ec != std::errc{} || res.ptr != part.data() + part.size())
      throw validation_error("invalid date '" + std::string(s) + "'");
  };
  num(s.substr(0, 4), y);
  num(s.substr(5, 2), m);
  num(s.substr(8, 2), d);
  const Date date{std::chrono::year{y}, std::chrono::month{m}, std::chrono::day{d}};
  if (!date.ok()) throw validation_error("invalid date '" + std::string(s) + "'");
  return date;
}

inline std::string format_date(Date d) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(d.year()),
                static_cast<unsigned>(d.month()), static_cast<unsigned>(d.day()));
  return buf;
}

// HH:MM or HH:MM:SS as an offset from midnight.
inline Duration parse_time_of_day(std::string_view s) {
  s = detail::trim(s);
  int parts[3] = {0, 0, 0};
  int count = 0;
  std::size_t pos = 0;
  while (count < 3) {
    const auto colon = s.find(':', pos);
    const auto piece = s.substr(pos, colon == s.npos ? s.npos : colon - pos);
    const auto res = std::from_chars(piece.data(), piece.data() + piece.size(), parts[count]);
    if (piece.empty() || res.ec != std::errc{} || res.ptr != piece.data() + piece.size())
      throw validation_error("invalid time of day '" + std::string(s) + "'");
    ++count;
    if (colon == s.npos) break;
    pos = colon + 1;
  }
  if (count < 2 || parts[0] > 24 || parts[1] >= 60 || parts[2] >= 60)
    throw validation_error("invalid time of day '" + std::string(s) + "'");
  using namespace std::chrono;
  return hours{parts[0]} + minutes{parts[1]} + seconds{parts[2]};
}

inline std::string format_time_of_day(Duration d) {
  using namespace std::chrono;
  const auto s = duration_cast<seconds>(d).count();
  char buf[64];
  if (s % 60 == 0)
    std::snprintf(buf, sizeof buf, "%02lld:%02lld", static_cast<long long>(s / 3600),
                  static_cast<long long>((s / 60) % 60));
  else
    std::snprintf(buf, sizeof buf, "%02lld:%02lld:%02lld", static_cast<long long>(s / 3600),
                  static_cast<long long>((s / 60) % 60), static_cast<long long>(s % 60));
  return buf;
}

// ---------------------------------------------------------------------------
// Tick CSV: timestamp_ns,symbol,price
// ---------------------------------------------------------------------------

inline constexpr std::string_view kTickHeader = "timestamp_ns,symbol,price";

// Rows may interleave symbols but must be time-ordered within a symbol.
// Series come back ordered by symbol name.
inline std::vector<TickSeries> read_ticks_csv(std::istream& in) {
  std::map<std::string, std::vector<Tick>> by_symbol;
  detail::for_each_row(in, kTickHeader, [&](const auto& f, std::size_t line) {
    if (f.size() != 3) detail::csv_fail(line, "expected 3 fields");
    const auto ns = detail::parse_number<std::int64_t>(f[0], line, "timestamp");
    const auto symbol = std::string(detail::trim(f[1]));
    if (symbol.empty()) detail::csv_fail(line, "empty symbol");
    const auto price = detail::parse_number<double>(f[2], line, "price");
    if (!(price > 0.0) || !std::isfinite(price))
      detail::csv_fail(line, "non-positive price for " + symbol);
    auto& ticks = by_symbol[symbol];
    const auto ts = timestamp_from_ns(ns);
    if (!ticks.empty() && !(ticks.back().time < ts))
      detail::csv_fail(line, "timestamps for " + symbol + " are not strictly increasing");
    ticks.push_back({ts, price});
  });
  std::vector<TickSeries> out;
  for (auto& [symbol, ticks] : by_symbol) out.emplace_back(symbol, std::move(ticks));
  return out;
}

inline std::vector<TickSeries> read_ticks_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw validation_error("cannot open " + path);
  return read_ticks_csv(in);
}

// Rows merged in time order (ties by series order).
inline void write_ticks_csv(std::ostream& out, const std::vector<TickSeries>& series) {
  out << kTickHeader << '\n';
  std::vector<std::size_t> cursor(series.size(), 0);
  while (true) {
    std::size_t pick = series.size();
    for (std::size_t s = 0; s < series.size(); ++s) {
      if (cursor[s] >= series[s].size()) continue;
      if (pick == series.size() || series[s][cursor[s]].time < series[pick][cursor[pick]].time)
        pick = s;
    }
    if (pick == series.size()) break;
    const auto& tk = series[pick][cursor[pick]++];
    out << to_ns(tk.time) << ',' << series[pick].symbol() << ',' << format_number(tk.price) << '\n';
  }
}

// ---------------------------------------------------------------------------
// Daily CSV: date,symbol,close
// ---------------------------------------------------------------------------

inline constexpr std::string_view kDailyHeader = "date,symbol,close";

// Closing prices on the union calendar; closes[i][d] is NaN when symbol i
// has no row for dates[d].
struct DailyPrices {
  std::vector<std::string> symbols;
  std::vector<Date> dates;
  std::vector<std::vector<double>> closes;

  // Log returns between consecutive calendar dates; entry d is the return
  // ending on dates[d + 1]. NaN if either close is missing.
  std::vector<std::vector<double>> log_returns() const {
    std::vector<std::vector<double>> out(symbols.size());
    for (std::size_t i = 0; i < symbols.size(); ++i) {
      if (dates.size() < 2) continue;
      out[i].resize(dates.size() - 1);
      for (std::size_t d = 1; d < dates.size(); ++d)
        out[i][d - 1] = std::log(closes[i][d]) - std::log(closes[i][d - 1]);
    }
    return out;
  }
};

// Closing prices from log returns: closes start at `initial` on dates[0] and
// returns[i][d] moves symbol i from dates[d] to dates[d + 1].
inline DailyPrices prices_from_returns(std::vector<std::string> symbols, std::vector<Date> dates,
                                       const std::vector<std::vector<double>>& returns,
                                       double initial = 100.0) {
  if (returns.size() != symbols.size()) throw validation_error("one return series per symbol");
  DailyPrices p{std::move(symbols), std::move(dates), {}};
  for (const auto& r : returns) {
    if (r.size() + 1 != p.dates.size()) throw validation_error("need one more date than returns");
    std::vector<double> c{initial};
    double level = std::log(initial);
    for (double x : r) c.push_back(std::exp(level += x));
    p.closes.push_back(std::move(c));
  }
  return p;
}

inline DailyPrices read_daily_csv(std::istream& in) {
  std::map<std::string, std::map<Date, double>> rows;
  std::map<Date, bool> calendar;
  detail::for_each_row(in, kDailyHeader, [&](const auto& f, std::size_t line) {
    if (f.size() != 3) detail::csv_fail(line, "expected 3 fields");
    Date date;
    try {
      date = parse_date(f[0]);
    } catch (const validation_error& e) {
      detail::csv_fail(line, e.what());
    }
    const auto symbol = std::string(detail::trim(f[1]));
    if (symbol.empty()) detail::csv_fail(line, "empty symbol");
    const auto close = detail::parse_number<double>(f[2], line, "close");
    if (!(close > 0.0) || !std::isfinite(close))
      detail::csv_fail(line, "non-positive close for " + symbol);
    if (!rows[symbol].emplace(date, close).second)
      detail::csv_fail(line, "duplicate row for " + symbol + " on " + format_date(date));
    calendar[date] = true;
  });
  DailyPrices out;
  for (const auto& [d, _] : calendar) out.dates.push_back(d);
  for (const auto& [symbol, series] : rows) {
    out.symbols.push_back(symbol);
    std::vector<double> closes(out.dates.size(), kMissing);
    for (std::size_t d = 0; d < out.dates.size(); ++d) {
      auto it = series.find(out.dates[d]);
      if (it != series.end()) closes[d] = it->second;
    }
    out.closes.push_back(std::move(closes));
  }
  return out;
}

inline DailyPrices read_daily_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw validation_error("cannot open " + path);
  return read_daily_csv(in);
}

inline void write_daily_csv(std::ostream& out, const DailyPrices& prices) {
  out << kDailyHeader << '\n';
  for (std::size_t d = 0; d < prices.dates.size(); ++d)
    for (std::size_t i = 0; i < prices.symbols.size(); ++i) {
      if (is_missing(prices.closes[i][d])) continue;
      out << format_date(prices.dates[d]) << ',' << prices.symbols[i] << ','
          << format_number(prices.closes[i][d]) << '\n';
    }
}

// ---------------------------------------------------------------------------
// JSON layouts
// ---------------------------------------------------------------------------

inline json grid_to_json(const BinGrid& grid) {
  json days = json::array();
  for (const auto& d : grid.trading_days()) days.push_back(format_date(d));
  return {{"session_start", format_time_of_day(grid.session_start())},
          {"session_end", format_time_of_day(grid.session_end())},
          {"bin_width_seconds",
           std::chrono::duration_cast<std::chrono::seconds>(grid.bin_width()).count()},
          {"trading_days", days}};
}

inline BinGrid grid_from_json(const json& j) {
  std::vector<Date> days;
  for (const auto& d : j.at("trading_days")) days.push_back(parse_date(d.get<std::string>()));
  return BinGrid(parse_time_of_day(j.at("session_start").get<std::string>()),
                 parse_time_of_day(j.at("session_end").get<std::string>()),
                 std::chrono::seconds{j.at("bin_width_seconds").get<std::int64_t>()},
                 std::move(days));
}

// {symbols, grid, shape: [N, K, T], returns: flat r[i][k][t] row-major, null = missing}
inline json panel_to_json(const BinnedReturnPanel& panel) {
  json returns = json::array();
  for (double v : panel.values()) returns.push_back(number_or_null(v));
  return {{"symbols", panel.symbols()},
          {"grid", grid_to_json(panel.grid())},
          {"shape", {panel.stocks(), panel.bins(), panel.days()}},
          {"returns", returns}};
}

inline BinnedReturnPanel panel_from_json(const json& j) {
  std::vector<double> values;
  for (const auto& v : j.at("returns")) values.push_back(number_from_json(v));
  return BinnedReturnPanel(j.at("symbols").get<std::vector<std::string>>(),
                           grid_from_json(j.at("grid")), std::move(values));
}

// {symbols, estimator_tag, size, values: flat row-major, support: flat row-major}
inline json correlation_to_json(const CorrelationMatrix& m) {
  json values = json::array(), support = json::array();
  for (double v : m.values().data()) values.push_back(number_or_null(v));
  for (std::size_t c : m.support().data()) support.push_back(c);
  return {{"symbols", m.symbols()},
          {"estimator_tag", m.tag()},
          {"size", m.size()},
          {"values", values},
          {"support", support}};
}

inline CorrelationMatrix correlation_from_json(const json& j) {
  const auto symbols = j.at("symbols").get<std::vector<std::string>>();
  const std::size_t n = symbols.size();
  auto tag = j.at("estimator_tag").get<std::string>();
  const bool averaged = tag.ends_with("+averaged");
  if (averaged) tag.resize(tag.size() - std::string_view("+averaged").size());
  SquareMatrix values(n);
  CountMatrix support(n);
  const auto& v = j.at("values");
  const auto& s = j.at("support");
  if (v.size() != n * n || s.size() != n * n) throw validation_error("matrix JSON has wrong size");
  for (std::size_t c = 0; c < n * n; ++c) {
    values.data()[c] = number_from_json(v[c]);
    support.data()[c] = s[c].get<std::size_t>();
  }
  return CorrelationMatrix(symbols, std::move(values), estimator_from_string(tag),
                           std::move(support), averaged);
}

inline json distance_to_json(const DistanceMatrix& d) {
  json values = json::array();
  for (double v : d.values().data()) values.push_back(v);
  return {{"symbols", d.symbols()}, {"size", d.size()}, {"values", values}};
}

// Square CSV with a symbol header row and column; undefined entries empty.
inline void write_matrix_csv(std::ostream& out, const std::vector<std::string>& symbols,
                             const SquareMatrix& values, const Provenance* prov = nullptr) {
  if (prov) out << prov->csv_comment();
  out << "symbol";
  for (const auto& s : symbols) out << ',' << s;
  out << '\n';
  for (std::size_t i = 0; i < symbols.size(); ++i) {
    out << symbols[i];
    for (std::size_t j = 0; j < symbols.size(); ++j) out << ',' << format_number(values(i, j));
    out << '\n';
  }
}

inline json schedule_to_json(const AnnealingSchedule& s) {
  return {{"initial_temperature", s.initial_temperature},
          {"cooling_factor", s.cooling_factor},
          {"steps_per_temperature", s.steps_per_temperature},
          {"min_temperature", s.min_temperature},
          {"proposal_scale", s.proposal_scale}};
}

inline AnnealingSchedule schedule_from_json(const json& j) {
  AnnealingSchedule s;
  s.initial_temperature = j.value("initial_temperature", s.initial_temperature);
  s.cooling_factor = j.value("cooling_factor", s.cooling_factor);
  s.steps_per_temperature = j.value("steps_per_temperature", s.steps_per_temperature);
  s.min_temperature = j.value("min_temperature", s.min_temperature);
  s.proposal_scale = j.value("proposal_scale", s.proposal_scale);
  s.validate();
  return s;
}

// {symbols, coords: [[x, y], ...], stress, seed, penalty_weight, schedule}
inline json map_to_json(const EmbeddingMap& map) {
  json coords = json::array();
  for (std::size_t i = 0; i < map.size(); ++i) {
    json p = json::array();
    for (double v : map.point(i)) p.push_back(v);
    coords.push_back(p);
  }
  return {{"symbols", map.symbols},
          {"coords", coords},
          {"stress", map.stress},
          {"seed", map.seed},
          {"penalty_weight", map.penalty_weight},
          {"schedule", schedule_to_json(map.schedule)}};
}

inline EmbeddingMap map_from_json(const json& j) {
  EmbeddingMap map;
  map.symbols = j.at("symbols").get<std::vector<std::string>>();
  const auto& coords = j.at("coords");
  if (coords.size() != map.symbols.size()) throw validation_error("map JSON: coords/symbols mismatch");
  map.dim = coords.empty() ? 2 : coords.front().size();
  for (const auto& p : coords) {
    if (p.size() != map.dim) throw validation_error("map JSON: ragged coordinates");
    for (const auto& v : p) map.coords.push_back(v.get<double>());
  }
  map.stress = j.value("stress", 0.0);
  map.seed = j.value("seed", std::uint64_t{0});
  map.penalty_weight = j.value("penalty_weight", 0.0);
  if (j.contains("schedule")) map.schedule = schedule_from_json(j.at("schedule"));
  return map;
}

// symbol,x,y (further axes z, w3, w4, ...)
inline void write_map_csv(std::ostream& out, const EmbeddingMap& map,
                          const Provenance* prov = nullptr) {
  if (prov) out << prov->csv_comment();
  out << "symbol";
  for (std::size_t k = 0; k < map.dim; ++k)
    out << ',' << (k == 0 ? "x" : k == 1 ? "y" : k == 2 ? "z" : "w" + std::to_string(k + 1));
  out << '\n';
  for (std::size_t i = 0; i < map.size(); ++i) {
    out << map.symbols[i];
    for (double v : map.point(i)) out << ',' << format_number(v);
    out << '\n';
  }
}

// bin,lambda1_over_N,...,lambdaK_over_N
inline void write_spectrum_csv(std::ostream& out, const std::vector<std::vector<double>>& series,
                               const Provenance* prov = nullptr) {
  if (prov) out << prov->csv_comment();
  const std::size_t top = series.empty() ? 0 : series.front().size();
  out << "bin";
  for (std::size_t i = 1; i <= top; ++i) out << ",lambda" << i << "_over_N";
  out << '\n';
  for (std::size_t k = 0; k < series.size(); ++k) {
    out << k;
    for (double v : series[k]) out << ',' << format_number(v);
    out << '\n';
  }
}

}  // namespace corrmap

#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "corrmap/core.hpp"
#include "corrmap/embedding.hpp"
#include "corrmap/error.hpp"
#include "corrmap/estimators.hpp"
#include "corrmap/io.hpp"
#include "corrmap/parallel.hpp"
#include "corrmap/spectral.hpp"

namespace corrmap {

enum class Mode { intraday_ticks, intraday_binned, daily };

inline std::string_view to_string(Mode m) {
  switch (m) {
    case Mode::intraday_ticks: return "intraday-ticks";
    case Mode::intraday_binned: return "intraday-binned";
    case Mode::daily: return "daily";
  }
  return "unknown";
}

inline Mode mode_from_string(std::string_view s) {
  for (auto m : {Mode::intraday_ticks, Mode::intraday_binned, Mode::daily})
    if (to_string(m) == s) return m;
  throw validation_error("unknown mode '" + std::string(s) + "'");
}

// What to do with a daily window in which some symbols have gaps.
enum class MissingPolicy { drop_symbols, skip_window };

struct PipelineConfig {
  Mode mode = Mode::intraday_ticks;
  std::vector<std::string> inputs;
  Duration session_start = std::chrono::hours{10};
  Duration session_end = std::chrono::hours{16};
  Duration bin_width = std::chrono::minutes{30};
  std::size_t window = 250;
  std::size_t step = 0;  // 0: non-overlapping, step = window
  std::optional<Estimator> estimator;
  Duration sample_interval = std::chrono::minutes{5};  // realized estimator only
  bool clean = false;
  AnnealingSchedule schedule;
  std::optional<double> penalty_weight;
  std::uint64_t seed = 1;
  std::size_t dimensions = 2;
  MissingPolicy missing = MissingPolicy::drop_symbols;
  std::string output_dir = "out";
  unsigned threads = default_thread_count();

  Estimator resolved_estimator() const {
    if (estimator) return *estimator;
    switch (mode) {
      case Mode::intraday_ticks: return Estimator::hayashi_yoshida;
      case Mode::intraday_binned: return Estimator::pearson_binned;
      case Mode::daily: return Estimator::pearson_daily;
    }
    return Estimator::pearson_daily;
  }

  std::size_t resolved_step() const { return step == 0 ? window : step; }

  void validate() const {
    const Estimator e = resolved_estimator();
    if (mode == Mode::daily) {
      if (window < 2) throw validation_error("--window must be at least 2 trading days");
      if (e != Estimator::pearson_daily)
        throw validation_error("daily mode supports the pearson-daily estimator only");
    } else {
      if (bin_width <= Duration::zero()) throw validation_error("--bin-width must be positive");
      if (session_end <= session_start) throw validation_error("--session end must follow start");
      if ((session_end - session_start) % bin_width != Duration::zero())
        throw validation_error("--bin-width does not divide the session window");
      if (mode == Mode::intraday_ticks && e != Estimator::hayashi_yoshida &&
          e != Estimator::realized)
        throw validation_error("intraday-ticks mode needs hayashi-yoshida or realized");
      if (mode == Mode::intraday_binned && e != Estimator::pearson_binned)
        throw validation_error("intraday-binned mode needs the pearson-binned estimator");
      if (e == Estimator::realized && sample_interval <= Duration::zero())
        throw validation_error("realized estimator needs a positive sample interval");
    }
    if (dimensions < 1) throw validation_error("embedding dimension must be at least 1");
    if (penalty_weight && *penalty_weight < 0.0)
      throw validation_error("penalty weight must be non-negative");
    schedule.validate();
  }

  // Everything that influences the numbers; paths are excluded so the same
  // run in another directory hashes identically.
  json to_json() const {
    using std::chrono::duration_cast;
    using std::chrono::seconds;
    json j = {{"mode", to_string(mode)},
              {"session", format_time_of_day(session_start) + "-" + format_time_of_day(session_end)},
              {"bin_width_seconds", duration_cast<seconds>(bin_width).count()},
              {"window", window},
              {"step", resolved_step()},
              {"estimator", to_string(resolved_estimator())},
              {"sample_interval_seconds", duration_cast<seconds>(sample_interval).count()},
              {"clean", clean},
              {"schedule", schedule_to_json(schedule)},
              {"seed", seed},
              {"dimensions", dimensions},
              {"missing", missing == MissingPolicy::drop_symbols ? "drop-symbols" : "skip-window"}};
    j["penalty_weight"] = penalty_weight ? json(*penalty_weight) : json("default");
    return j;
  }

  std::string hash() const {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : to_json().dump()) {
      h ^= c;
      h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
  }
};

// Parses "HH:MM-HH:MM".
inline std::pair<Duration, Duration> parse_session(std::string_view s) {
  const auto dash = s.find('-');
  if (dash == s.npos) throw validation_error("session must look like 10:00-16:00");
  return {parse_time_of_day(s.substr(0, dash)), parse_time_of_day(s.substr(dash + 1))};
}

// Applies the keys present in a declarative JSON config file.
inline void apply_config_json(PipelineConfig& cfg, const json& j) {
  if (j.contains("mode")) cfg.mode = mode_from_string(j["mode"].get<std::string>());
  if (j.contains("inputs")) cfg.inputs = j["inputs"].get<std::vector<std::string>>();
  if (j.contains("session")) {
    auto [a, b] = parse_session(j["session"].get<std::string>());
    cfg.session_start = a;
    cfg.session_end = b;
  }
  if (j.contains("bin_width_seconds"))
    cfg.bin_width = std::chrono::seconds{j["bin_width_seconds"].get<std::int64_t>()};
  if (j.contains("window")) cfg.window = j["window"].get<std::size_t>();
  if (j.contains("step")) cfg.step = j["step"].get<std::size_t>();
  if (j.contains("estimator"))
    cfg.estimator = estimator_from_string(j["estimator"].get<std::string>());
  if (j.contains("sample_interval_seconds"))
    cfg.sample_interval = seconds_to_duration(j["sample_interval_seconds"].get<double>());
  if (j.contains("clean")) cfg.clean = j["clean"].get<bool>();
  if (j.contains("schedule")) cfg.schedule = schedule_from_json(j["schedule"]);
  if (j.contains("penalty_weight") && j["penalty_weight"].is_number())
    cfg.penalty_weight = j["penalty_weight"].get<double>();
  if (j.contains("seed")) cfg.seed = j["seed"].get<std::uint64_t>();
  if (j.contains("dimensions")) cfg.dimensions = j["dimensions"].get<std::size_t>();
  if (j.contains("missing")) {
    const auto m = j["missing"].get<std::string>();
    if (m == "drop-symbols") cfg.missing = MissingPolicy::drop_symbols;
    else if (m == "skip-window") cfg.missing = MissingPolicy::skip_window;
    else throw validation_error("missing must be drop-symbols or skip-window");
  }
  if (j.contains("threads")) cfg.threads = std::max(1u, j["threads"].get<unsigned>());
  if (j.contains("output_dir")) cfg.output_dir = j["output_dir"].get<std::string>();
}

// Writes artifacts below the output directory, stamps provenance and keeps
// the list for the manifest.
class ArtifactWriter {
 public:
  ArtifactWriter(std::filesystem::path root, Provenance prov)
      : root_(std::move(root)), prov_(std::move(prov)) {
    std::filesystem::create_directories(root_);
  }

  const Provenance& provenance() const { return prov_; }

  template <typename Fn>
  void csv(const std::string& rel, const std::string& kind, Fn&& body) {
    auto out = open(rel, kind);
    out << prov_.csv_comment();
    body(out);
  }

  void json_file(const std::string& rel, const std::string& kind, json j) {
    j["provenance"] = prov_.to_json();
    auto out = open(rel, kind);
    out << j.dump(1) << '\n';
  }

  void series(const std::string& rel, const std::string& kind, const std::string& key,
              const std::vector<std::string>& labels, const std::vector<double>& values) {
    csv(rel, kind, [&](std::ostream& out) {
      out << key << ",value\n";
      for (std::size_t i = 0; i < values.size(); ++i)
        out << labels[i] << ',' << format_number(values[i]) << '\n';
    });
  }

  void chain(const std::string& dir, const std::vector<std::string>& step_names,
             const std::vector<EmbeddingMap>& maps) {
    std::vector<double> md;
    for (std::size_t s = 0; s < maps.size(); ++s) {
      json_file(dir + "/" + step_names[s] + ".json", "map", map_to_json(maps[s]));
      csv(dir + "/" + step_names[s] + ".csv", "map-csv",
          [&](std::ostream& out) { write_map_csv(out, maps[s]); });
      md.push_back(mean_distance_from_center(maps[s]));
    }
    csv(dir + "/mean_distance.csv", "mean-distance", [&](std::ostream& out) {
      out << "step,mean_distance\n";
      for (std::size_t s = 0; s < md.size(); ++s) out << s << ',' << format_number(md[s]) << '\n';
    });
  }

  void manifest(const json& config, const std::vector<std::string>& diagnostics,
                const std::vector<std::string>& skipped) {
    json arts = json::array();
    for (const auto& [path, kind] : artifacts_)
      arts.push_back({{"path", path}, {"kind", kind}, {"config_hash", prov_.config_hash}});
    json m = {{"config", config},        {"config_hash", prov_.config_hash},
              {"seed", prov_.seed},      {"artifacts", arts},
              {"diagnostics", diagnostics}, {"skipped_stages", skipped}};
    std::ofstream out(root_ / "manifest.json");
    out << m.dump(1) << '\n';
  }

 private:
  std::ofstream open(const std::string& rel, const std::string& kind) {
    const auto path = root_ / rel;
    std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out) throw validation_error("cannot write " + path.string());
    artifacts_.emplace_back(rel, kind);
    return out;
  }

  std::filesystem::path root_;
  Provenance prov_;
  std::vector<std::pair<std::string, std::string>> artifacts_;
};

namespace detail {

inline std::string two_digit(std::size_t k) {
  char buf[24];
  std::snprintf(buf, sizeof buf, "%02zu", k);
  return buf;
}

// Ticks in (from, to] plus the anchor observation at or before `from` on the
// same calendar day.
inline TickSeries cell_ticks(const TickSeries& s, Timestamp from, Timestamp to,
                             Timestamp midnight) {
  std::ptrdiff_t first = s.last_at_or_before(from);
  if (first < 0 || s[static_cast<std::size_t>(first)].time < midnight) ++first;
  const std::ptrdiff_t last = s.last_at_or_before(to);
  std::vector<Tick> out;
  for (std::ptrdiff_t m = std::max<std::ptrdiff_t>(first, 0); m <= last; ++m)
    out.push_back(s[static_cast<std::size_t>(m)]);
  return TickSeries(s.symbol(), std::move(out));
}

inline std::size_t min_offdiagonal_support(const CorrelationMatrix& m) {
  std::size_t best = 0;
  bool any = false;
  for (std::size_t i = 0; i < m.size(); ++i)
    for (std::size_t j = i + 1; j < m.size(); ++j)
      if (!any || m.support()(i, j) < best) {
        best = m.support()(i, j);
        any = true;
      }
  return best;
}

// Optional Marchenko-Pastur cleaning with q = N / (smallest pair support).
inline CorrelationMatrix maybe_clean(const CorrelationMatrix& m, bool clean) {
  if (!clean) return m;
  const std::size_t samples = min_offdiagonal_support(m);
  if (samples == 0) throw insufficient_data("clean: matrix has pairs without samples");
  return clean_spectrum(eigendecompose(m),
                        static_cast<double>(m.size()) / static_cast<double>(samples));
}

// Replaces undefined entries with those of `fallback`; throws naming the
// pair if both are undefined.
inline CorrelationMatrix fill_undefined(const CorrelationMatrix& m,
                                        const CorrelationMatrix& fallback,
                                        const std::string& stage, std::vector<std::string>& diag) {
  if (!m.has_undefined()) return m;
  SquareMatrix v = m.values();
  std::size_t filled = 0;
  for (std::size_t i = 0; i < m.size(); ++i)
    for (std::size_t j = i + 1; j < m.size(); ++j) {
      if (!is_missing(v(i, j))) continue;
      if (is_missing(fallback(i, j)))
        throw insufficient_data(stage + ": no correlation estimate for " + m.symbols()[i] + "/" +
                                m.symbols()[j]);
      v(i, j) = v(j, i) = fallback(i, j);
      ++filled;
    }
  diag.push_back(stage + ": " + std::to_string(filled) +
                 " undefined entries filled from the across-day average");
  return CorrelationMatrix(m.symbols(), std::move(v), m.estimator(), m.support(), m.averaged());
}

inline void require_defined(const CorrelationMatrix& m, const std::string& stage) {
  for (std::size_t i = 0; i < m.size(); ++i)
    for (std::size_t j = i + 1; j < m.size(); ++j)
      if (is_missing(m(i, j)))
        throw insufficient_data(stage + ": no correlation estimate for " + m.symbols()[i] + "/" +
                                m.symbols()[j]);
}

inline double effective_penalty(const PipelineConfig& cfg, const DistanceMatrix& d) {
  return cfg.penalty_weight ? *cfg.penalty_weight : default_penalty_weight(d);
}

// Chain where each step may carry its own penalty weight.
inline std::vector<EmbeddingMap> chain_with_default_penalty(const std::vector<DistanceMatrix>& seq,
                                                            const PipelineConfig& cfg) {
  std::vector<EmbeddingMap> maps;
  for (std::size_t s = 0; s < seq.size(); ++s) {
    const double w = effective_penalty(cfg, seq[s]);
    maps.push_back(mds_embed(seq[s], cfg.schedule, s == 0 ? nullptr : &maps.back(), w, cfg.seed,
                             cfg.dimensions));
  }
  return maps;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Intraday pipeline
// ---------------------------------------------------------------------------

struct IntradayResult {
  BinGrid grid;
  std::vector<double> mean_dispersion;        // <sigma_d(k;t)>
  std::vector<double> mean_abs_index_return;  // <|mu_d(k;t)|>
  std::vector<double> average_volatility;     // [sigma_i(k)]
  std::vector<std::vector<double>> spectrum;  // per bin lambda_i/N, empty if skipped
  std::vector<double> avg_correlation;        // per bin, mean over days
  std::vector<double> avg_correlation_sd;     // per bin, across-day sd (empty if T = 1)
  std::vector<EmbeddingMap> maps_avg_corr;    // one per bin
  std::vector<EmbeddingMap> maps_avg_coords;  // one per bin (tick modes only)
  std::vector<double> mean_distance_avg_corr;
  std::vector<double> mean_distance_avg_coords;
  std::vector<std::string> diagnostics;
  std::vector<std::string> skipped;
};

// Distinct UTC dates carrying at least one tick inside the session window.
inline std::vector<Date> trading_days_of(const std::vector<TickSeries>& ticks,
                                         Duration session_start, Duration session_end) {
  std::set<Date> days;
  for (const auto& s : ticks)
    for (const auto& tk : s.ticks()) {
      const Date d = date_of(tk.time);
      const auto offset = tk.time - start_of_day(d);
      if (offset >= session_start && offset <= session_end) days.insert(d);
    }
  return {days.begin(), days.end()};
}

inline IntradayResult run_intraday_pipeline(const std::vector<TickSeries>& ticks,
                                            const PipelineConfig& cfg,
                                            ArtifactWriter* writer = nullptr) {
  cfg.validate();
  if (ticks.size() < 2) throw insufficient_data("intraday: need at least 2 symbols");
  IntradayResult res;
  auto days = trading_days_of(ticks, cfg.session_start, cfg.session_end);
  if (days.empty()) throw insufficient_data("intraday: no ticks inside the session window");
  res.grid = BinGrid(cfg.session_start, cfg.session_end, cfg.bin_width, std::move(days));
  const auto& grid = res.grid;
  const std::size_t K = grid.bins(), T = grid.days(), N = ticks.size();
  std::vector<std::string> bin_labels, day_labels;
  for (std::size_t k = 0; k < K; ++k) bin_labels.push_back(std::to_string(k));
  for (const auto& d : grid.trading_days()) day_labels.push_back(format_date(d));
  std::vector<std::string> symbols;
  for (const auto& s : ticks) symbols.push_back(s.symbol());

  // Binned returns, volatility and dispersion curves.
  const auto panel = bin_panel(ticks, grid);
  const auto moments = temporal_moments(panel);
  const auto disp = dispersion(panel);
  res.mean_dispersion = disp.mean_dispersion();
  res.mean_abs_index_return = disp.mean_abs_index_return();
  res.average_volatility = moments.average_volatility();
  if (writer) {
    writer->json_file("panel.json", "panel", panel_to_json(panel));
    writer->csv("dispersion.csv", "dispersion", [&](std::ostream& out) {
      out << "bin,sigma_d_mean,abs_mu_d_mean,sigma_mean\n";
      for (std::size_t k = 0; k < K; ++k)
        out << k << ',' << format_number(res.mean_dispersion[k]) << ','
            << format_number(res.mean_abs_index_return[k]) << ','
            << format_number(res.average_volatility[k]) << '\n';
    });
  }

  // Eigenvalue series over bins (correlations across days).
  Diagnostics spec_diag;
  const auto norm = normalize_panel(panel, disp, &spec_diag);
  if (T < 2) {
    res.skipped.push_back("spectrum: needs at least 2 trading days");
  } else {
    res.spectrum.assign(K, {});
    std::vector<std::string> bin_errors(K);
    parallel_for(
        K,
        [&](std::size_t k) {
          Diagnostics local;
          const auto c = binwise_correlation(norm, k, &local);
          if (c.has_undefined()) {
            bin_errors[k] = "spectrum: bin " + std::to_string(k) + " has undefined correlations";
            res.spectrum[k].assign(std::min<std::size_t>(7, N), kMissing);
            return;
          }
          const auto spec = eigendecompose(c);
          for (std::size_t i = 0; i < std::min<std::size_t>(7, N); ++i)
            res.spectrum[k].push_back(spec.eigenvalues[i] / static_cast<double>(N));
        },
        cfg.threads);
    std::size_t failed = 0;
    for (auto& e : bin_errors)
      if (!e.empty()) {
        res.diagnostics.push_back(e);
        ++failed;
      }
    if (failed == K) throw insufficient_data("spectrum: no bin has a fully defined correlation matrix");
    if (writer)
      writer->csv("spectrum.csv", "spectrum",
                  [&](std::ostream& out) { write_spectrum_csv(out, res.spectrum); });
  }
  for (auto& m : spec_diag.messages) res.diagnostics.push_back(m);

  // Correlation matrices per bin: per day (tick estimators) or across days.
  std::vector<CorrelationMatrix> per_bin(K);  // averaged over days
  std::vector<std::vector<CorrelationMatrix>> cells;  // [t][k], tick modes
  const Estimator est = cfg.resolved_estimator();
  if (cfg.mode == Mode::intraday_ticks) {
    cells.assign(T, std::vector<CorrelationMatrix>(K));
    std::vector<Diagnostics> cell_diag(T * K);
    parallel_for(
        T * K,
        [&](std::size_t c) {
          const std::size_t t = c / K, k = c % K;
          const Timestamp midnight = start_of_day(grid.trading_days()[t]);
          std::vector<TickSeries> slice;
          for (const auto& s : ticks)
            slice.push_back(detail::cell_ticks(s, grid.boundary(t, k), grid.boundary(t, k + 1),
                                               midnight));
          cells[t][k] = tick_correlation_matrix(slice, est, cfg.sample_interval, &cell_diag[c], 1);
        },
        cfg.threads);
    for (std::size_t c = 0; c < T * K; ++c)
      for (auto& m : cell_diag[c].messages)
        res.diagnostics.push_back(day_labels[c / K] + " bin " + std::to_string(c % K) + ": " + m);

    std::vector<std::vector<double>> daily_avg(K, std::vector<double>(T));
    for (std::size_t t = 0; t < T; ++t)
      for (std::size_t k = 0; k < K; ++k) daily_avg[k][t] = average_pairwise_correlation(cells[t][k]);
    for (std::size_t k = 0; k < K; ++k) {
      std::vector<CorrelationMatrix> column;
      for (std::size_t t = 0; t < T; ++t) column.push_back(cells[t][k]);
      per_bin[k] = average_correlations_across_days(column);
      double sum = 0.0;
      std::size_t n = 0;
      for (double v : daily_avg[k])
        if (!is_missing(v)) {
          sum += v;
          ++n;
        }
      res.avg_correlation.push_back(n ? sum / static_cast<double>(n) : kMissing);
      if (T >= 2) {
        double ss = 0.0;
        for (double v : daily_avg[k])
          if (!is_missing(v)) ss += (v - res.avg_correlation[k]) * (v - res.avg_correlation[k]);
        res.avg_correlation_sd.push_back(n >= 2 ? std::sqrt(ss / static_cast<double>(n - 1))
                                                : kMissing);
      }
    }
    if (writer) {
      for (std::size_t t = 0; t < T; ++t)
        for (std::size_t k = 0; k < K; ++k)
          writer->json_file("matrices/" + day_labels[t] + "/bin_" + detail::two_digit(k) + ".json",
                            "correlation", correlation_to_json(cells[t][k]));
      writer->csv("avg_correlation_by_day.csv", "avg-correlation-by-day", [&](std::ostream& out) {
        out << "bin";
        for (const auto& d : day_labels) out << ',' << d;
        out << '\n';
        for (std::size_t k = 0; k < K; ++k) {
          out << k;
          for (double v : daily_avg[k]) out << ',' << format_number(v);
          out << '\n';
        }
      });
    }
  } else {
    for (std::size_t k = 0; k < K; ++k) {
      if (T < 2) throw insufficient_data("intraday-binned: correlations across days need T >= 2");
      Diagnostics local;
      per_bin[k] = binwise_correlation(norm, k, &local);
      for (auto& m : local.messages) res.diagnostics.push_back(m);
      res.avg_correlation.push_back(average_pairwise_correlation(per_bin[k]));
    }
  }
  if (writer) {
    writer->csv("avg_correlation.csv", "avg-correlation", [&](std::ostream& out) {
      if (res.avg_correlation_sd.empty()) {
        out << "bin,mean\n";
        for (std::size_t k = 0; k < K; ++k) out << k << ',' << format_number(res.avg_correlation[k]) << '\n';
        return;
      }
      out << "bin,mean,std,lower,upper\n";
      for (std::size_t k = 0; k < K; ++k) {
        const double m = res.avg_correlation[k], s = res.avg_correlation_sd[k];
        out << k << ',' << format_number(m) << ',' << format_number(s) << ','
            << format_number(m - s) << ',' << format_number(m + s) << '\n';
      }
    });
    for (std::size_t k = 0; k < K; ++k)
      writer->json_file("matrices/averaged/bin_" + detail::two_digit(k) + ".json", "correlation",
                        correlation_to_json(per_bin[k]));
  }

  // MDS, choice (ii): one map per bin from correlations averaged over days,
  // warm-started along the bins.
  std::vector<DistanceMatrix> avg_dist;
  for (std::size_t k = 0; k < K; ++k) {
    const std::string stage = "mds avg-corr bin " + std::to_string(k);
    detail::require_defined(per_bin[k], stage);
    avg_dist.push_back(to_distance(detail::maybe_clean(per_bin[k], cfg.clean)));
  }
  res.maps_avg_corr = detail::chain_with_default_penalty(avg_dist, cfg);
  for (const auto& m : res.maps_avg_corr) res.mean_distance_avg_corr.push_back(mean_distance_from_center(m));
  std::vector<std::string> bin_names;
  for (std::size_t k = 0; k < K; ++k) bin_names.push_back("bin_" + detail::two_digit(k));
  if (writer) {
    writer->chain("maps/avg_corr", bin_names, res.maps_avg_corr);
    writer->series("mean_distance_avg_corr.csv", "mean-distance", "bin", bin_labels,
                   res.mean_distance_avg_corr);
  }

  // MDS, choice (i): a map for every (day, bin), one warm-started chain in
  // time order, coordinates averaged over days per bin.
  if (cfg.mode == Mode::intraday_ticks) {
    std::vector<DistanceMatrix> seq;
    for (std::size_t t = 0; t < T; ++t)
      for (std::size_t k = 0; k < K; ++k) {
        const std::string stage = "mds " + day_labels[t] + " bin " + std::to_string(k);
        const auto filled = detail::fill_undefined(cells[t][k], per_bin[k], stage, res.diagnostics);
        seq.push_back(to_distance(detail::maybe_clean(filled, cfg.clean)));
      }
    const auto maps = detail::chain_with_default_penalty(seq, cfg);
    for (std::size_t k = 0; k < K; ++k) {
      std::vector<EmbeddingMap> column;
      for (std::size_t t = 0; t < T; ++t) column.push_back(maps[t * K + k]);
      res.maps_avg_coords.push_back(average_coords_across_days(column));
      res.mean_distance_avg_coords.push_back(mean_distance_from_center(res.maps_avg_coords.back()));
    }
    if (writer) {
      writer->chain("maps/avg_coords", bin_names, res.maps_avg_coords);
      writer->series("mean_distance_avg_coords.csv", "mean-distance", "bin", bin_labels,
                     res.mean_distance_avg_coords);
    }
  } else {
    res.skipped.push_back("mds avg-coords: needs per-day matrices (intraday-ticks mode)");
  }

  if (writer) writer->manifest(cfg.to_json(), res.diagnostics, res.skipped);
  return res;
}

// ---------------------------------------------------------------------------
// Daily pipeline
// ---------------------------------------------------------------------------

struct DailyWindow {
  Date start;  // date of the first return in the window
  Date end;    // date of the last return in the window
  CorrelationMatrix correlation;
  DistanceMatrix distance;
  EmbeddingMap map;
  double mean_distance = 0.0;
};

struct DailyResult {
  std::vector<DailyWindow> windows;
  std::vector<std::string> diagnostics;
  std::vector<std::string> skipped;
};

inline DailyResult run_daily_pipeline(const DailyPrices& prices, const PipelineConfig& cfg,
                                      ArtifactWriter* writer = nullptr) {
  cfg.validate();
  if (prices.symbols.size() < 2) throw insufficient_data("daily: need at least 2 symbols");
  const auto returns = prices.log_returns();
  const std::size_t total = prices.dates.size() < 2 ? 0 : prices.dates.size() - 1;
  const WindowSpec spec(cfg.window, cfg.resolved_step());
  const std::size_t windows = spec.count(total);
  if (windows == 0)
    throw insufficient_data("daily: " + std::to_string(total) + " returns, window needs " +
                            std::to_string(cfg.window));

  DailyResult res;
  const EmbeddingMap* previous = nullptr;
  for (std::size_t w = 0; w < windows; ++w) {
    const std::size_t begin = w * spec.step;
    const std::string label = "window " + std::to_string(w);
    std::vector<std::size_t> keep;
    std::vector<std::string> dropped;
    for (std::size_t i = 0; i < prices.symbols.size(); ++i) {
      bool complete = true;
      for (std::size_t d = begin; d < begin + spec.width; ++d)
        if (is_missing(returns[i][d])) complete = false;
      if (complete) keep.push_back(i);
      else dropped.push_back(prices.symbols[i]);
    }
    if (!dropped.empty()) {
      std::string names;
      for (const auto& s : dropped) names += (names.empty() ? "" : " ") + s;
      if (cfg.missing == MissingPolicy::skip_window) {
        res.skipped.push_back(label + ": skipped, missing data for " + names);
        continue;
      }
      res.diagnostics.push_back(label + ": dropped " + names);
    }
    if (keep.size() < 2) {
      res.skipped.push_back(label + ": fewer than 2 complete symbols");
      continue;
    }
    std::vector<std::vector<double>> slice;
    std::vector<std::string> symbols;
    for (std::size_t i : keep) {
      symbols.push_back(prices.symbols[i]);
      slice.emplace_back(returns[i].begin() + static_cast<std::ptrdiff_t>(begin),
                         returns[i].begin() + static_cast<std::ptrdiff_t>(begin + spec.width));
    }
    Diagnostics local;
    auto corr = pearson_windowed(slice, symbols, WindowSpec(spec.width, spec.width), &local).front();
    for (auto& m : local.messages) res.diagnostics.push_back(label + ": " + m);
    detail::require_defined(corr, label);
    if (cfg.clean)
      corr = clean_spectrum(eigendecompose(corr), static_cast<double>(symbols.size()) /
                                                      static_cast<double>(spec.width));
    auto dist = to_distance(corr);
    const EmbeddingMap* init = (previous && previous->symbols == symbols) ? previous : nullptr;
    if (previous && !init) res.diagnostics.push_back(label + ": symbol set changed, cold start");
    auto map = mds_embed(dist, cfg.schedule, init, detail::effective_penalty(cfg, dist), cfg.seed,
                         cfg.dimensions);
    DailyWindow win{prices.dates[begin + 1], prices.dates[begin + spec.width], std::move(corr),
                    std::move(dist), std::move(map), 0.0};
    win.mean_distance = mean_distance_from_center(win.map);
    res.windows.push_back(std::move(win));
    previous = &res.windows.back().map;
  }
  if (res.windows.empty()) throw insufficient_data("daily: every window was skipped");

  if (writer) {
    std::vector<std::string> labels, names;
    std::vector<double> md;
    std::vector<EmbeddingMap> maps;
    for (std::size_t w = 0; w < res.windows.size(); ++w) {
      const auto& win = res.windows[w];
      const std::string dir = "windows/" + format_date(win.end);
      writer->json_file(dir + "/correlation.json", "correlation", correlation_to_json(win.correlation));
      writer->csv(dir + "/correlation.csv", "correlation-csv", [&](std::ostream& out) {
        write_matrix_csv(out, win.correlation.symbols(), win.correlation.values());
      });
      writer->json_file(dir + "/distance.json", "distance", distance_to_json(win.distance));
      labels.push_back(format_date(win.end));
      md.push_back(win.mean_distance);
      names.push_back(format_date(win.end));
      maps.push_back(win.map);
    }
    writer->chain("maps", names, maps);
    writer->series("mean_distance.csv", "mean-distance", "date", labels, md);
    writer->manifest(cfg.to_json(), res.diagnostics, res.skipped);
  }
  return res;
}

}  // namespace corrmap

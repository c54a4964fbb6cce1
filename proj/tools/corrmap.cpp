// corrmap: correlation structure, spectra and MDS maps from tick or daily data.

#include <CLI11.hpp>

#include <charconv>
#include <chrono>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "corrmap/corrmap.hpp"

namespace {

using namespace corrmap;

// "300", "300s", "5m", "1h" -> duration
Duration parse_duration(const std::string& s) {
  if (s.empty()) throw validation_error("empty duration");
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    throw validation_error("cannot parse duration '" + s + "'");
  }
  const std::string unit = s.substr(used);
  double factor = 1.0;
  if (unit == "m" || unit == "min") factor = 60.0;
  else if (unit == "h") factor = 3600.0;
  else if (!unit.empty() && unit != "s") throw validation_error("unknown duration unit in '" + s + "'");
  if (!(v > 0.0)) throw validation_error("duration must be positive: '" + s + "'");
  return seconds_to_duration(v * factor);
}

std::vector<double> parse_list(const std::string& s) {
  std::vector<double> out;
  for (auto field : detail::split_csv(s)) {
    field = detail::trim(field);
    double v = 0.0;
    const auto res = std::from_chars(field.data(), field.data() + field.size(), v);
    if (res.ec != std::errc{} || res.ptr != field.data() + field.size())
      throw validation_error("cannot parse number '" + std::string(field) + "'");
    out.push_back(v);
  }
  return out;
}

std::vector<TickSeries> read_tick_inputs(const std::vector<std::string>& paths) {
  std::map<std::string, TickSeries> merged;
  for (const auto& p : paths)
    for (auto& s : read_ticks_csv(p)) {
      const std::string name = s.symbol();
      if (!merged.emplace(name, std::move(s)).second)
        throw validation_error(p + ": symbol " + name + " already read from another file");
    }
  std::vector<TickSeries> out;
  for (auto& [_, s] : merged) out.push_back(std::move(s));
  return out;
}

struct RunOptions {
  std::string config_file;
  std::string mode, bin_width, session, estimator, sample_interval, missing, out;
  std::vector<std::string> inputs;
  std::size_t window = 0, step = 0, dimensions = 0;
  bool clean = false, no_clean = false;
  std::uint64_t seed = 0;
  double penalty = -1.0;
  double initial_temperature = -1.0, cooling = -1.0, min_temperature = -1.0, proposal = -1.0;
  std::size_t steps_per_temperature = 0;
  unsigned threads = 0;
};

PipelineConfig build_config(const RunOptions& o, const CLI::App& run) {
  PipelineConfig cfg;
  if (!o.config_file.empty()) {
    std::ifstream in(o.config_file);
    if (!in) throw validation_error("cannot open config " + o.config_file);
    json j;
    try {
      j = json::parse(in);
    } catch (const json::parse_error& e) {
      throw validation_error(o.config_file + ": " + e.what());
    }
    apply_config_json(cfg, j);
  }
  auto given = [&](const char* name) { return run.count(name) > 0; };
  if (given("--mode")) cfg.mode = mode_from_string(o.mode);
  if (given("--input")) cfg.inputs = o.inputs;
  if (given("--bin-width")) cfg.bin_width = parse_duration(o.bin_width);
  if (given("--session")) std::tie(cfg.session_start, cfg.session_end) = parse_session(o.session);
  if (given("--window")) cfg.window = o.window;
  if (given("--step")) cfg.step = o.step;
  if (given("--estimator")) cfg.estimator = estimator_from_string(o.estimator);
  if (given("--sample-interval")) cfg.sample_interval = parse_duration(o.sample_interval);
  if (o.clean) cfg.clean = true;
  if (o.no_clean) cfg.clean = false;
  if (given("--seed")) cfg.seed = o.seed;
  if (given("--out")) cfg.output_dir = o.out;
  if (given("--penalty-weight")) cfg.penalty_weight = o.penalty;
  if (given("--dimensions")) cfg.dimensions = o.dimensions;
  if (given("--threads")) cfg.threads = std::max(1u, o.threads);
  if (given("--missing")) {
    if (o.missing == "drop-symbols") cfg.missing = MissingPolicy::drop_symbols;
    else if (o.missing == "skip-window") cfg.missing = MissingPolicy::skip_window;
    else throw validation_error("--missing must be drop-symbols or skip-window");
  }
  if (given("--initial-temperature")) cfg.schedule.initial_temperature = o.initial_temperature;
  if (given("--cooling")) cfg.schedule.cooling_factor = o.cooling;
  if (given("--min-temperature")) cfg.schedule.min_temperature = o.min_temperature;
  if (given("--proposal-scale")) cfg.schedule.proposal_scale = o.proposal;
  if (given("--steps-per-temperature")) cfg.schedule.steps_per_temperature = o.steps_per_temperature;
  if (cfg.inputs.empty()) throw validation_error("no input files (use --input or the config)");
  cfg.validate();
  return cfg;
}

int run_pipeline(const PipelineConfig& cfg) {
  ArtifactWriter writer(cfg.output_dir, Provenance{cfg.hash(), cfg.seed});
  std::size_t notes = 0;
  if (cfg.mode == Mode::daily) {
    if (cfg.inputs.size() != 1) throw validation_error("daily mode takes exactly one input file");
    const auto res = run_daily_pipeline(read_daily_csv(cfg.inputs.front()), cfg, &writer);
    std::cout << res.windows.size() << " window(s) written to " << cfg.output_dir << '\n';
    notes = res.diagnostics.size() + res.skipped.size();
  } else {
    const auto res = run_intraday_pipeline(read_tick_inputs(cfg.inputs), cfg, &writer);
    std::cout << res.grid.days() << " day(s) x " << res.grid.bins() << " bin(s) written to "
              << cfg.output_dir << '\n';
    notes = res.diagnostics.size() + res.skipped.size();
  }
  if (notes) std::cout << notes << " diagnostic(s), see manifest.json\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"corrmap: correlation spectra and MDS maps of asset returns"};
  app.require_subcommand(1);

  RunOptions ro;
  auto* run = app.add_subcommand("run", "run the intraday or daily pipeline");
  run->add_option("--config", ro.config_file, "JSON config file; flags override it");
  run->add_option("--mode", ro.mode, "intraday-ticks, intraday-binned or daily");
  run->add_option("--input", ro.inputs, "tick CSV(s) or one daily CSV");
  run->add_option("--bin-width", ro.bin_width, "bin width, e.g. 5m or 300");
  run->add_option("--session", ro.session, "session window, e.g. 10:00-16:00");
  run->add_option("--window", ro.window, "daily window length in trading days");
  run->add_option("--step", ro.step, "daily window step (default: window)");
  run->add_option("--estimator", ro.estimator,
                  "hayashi-yoshida, realized, pearson-binned or pearson-daily");
  run->add_option("--sample-interval", ro.sample_interval, "grid for the realized estimator");
  run->add_flag("--clean", ro.clean, "Marchenko-Pastur cleaning before embedding");
  run->add_flag("--no-clean", ro.no_clean);
  run->add_option("--seed", ro.seed);
  run->add_option("--out", ro.out, "output directory");
  run->add_option("--missing", ro.missing, "drop-symbols (default) or skip-window");
  run->add_option("--penalty-weight", ro.penalty, "warm-start penalty (default: scale-aware)");
  run->add_option("--dimensions", ro.dimensions, "embedding dimension");
  run->add_option("--threads", ro.threads);
  run->add_option("--initial-temperature", ro.initial_temperature);
  run->add_option("--cooling", ro.cooling);
  run->add_option("--min-temperature", ro.min_temperature);
  run->add_option("--proposal-scale", ro.proposal);
  run->add_option("--steps-per-temperature", ro.steps_per_temperature);

  std::size_t n_symbols = 10, n_days = 5;
  std::string rho_text = "0.5", tick_bin = "30m", tick_session = "10:00-16:00", out_file;
  std::string first_day = "2011-03-01";
  double rate = 0.1, vol = 1e-4;
  std::uint64_t synth_seed = 1;
  auto* ticks = app.add_subcommand("synth-ticks", "simulate correlated asynchronous ticks");
  ticks->add_option("--symbols", n_symbols, "number of assets");
  ticks->add_option("--days", n_days, "number of trading days");
  ticks->add_option("--bin-width", tick_bin);
  ticks->add_option("--session", tick_session);
  ticks->add_option("--rho", rho_text, "one correlation, or one per bin (comma separated)");
  ticks->add_option("--rate", rate, "Poisson observation rate per second");
  ticks->add_option("--volatility", vol, "per sqrt(second)");
  ticks->add_option("--first-day", first_day);
  ticks->add_option("--seed", synth_seed);
  ticks->add_option("--out", out_file, "output CSV")->required();

  std::size_t d_symbols = 20, d_days = 1000, switch_day = 500;
  double rho_before = 0.2, rho_after = 0.8, d_vol = 0.01;
  std::uint64_t d_seed = 1;
  std::string d_out, d_first = "2000-01-01";
  auto* daily = app.add_subcommand("synth-daily", "simulate daily closes with a correlation switch");
  daily->add_option("--symbols", d_symbols);
  daily->add_option("--days", d_days, "number of returns");
  daily->add_option("--switch-day", switch_day, "first return with the second correlation");
  daily->add_option("--rho-before", rho_before);
  daily->add_option("--rho-after", rho_after);
  daily->add_option("--volatility", d_vol, "daily return volatility");
  daily->add_option("--first-day", d_first);
  daily->add_option("--seed", d_seed);
  daily->add_option("--out", d_out, "output CSV")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    if (*run) return run_pipeline(build_config(ro, *run));

    if (*ticks) {
      const auto [s0, s1] = parse_session(tick_session);
      BinGrid grid(s0, s1, parse_duration(tick_bin),
                   consecutive_days(parse_date(first_day), n_days));
      auto rho = parse_list(rho_text);
      if (rho.size() == 1) rho.assign(grid.bins(), rho.front());
      IntradaySynthSpec spec{default_symbols(n_symbols), grid, rho, vol, rate, 100.0, synth_seed};
      std::ofstream out(out_file);
      if (!out) throw validation_error("cannot write " + out_file);
      write_ticks_csv(out, simulate_intraday_ticks(spec));
      return 0;
    }

    if (*daily) {
      if (switch_day > d_days) throw validation_error("--switch-day beyond --days");
      std::vector<double> rho(d_days, rho_before);
      for (std::size_t t = switch_day; t < d_days; ++t) rho[t] = rho_after;
      const auto returns = simulate_daily_returns(d_symbols, rho, d_vol, d_seed);
      const auto prices = prices_from_returns(default_symbols(d_symbols),
                                              consecutive_days(parse_date(d_first), d_days + 1),
                                              returns);
      std::ofstream out(d_out);
      if (!out) throw validation_error("cannot write " + d_out);
      write_daily_csv(out, prices);
      return 0;
    }
  } catch (const validation_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const insufficient_data& e) {
    std::cerr << "insufficient data: " << e.what() << '\n';
    return 2;
  } catch (const numerical_error& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return 3;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "error: config: " << e.what() << '\n';
    return 1;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

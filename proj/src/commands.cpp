#include "remest/commands.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>

#include "remest/bounds.hpp"
#include "remest/config.hpp"
#include "remest/cycle.hpp"
#include "remest/parallel.hpp"
#include "remest/region.hpp"
#include "remest/simulation.hpp"

namespace remest {
namespace {

using nlohmann::json;

constexpr double kAgreementGap = 0.05;

class OutputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Reports carry 12 significant digits; non-finite values become strings.
json num(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.12g", x);
  return std::strtod(buf, nullptr);
}

json nums(const Vector& v) {
  json out = json::array();
  for (double x : v) out.push_back(num(x));
  return out;
}

json one_based(const std::vector<std::size_t>& idx) {
  json out = json::array();
  for (std::size_t i : idx) out.push_back(i + 1);
  return out;
}

void emit(const CommandOptions& options, const std::string& text, std::ostream& out) {
  if (options.out_path.empty()) {
    out << text;
    return;
  }
  std::ofstream file(options.out_path, std::ios::binary | std::ios::trunc);
  if (!file) throw OutputError("cannot write output file " + options.out_path);
  file << text;
  if (!file.flush()) throw OutputError("cannot write output file " + options.out_path);
}

void emit_json(const CommandOptions& options, const json& doc, std::ostream& out) {
  emit(options, doc.dump(2) + "\n", out);
}

ExperimentConfig load(const CommandOptions& options) {
  if (options.config_path.empty()) throw ConfigError("--config", "a config file is required");
  ExperimentConfig c = load_config(options.config_path);
  if (options.tol) {
    if (!(*options.tol > 0.0)) throw ConfigError("--tol", "expected a positive number");
    c.tolerances.iteration = *options.tol;
  }
  if (!options.seeds.empty()) c.simulation.seeds = options.seeds;
  return c;
}

void require_format(const CommandOptions& options, std::initializer_list<const char*> allowed) {
  if (options.format.empty()) return;
  for (const char* f : allowed)
    if (options.format == f) return;
  throw ConfigError("--format", "format '" + options.format + "' is not supported by this command");
}

// Runs a command body, mapping exceptions onto the exit-code contract.
template <class Body>
int guarded(std::ostream& err, Body body) {
  try {
    return body();
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
  }
  return kExitInputError;
}

json mse_json(const MseResult& m) {
  json j;
  j["J"] = num(m.value);
  j["expected_cycle_length"] = num(m.expected_length);
  j["expected_cycle_cost"] = num(m.expected_cost);
  j["series_terms"] = m.terms;
  j["tail_bound"] = num(m.tail_bound);
  j["uncertain"] = m.uncertain;
  return j;
}

json stability_json(const StabilityReport& r) {
  json j;
  j["rho_A"] = num(r.rho_a);
  j["sigma_A"] = num(r.sigma_a);
  j["rho_DM"] = num(r.rho_dm);
  j["margin"] = num(r.margin);
  j["stable"] = r.stable;
  j["max_expected_drop"] = num(r.max_expected_drop);
  j["margin_sufficient"] = num(r.margin_sufficient);
  j["stable_sufficient"] = r.stable_sufficient;
  return j;
}

json fit_json(const EnvelopeFit& f) {
  json j;
  j["applicable"] = f.applicable;
  j["pass"] = f.pass;
  if (!f.note.empty()) j["note"] = f.note;
  if (!f.applicable) return j;
  j["base"] = num(f.base);
  j["reference"] = num(f.reference);
  j["constant"] = num(f.constant);
  j["burn_in"] = f.burn_in;
  j["period"] = f.period;
  if (f.row > 0) j["witness"] = {f.row, f.col};
  j["verified"] = f.verified;
  j["power_agreement"] = num(f.power_agreement);
  return j;
}

json run_json(const RunResult& r) {
  json j;
  j["seed"] = r.seed;
  j["steps"] = r.steps;
  j["saturated"] = r.saturated;
  j["J"] = r.saturated ? json("unbounded") : num(r.empirical_J);
  j["J_sq_err"] = r.saturated ? json("unbounded") : num(r.empirical_J_sq_err);
  j["cycles"] = r.cycles;
  j["prefix_length"] = r.prefix_length;
  j["trailing_length"] = r.trailing_length;
  return j;
}

}  // namespace

int cmd_stability(const CommandOptions& options, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    require_format(options, {"json"});
    const ExperimentConfig c = load(options);
    const double tol = c.tolerances.iteration;
    const SystemValidation sv = validate(c.system, c.tolerances.rank);
    const ChannelValidation cv = validate(c.channel);
    StabilityReport report = stability_margin(c.system.A, c.channel, tol);

    json doc = stability_json(report);
    if (!c.name.empty()) doc["name"] = c.name;
    doc["system"] = {{"observability_rank", sv.observability_rank},
                     {"controllability_rank", sv.controllability_rank},
                     {"observable", sv.observable},
                     {"controllable", sv.controllable}};
    json ch = {{"dropout", nums(c.channel.dropout)}, {"ergodic", cv.ergodic}};
    ch["stationary"] = nums(stationary_distribution(c.channel));
    const bool any_success =
        std::any_of(c.channel.dropout.begin(), c.channel.dropout.end(), [](double d) { return d < 1.0; });
    if (any_success) ch["post_success_states"] = one_based(post_success_set(c.channel).indices);
    doc["channel"] = ch;

    if (report.stable && sv.ok()) {
      const SteadyStateFilter filter = riccati_steady_state(c.system, c.tolerances.riccati);
      doc["filter"] = {{"trace_P", num(filter.covariance.trace())}, {"iterations", filter.iterations}};
      ErrorTraceSequence traces(c.system, filter.covariance);
      doc["mse"] = mse_json(analytic_mse(report, traces, c.channel, tol));
      doc["J"] = doc["mse"]["J"];
    } else if (report.stable) {
      doc["J"] = nullptr;
      doc["note"] = "J needs an observable and controllable system";
    } else {
      doc["J"] = "unbounded";
    }
    emit_json(options, doc, out);
    return report.stable ? kExitOk : kExitFailed;
  });
}

int cmd_region(const CommandOptions& options, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    require_format(options, {"csv", "svg", "json"});
    const ExperimentConfig c = load(options);
    if (!c.scan) throw ConfigError("scan", "missing field (region needs a scan block)");
    std::optional<SteadyStateFilter> filter;
    if (c.scan->mse) filter = riccati_steady_state(c.system, c.tolerances.riccati);
    ScanOptions so;
    so.compute_mse = c.scan->mse;
    so.tol = c.tolerances.iteration;
    so.workers = worker_count();
    const RegionScan scan =
        region_scan(c.system, filter ? &*filter : nullptr, c.channel, c.scan->axes, c.scan->resolution, so);
    const std::string format = options.format.empty() ? "csv" : options.format;
    if (format == "csv") {
      emit(options, region_csv(scan), out);
    } else if (format == "svg") {
      emit(options, region_svg(scan), out);
    } else {
      json doc;
      doc["cells"] = scan.cells.size();
      doc["stable_cells"] = scan.stable_count();
      doc["stable_sufficient_cells"] = scan.sufficient_count();
      doc["containment_violations"] = scan.containment_violations();
      emit_json(options, doc, out);
    }
    return kExitOk;
  });
}

int cmd_mse(const CommandOptions& options, MseMode mode, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    require_format(options, {"json", "csv"});
    const bool csv = options.format == "csv";
    if (csv && mode == MseMode::kAnalytic) throw ConfigError("--format", "csv output needs --simulate or --both");
    ExperimentConfig c = load(options);
    const double tol = c.tolerances.iteration;
    const SteadyStateFilter filter = riccati_steady_state(c.system, c.tolerances.riccati);
    json doc;
    if (!c.name.empty()) doc["name"] = c.name;
    int code = kExitOk;

    std::optional<double> analytic;
    if (mode != MseMode::kSimulate) {
      StabilityReport report = stability_margin(c.system.A, c.channel, tol);
      json a = stability_json(report);
      if (report.stable) {
        ErrorTraceSequence traces(c.system, filter.covariance);
        const MseResult m = analytic_mse(report, traces, c.channel, tol);
        a.update(mse_json(m));
        analytic = m.value;
      } else {
        a["J"] = "unbounded";
        code = kExitFailed;
      }
      doc["analytic"] = a;
    }

    std::vector<RunResult> runs;
    if (mode != MseMode::kAnalytic) {
      if (csv) c.simulation.record_trajectory = true;
      runs = simulate(c.system, filter, c.channel, c.simulation);
      json s;
      s["mode"] = to_string(c.simulation.mode);
      s["horizon"] = c.simulation.horizon;
      json list = json::array();
      for (const RunResult& r : runs) list.push_back(run_json(r));
      s["runs"] = list;
      const bool all_saturated = std::all_of(runs.begin(), runs.end(), [](const RunResult& r) { return r.saturated; });
      std::optional<double> simulated;
      if (all_saturated) {
        s["J"] = "unbounded";
        s["note"] = "every run saturated";
        code = kExitFailed;
      } else if (runs.size() >= 2) {
        const EnsembleSummary e = ensemble(runs, c.channel);
        s["J"] = num(e.mean_J);
        s["standard_error"] = num(e.standard_error);
        s["ci95"] = {num(e.ci_low), num(e.ci_high)};
        s["J_sq_err"] = num(e.mean_J_sq_err);
        s["saturated_runs"] = e.saturated_runs;
        s["cycles"] = e.total_cycles;
        s["tv_post_success"] = num(e.tv_post_success);
        s["tv_cycle_length"] = num(e.tv_cycle_length);
        simulated = e.mean_J;
      } else {
        s["J"] = num(runs.front().empirical_J);
        s["J_sq_err"] = num(runs.front().empirical_J_sq_err);
        simulated = runs.front().empirical_J;
      }
      doc["simulation"] = s;
      if (mode == MseMode::kBoth) {
        if (analytic && simulated) {
          const double gap = std::abs(*analytic - *simulated) / *analytic;
          doc["relative_gap"] = num(gap);
          doc["agreement"] = gap < kAgreementGap;
          if (!(gap < kAgreementGap)) code = kExitFailed;
        } else {
          doc["agreement"] = false;
          code = kExitFailed;
        }
      }
    }
    if (csv) emit(options, trajectory_csv(runs.front()), out);
    else emit_json(options, doc, out);
    return code;
  });
}

int cmd_bounds(const CommandOptions& options, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    require_format(options, {"json"});
    const ExperimentConfig c = load(options);
    const IndexRange range = c.bounds.range;
    const Matrix& a = c.system.A;
    const SteadyStateFilter filter = riccati_steady_state(c.system, c.tolerances.riccati);
    const double rho = spectral_radius(a, c.tolerances.iteration).value;
    const double trace_eps = c.bounds.trace_epsilon.value_or(0.05 * rho * rho);

    bool pass = true;
    auto tally = [&pass](const EnvelopeFit& f) {
      if (f.applicable && !f.pass) pass = false;
      return fit_json(f);
    };
    json doc;
    if (!c.name.empty()) doc["name"] = c.name;
    doc["range"] = {range.first, range.last};
    doc["upper_bound_A"] = tally(check_upper_bound(a, c.bounds.epsilon, range));
    doc["periodic_lower_bound_A"] = tally(check_periodic_lower_bound(a, range));
    doc["lower_bound_A_sqrtW"] = tally(check_lower_bound_with_Q(a, c.system.W, range));

    const DmPropertiesReport dm = check_dm_properties(c.channel, range);
    json d;
    d["applicable"] = dm.applicable;
    if (!dm.note.empty()) d["note"] = dm.note;
    if (dm.applicable) {
      d["rho_DM"] = num(dm.rho_dm);
      d["rho_below_one"] = dm.rho_below_one;
      d["part"] = dm.part;
      d["zero_dropout_states"] = one_based(dm.zero_dropout_states);
      json pf = json::array(), qf = json::array();
      for (const EnvelopeFit& f : dm.power_fits) pf.push_back(fit_json(f));
      for (const EnvelopeFit& f : dm.product_fits) qf.push_back(fit_json(f));
      d["power_fits"] = pf;
      d["product_fits"] = qf;
      d["pass"] = dm.pass;
      if (!dm.pass) pass = false;
    }
    doc["dm_properties"] = d;

    const TraceEnvelopeReport ce = check_c_envelopes(c.system, filter, trace_eps, range);
    doc["c_envelopes"] = {{"epsilon", num(trace_eps)}, {"upper", fit_json(ce.upper)}, {"lower", fit_json(ce.lower)},
                          {"pass", ce.pass}};
    if (!ce.pass) pass = false;
    doc["pass"] = pass;
    emit_json(options, doc, out);
    return pass ? kExitOk : kExitFailed;
  });
}

int cmd_channel_from_snr(const std::vector<double>& gains, int blocklength, double rate,
                         const CommandOptions& options, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    require_format(options, {"json"});
    if (gains.empty()) throw ConfigError("--gains", "at least one gain is required");
    for (double g : gains)
      if (!(g > 0.0) || !std::isfinite(g)) throw ConfigError("--gains", "gains must be positive");
    if (blocklength < 1) throw ConfigError("--blocklength", "expected a positive integer");
    if (!(rate >= 0.0) || !std::isfinite(rate)) throw ConfigError("--rate", "expected a nonnegative number");
    Vector d;
    for (double g : gains) d.push_back(dropout_from_snr(g, blocklength, rate));
    json doc = {{"gains", nums(gains)}, {"blocklength", blocklength}, {"rate", num(rate)}, {"dropout", nums(d)}};
    emit_json(options, doc, out);
    return kExitOk;
  });
}

int cmd_echo(const CommandOptions& options, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    require_format(options, {"json"});
    emit_json(options, to_json(load(options)), out);
    return kExitOk;
  });
}

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Remote estimation over Markov fading channels: stability, MSE, bounds"};
  app.fallthrough();
  app.require_subcommand(0, 1);
  CommandOptions options;
  bool echo = false;
  app.add_option("--config", options.config_path, "Experiment config (JSON)");
  app.add_option("--seed", options.seeds, "Comma-separated seeds, overriding the config")->delimiter(',');
  app.add_option("--out", options.out_path, "Output file (default: stdout)");
  app.add_option("--format", options.format, "Output format")->check(CLI::IsMember({"csv", "json", "svg"}));
  app.add_option("--tol", options.tol, "Iteration tolerance");
  app.add_flag("--echo", echo, "Print the parsed config as JSON and exit");

  auto* stability = app.add_subcommand("stability", "Stability margins and J");
  auto* region = app.add_subcommand("region", "Stability-region scan over dropout probabilities");
  auto* mse = app.add_subcommand("mse", "Average estimation MSE, analytic and simulated");
  bool analytic = false, simulate_flag = false, both = false;
  auto* o1 = mse->add_flag("--analytic", analytic, "Cycle-series J");
  auto* o2 = mse->add_flag("--simulate", simulate_flag, "Monte Carlo J");
  auto* o3 = mse->add_flag("--both", both, "Both, with the agreement check");
  o1->excludes(o2)->excludes(o3);
  o2->excludes(o3);
  auto* bounds = app.add_subcommand("bounds", "Matrix-power and c(i) envelope checks");
  auto* snr = app.add_subcommand("channel-from-snr", "Dropout probabilities from per-state SNR");
  std::vector<double> gains;
  int blocklength = 0;
  double rate = 0.0;
  snr->add_option("--gains", gains, "Per-state SNR (linear), comma-separated")->delimiter(',');
  snr->add_option("--blocklength", blocklength, "Blocklength in channel uses");
  snr->add_option("--rate", rate, "Rate in bits per channel use");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kExitInputError;
  }

  if (echo) return cmd_echo(options, out, err);
  if (*stability) return cmd_stability(options, out, err);
  if (*region) return cmd_region(options, out, err);
  if (*mse) {
    const MseMode m = both ? MseMode::kBoth : simulate_flag ? MseMode::kSimulate : MseMode::kAnalytic;
    return cmd_mse(options, m, out, err);
  }
  if (*bounds) return cmd_bounds(options, out, err);
  if (*snr) {
    if (gains.empty() && !options.config_path.empty()) {
      return guarded(err, [&] {
        const ExperimentConfig c = load(options);
        if (!c.snr) throw ConfigError("channel.snr", "missing field (give --gains or a config with an snr block)");
        return cmd_channel_from_snr(c.snr->gains, c.snr->blocklength, c.snr->rate, options, out, err);
      });
    }
    return cmd_channel_from_snr(gains, blocklength, rate, options, out, err);
  }
  err << app.help();
  return kExitInputError;
}

}  // namespace remest

// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "remest/bounds.hpp"
#include "remest/config.hpp"
#include "remest/cycle.hpp"
#include "remest/linalg.hpp"
#include "remest/parallel.hpp"
#include "remest/region.hpp"
#include "remest/simulation.hpp"

using namespace remest;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string data(const std::string& name) { return std::string(REMEST_DATA_DIR) + "/" + name; }

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

Matrix random_stochastic(std::size_t m, std::mt19937_64& gen, double sparsity = 0.0) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Matrix p(m, m);
  for (std::size_t i = 0; i < m; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
      p(i, j) = (u(gen) < sparsity && j != (i + 1) % m) ? 0.0 : 0.05 + u(gen);
      s += p(i, j);
    }
    for (std::size_t j = 0; j < m; ++j) p(i, j) /= s;
  }
  return p;
}

Matrix random_matrix(std::size_t n, std::mt19937_64& gen) {
  std::normal_distribution<double> z(0.0, 1.0);
  Matrix a(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) a(i, j) = z(gen);
  return a;
}

double mean_J(const std::vector<RunResult>& runs) {
  double s = 0.0;
  for (const RunResult& r : runs) s += r.empirical_J;
  return s / static_cast<double>(runs.size());
}

Outcome pendubot_spectra() {
  const ExperimentConfig c = load_config(data("pendubot_default.json"));
  const double rho = spectral_radius(c.system.A).value;
  const double sigma = largest_singular_value(c.system.A).value;
  return {std::abs(rho - 1.15) <= 0.01 && std::abs(sigma - 2.0) <= 0.02,
          "rho(A) = " + fmt("%.6f", rho) + ", sigma(A) = " + fmt("%.6f", sigma)};
}

Outcome snr_dropouts() {
  const double d1 = dropout_from_snr(300, 200, 8), d2 = dropout_from_snr(250, 200, 8);
  return {std::abs(d1 - 0.0039) <= 0.0005 && std::abs(d2 - 0.2584) <= 0.003,
          "d1 = " + fmt("%.6f", d1) + " (target 0.0039 +- 0.0005), d2 = " + fmt("%.6f", d2) +
              " (target 0.2584 +- 0.003)"};
}

Outcome region_containment() {
  bool pass = true;
  std::string detail;
  for (const char* name : {"fig3a.json", "fig3b.json", "fig3c.json", "fig3d.json"}) {
    const ExperimentConfig c = load_config(data(name));
    const RegionScan scan =
        region_scan(c.system, nullptr, c.channel, c.scan->axes, 101, {false, c.tolerances.iteration, worker_count()});
    const std::size_t stable = scan.stable_count(), sufficient = scan.sufficient_count();
    const std::size_t violations = scan.containment_violations();
    pass = pass && scan.cells.size() == 101 * 101 && violations == 0 && sufficient < stable;
    detail += std::string(name).substr(0, 5) + " " + std::to_string(stable) + "/" + std::to_string(sufficient) + "/" +
              std::to_string(violations) + " ";
  }
  return {pass, detail + "(stable/sufficient/violations)"};
}

Outcome special_channel_closed_forms() {
  std::mt19937_64 gen(2024);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double worst = 0.0;
  for (int k = 0; k < 500; ++k) {
    const std::size_t m = 2 + k % 4;
    const Matrix a = random_matrix(2 + k % 3, gen);
    const double rho2 = std::pow(spectral_radius(a).value, 2);
    Vector r(m);
    double s = 0.0;
    for (auto& x : r) s += x = 0.05 + u(gen);
    Matrix p(m, m);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < m; ++j) p(i, j) = r[j] / s;
    const double d = u(gen);
    const MarkovChannel iid{p, Vector(m, d), std::nullopt};
    worst = std::max(worst, std::abs(stability_margin(a, iid).margin - rho2 * d));
  }
  for (int k = 0; k < 500; ++k) {
    const Matrix a = random_matrix(2 + k % 3, gen);
    const double rho2 = std::pow(spectral_radius(a).value, 2);
    const double p12 = 0.01 + 0.98 * u(gen), p22 = 0.01 + 0.98 * u(gen);
    const MarkovChannel onoff{Matrix{{1 - p12, p12}, {1 - p22, p22}}, {0.0, 1.0}, std::nullopt};
    worst = std::max(worst, std::abs(stability_margin(a, onoff).margin - rho2 * p22));
  }
  return {worst <= 1e-9, "largest deviation " + fmt("%.3g", worst)};
}

Outcome cycle_chain_structure() {
  std::mt19937_64 gen(77);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double row_err = 0.0, fixed_err = 0.0, stray = 0.0;
  int reduced = 0, made = 0;
  while (made < 1000) {
    const std::size_t m = 2 + gen() % 5;
    Vector d(m);
    for (auto& x : d) x = u(gen) < 0.3 ? 1.0 : u(gen);
    const MarkovChannel ch{random_stochastic(m, gen, 0.5), d, std::nullopt};
    if (!validate(ch).valid() || std::all_of(d.begin(), d.end(), [](double x) { return x == 1.0; })) continue;
    ++made;
    const CycleModel cm = cycle_model(ch);
    for (std::size_t i = 0; i < m; ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < m; ++j) {
        s += cm.transition(i, j);
        if (!cm.post_success.contains(j)) stray = std::max(stray, std::abs(cm.transition(i, j)));
      }
      row_err = std::max(row_err, std::abs(s - 1.0));
    }
    const Vector bg = left_multiply(cm.beta, cm.restricted);
    for (std::size_t k = 0; k < bg.size(); ++k) fixed_err = std::max(fixed_err, std::abs(bg[k] - cm.beta[k]));
    reduced += cm.post_success.size() < m;
  }
  return {row_err <= 1e-10 && stray == 0.0 && fixed_err <= 1e-10,
          "row sums " + fmt("%.2g", row_err) + ", off-set columns " + fmt("%.2g", stray) + ", beta residual " +
              fmt("%.2g", fixed_err) + ", " + std::to_string(reduced) + " channels with M' < M"};
}

struct DefaultEnsemble {
  ExperimentConfig config;
  SteadyStateFilter filter;
  std::vector<RunResult> runs;
  EnsembleSummary summary;
};

const DefaultEnsemble& default_ensemble() {
  static const DefaultEnsemble e = [] {
    DefaultEnsemble out;
    out.config = load_config(data("pendubot_default.json"));
    out.filter = riccati_steady_state(out.config.system);
    out.runs = simulate(out.config.system, out.filter, out.config.channel, out.config.simulation);
    out.summary = ensemble(out.runs, out.config.channel);
    return out;
  }();
  return e;
}

Outcome analytic_vs_simulation() {
  const DefaultEnsemble& e = default_ensemble();
  const MseResult j = analytic_mse(e.config.system, e.filter, e.config.channel);
  const double gap = std::abs(j.value - e.summary.mean_J) / j.value;
  return {j.bounded && e.runs.size() == 10 && e.config.simulation.horizon == 100000 && gap < 0.05,
          "analytic " + fmt("%.6f", j.value) + ", simulated " + fmt("%.6f", e.summary.mean_J) + " +- " +
              fmt("%.4f", e.summary.standard_error) + " (SE), gap " + fmt("%.3f", 100 * gap) + "%"};
}

Outcome cycle_statistics() {
  const EnsembleSummary& s = default_ensemble().summary;
  return {s.tv_post_success < 0.02 && s.tv_cycle_length < 0.02 && s.pmf_tail < 1e-6 && s.total_cycles >= 100000,
          "TV(post-success, beta) " + fmt("%.5f", s.tv_post_success) + ", TV(cycle length) " +
              fmt("%.5f", s.tv_cycle_length) + ", pmf tail " + fmt("%.2g", s.pmf_tail) + ", " +
              std::to_string(s.total_cycles) + " cycles"};
}

Outcome smart_vs_conventional() {
  const ExperimentConfig c = load_config(data("pendubot_default.json"));
  const SteadyStateFilter f = riccati_steady_state(c.system);
  SimulationConfig sim = c.simulation;
  sim.horizon = 20000;
  sim.seeds = {1, 2, 3};
  int points = 0, ordered = 0;
  double tightest = INFINITY;
  for (int i = 1; i <= 5; ++i)
    for (int k = 1; k <= 5; ++k) {
      MarkovChannel ch = c.channel;
      ch.dropout = {0.1 * i, 0.1 * k};
      if (!stability_margin(c.system.A, ch).stable) return {false, "grid point outside the stable region"};
      sim.mode = SensorMode::kSmart;
      const auto smart = simulate(c.system, f, ch, sim);
      sim.mode = SensorMode::kConventional;
      const auto conv = simulate(c.system, f, ch, sim);
      for (std::size_t s = 0; s < smart.size(); ++s) {
        ++points;
        ordered += conv[s].empirical_J >= smart[s].empirical_J;
        tightest = std::min(tightest, conv[s].empirical_J / smart[s].empirical_J);
      }
    }
  return {ordered == points, std::to_string(ordered) + "/" + std::to_string(points) +
                                 " paired runs ordered on d in {0.1..0.5}^2, smallest ratio " + fmt("%.4f", tightest)};
}

Outcome boundary_blow_up() {
  const ExperimentConfig c = load_config(data("pendubot_default.json"));
  const SteadyStateFilter f = riccati_steady_state(c.system);
  // Ray d = s (1, 1): rho(DM) = s, so the margin is rho(A)² s.
  const double rho2 = std::pow(spectral_radius(c.system.A).value, 2);
  SimulationConfig sim = c.simulation;
  sim.horizon = 100000;
  sim.seeds = {1, 2, 3, 4, 5};
  double js[2], margins[2];
  const double targets[2] = {0.9, 1.1};
  for (int k = 0; k < 2; ++k) {
    MarkovChannel ch = c.channel;
    const double s = targets[k] / rho2;
    ch.dropout = {s, s};
    margins[k] = stability_margin(c.system.A, ch).margin;
    js[k] = mean_J(simulate(c.system, f, ch, sim));
  }
  const double ratio = js[1] / js[0];
  return {std::abs(margins[0] - 0.9) < 1e-6 && std::abs(margins[1] - 1.1) < 1e-6 && ratio >= 10.0,
          "J " + fmt("%.4g", js[0]) + " at margin " + fmt("%.3f", margins[0]) + ", " + fmt("%.4g", js[1]) +
              " at margin " + fmt("%.3f", margins[1]) + ", ratio " + fmt("%.3g", ratio)};
}

Outcome bounds_suite() {
  bool pass = true;
  std::string detail;
  for (const auto& entry : fs::directory_iterator(REMEST_DATA_DIR)) {
    if (entry.path().extension() != ".json") continue;
    const ExperimentConfig c = load_config(entry.path().string());
    const IndexRange range = c.bounds.range;
    const Matrix& a = c.system.A;
    const double rho = spectral_radius(a).value;
    bool ok = check_upper_bound(a, c.bounds.epsilon, range).pass && check_periodic_lower_bound(a, range).pass;
    const EnvelopeFit q = check_lower_bound_with_Q(a, c.system.W, range);
    ok = ok && (q.pass || !q.applicable);
    const DmPropertiesReport dm = check_dm_properties(c.channel, range);
    ok = ok && (dm.pass || !dm.applicable);
    const double eps = c.bounds.trace_epsilon.value_or(0.05 * rho * rho);
    ok = ok && check_c_envelopes(c.system, riccati_steady_state(c.system), eps, range).pass;
    if (!ok) detail += entry.path().filename().string() + " failed; ";
    pass = pass && ok;
  }
  const ExperimentConfig rot = load_config(data("rotation_bounds.json"));
  const EnvelopeFit w = check_periodic_lower_bound(rot.system.A, rot.bounds.range);
  const bool witness = w.pass && w.period == 2 && w.row == 1 && w.col == 1;
  const EnvelopeFit refused = check_lower_bound_with_Q(rot.system.A, Matrix(2, 2), rot.bounds.range);
  const bool refusal = !refused.applicable && !refused.pass;
  return {pass && witness && refusal,
          detail + "fixtures " + (pass ? "pass" : "fail") + ", rotation witness period " + std::to_string(w.period) +
              " at (" + std::to_string(w.row) + "," + std::to_string(w.col) + "), Q = 0 " +
              (refusal ? "refused" : "not refused")};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), {});
}

Outcome cli_determinism() {
  const fs::path dir = fs::temp_directory_path() / "remest_acceptance";
  fs::create_directories(dir);
  const std::string cli = REMEST_CLI_PATH;
  const std::string pend = data("pendubot_default.json");
  const std::vector<std::string> commands = {
      "--config " + pend + " stability",
      "--config " + data("three_state_fig8.json") + " stability",
      "--config " + pend + " --format csv region",
      "--config " + pend + " --format svg region",
      "--config " + data("fig3b.json") + " --format json region",
      "--config " + pend + " mse --both",
      "--config " + data("example2_onoff.json") + " mse --simulate",
      "--config " + pend + " --seed 4,5 --format csv mse --simulate",
      "--config " + data("rotation_bounds.json") + " bounds",
      "--config " + pend + " bounds",
      "channel-from-snr --gains 300,250 --blocklength 200 --rate 8",
      "--config " + data("example1_snr.json") + " channel-from-snr",
      "--config " + pend + " --echo",
  };
  int identical = 0;
  std::string detail;
  for (std::size_t k = 0; k < commands.size(); ++k) {
    std::string outputs[2];
    int codes[2];
    for (int rep = 0; rep < 2; ++rep) {
      const fs::path out = dir / ("run" + std::to_string(rep));
      fs::remove(out);
      const std::string line = "\"" + cli + "\" " + commands[k] + " --out \"" + out.string() + "\" 2>/dev/null";
      codes[rep] = std::system(line.c_str());
      outputs[rep] = slurp(out);
    }
    if (codes[0] == codes[1] && !outputs[0].empty() && outputs[0] == outputs[1]) ++identical;
    else detail += "differs: " + commands[k] + "; ";
  }
  fs::remove_all(dir);
  return {identical == static_cast<int>(commands.size()),
          detail + std::to_string(identical) + "/" + std::to_string(commands.size()) + " commands byte-identical"};
}

}  // namespace

int main() {
  struct Criterion {
    const char* name;
    double budget_seconds;  // 0 = no runtime requirement
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> criteria = {
      {"Pendubot spectra", 1.0, pendubot_spectra},
      {"Example 1 dropouts from SNR", 1.0, snr_dropouts},
      {"Region containment on 101x101 grids", 30.0, region_containment},
      {"I.i.d. and on-off closed forms", 0.0, special_channel_closed_forms},
      {"Cycle chain stochasticity and structure", 0.0, cycle_chain_structure},
      {"Analytic vs simulated J", 120.0, analytic_vs_simulation},
      {"Cycle statistics", 0.0, cycle_statistics},
      {"Smart vs conventional ordering", 0.0, smart_vs_conventional},
      {"Boundary blow-up", 0.0, boundary_blow_up},
      {"Bounds suite", 30.0, bounds_suite},
      {"CLI determinism", 0.0, cli_determinism},
  };
  int failures = 0;
  for (std::size_t k = 0; k < criteria.size(); ++k) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[k].run();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (criteria[k].budget_seconds > 0 && secs > criteria[k].budget_seconds) {
      o.pass = false;
      o.detail += ", over the " + fmt("%.0f", criteria[k].budget_seconds) + " s budget";
    }
    failures += !o.pass;
    std::cout << "[" << (o.pass ? "PASS" : "FAIL") << "] " << (k + 1) << ". " << criteria[k].name << ": "
              << o.detail << " [" << fmt("%.2f", secs) << " s]" << std::endl;
  }
  std::cout << (criteria.size() - failures) << "/" << criteria.size() << " criteria passed" << std::endl;
  return failures == 0 ? 0 : 1;
}

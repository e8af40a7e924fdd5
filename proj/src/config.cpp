#include "remest/config.hpp"

#include <cmath>
#include <fstream>
#include <initializer_list>
#include <set>

namespace remest {
namespace {

using nlohmann::json;

std::string at(const std::string& path, const std::string& key) { return path.empty() ? key : path + "." + key; }
std::string at(const std::string& path, std::size_t index) { return path + "[" + std::to_string(index) + "]"; }

void expect_object(const json& j, const std::string& path, std::initializer_list<const char*> known) {
  if (!j.is_object()) throw ConfigError(path.empty() ? "<root>" : path, "expected an object");
  const std::set<std::string> allowed(known.begin(), known.end());
  for (const auto& item : j.items())
    if (!allowed.count(item.key())) throw ConfigError(at(path, item.key()), "unknown field");
}

const json& require(const json& obj, const std::string& path, const char* key) {
  if (!obj.contains(key)) throw ConfigError(at(path, key), "missing field");
  return obj.at(key);
}

double number(const json& j, const std::string& path) {
  if (!j.is_number()) throw ConfigError(path, "expected a number");
  const double v = j.get<double>();
  if (!std::isfinite(v)) throw ConfigError(path, "expected a finite number");
  return v;
}

double positive(const json& j, const std::string& path) {
  const double v = number(j, path);
  if (!(v > 0.0)) throw ConfigError(path, "expected a positive number");
  return v;
}

std::int64_t integer(const json& j, const std::string& path) {
  if (!j.is_number_integer()) throw ConfigError(path, "expected an integer");
  if (j.is_number_unsigned() && j.get<std::uint64_t>() > static_cast<std::uint64_t>(INT64_MAX))
    throw ConfigError(path, "integer out of range");
  return j.get<std::int64_t>();
}

Vector vector_of(const json& j, const std::string& path) {
  if (!j.is_array() || j.empty()) throw ConfigError(path, "expected a nonempty array of numbers");
  Vector out;
  for (std::size_t i = 0; i < j.size(); ++i) out.push_back(number(j[i], at(path, i)));
  return out;
}

Matrix matrix_of(const json& j, const std::string& path) {
  if (!j.is_array() || j.empty()) throw ConfigError(path, "expected a nonempty array of rows");
  std::size_t cols = 0;
  std::vector<double> entries;
  for (std::size_t r = 0; r < j.size(); ++r) {
    const std::string row_path = at(path, r);
    const Vector row = vector_of(j[r], row_path);
    if (r == 0) cols = row.size();
    if (row.size() != cols)
      throw ConfigError(row_path, "expected " + std::to_string(cols) + " entries, found " + std::to_string(row.size()));
    entries.insert(entries.end(), row.begin(), row.end());
  }
  return Matrix(j.size(), cols, std::move(entries));
}

void expect_shape(const Matrix& m, std::size_t rows, std::size_t cols, const std::string& path) {
  if (m.rows() != rows || m.cols() != cols)
    throw ConfigError(path, "expected a " + std::to_string(rows) + "x" + std::to_string(cols) + " matrix, found " +
                                std::to_string(m.rows()) + "x" + std::to_string(m.cols()));
}

json matrix_json(const Matrix& m) {
  json out = json::array();
  for (std::size_t r = 0; r < m.rows(); ++r) {
    auto row = m.row_span(r);
    out.push_back(Vector(row.begin(), row.end()));
  }
  return out;
}

void parse_system(const json& j, ExperimentConfig& c) {
  const std::string path = "system";
  expect_object(j, path, {"A", "C", "W", "W_factor", "V"});
  LtiSystem& s = c.system;
  s.A = matrix_of(require(j, path, "A"), "system.A");
  const std::size_t n = s.A.rows();
  expect_shape(s.A, n, n, "system.A");
  s.C = matrix_of(require(j, path, "C"), "system.C");
  if (s.C.cols() != n) expect_shape(s.C, s.C.rows(), n, "system.C");
  const std::size_t m = s.C.rows();
  if (j.contains("W") == j.contains("W_factor")) throw ConfigError("system.W", "give exactly one of W or W_factor");
  if (j.contains("W")) {
    s.W = matrix_of(j.at("W"), "system.W");
    expect_shape(s.W, n, n, "system.W");
  } else {
    const Vector u = vector_of(j.at("W_factor"), "system.W_factor");
    if (u.size() != n)
      throw ConfigError("system.W_factor", "expected " + std::to_string(n) + " entries, found " + std::to_string(u.size()));
    c.w_factor = u;
    s.W = Matrix::column(u) * Matrix::row(u);
  }
  s.V = matrix_of(require(j, path, "V"), "system.V");
  expect_shape(s.V, m, m, "system.V");
  try {
    validate(s);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(path, e.what());
  }
}

void parse_channel(const json& j, ExperimentConfig& c) {
  const std::string path = "channel";
  expect_object(j, path, {"transition", "dropout", "snr"});
  MarkovChannel& ch = c.channel;
  ch.transition = matrix_of(require(j, path, "transition"), "channel.transition");
  const std::size_t m = ch.transition.rows();
  expect_shape(ch.transition, m, m, "channel.transition");
  if (j.contains("dropout") == j.contains("snr")) throw ConfigError("channel.dropout", "give exactly one of dropout or snr");
  if (j.contains("dropout")) {
    ch.dropout = vector_of(j.at("dropout"), "channel.dropout");
  } else {
    const json& s = j.at("snr");
    expect_object(s, "channel.snr", {"gains", "blocklength", "rate"});
    SnrSpec snr;
    snr.gains = vector_of(require(s, "channel.snr", "gains"), "channel.snr.gains");
    for (std::size_t i = 0; i < snr.gains.size(); ++i)
      if (!(snr.gains[i] > 0.0)) throw ConfigError(at("channel.snr.gains", i), "expected a positive number");
    const std::int64_t zeta = integer(require(s, "channel.snr", "blocklength"), "channel.snr.blocklength");
    if (zeta < 1 || zeta > INT32_MAX) throw ConfigError("channel.snr.blocklength", "expected a positive integer");
    snr.blocklength = static_cast<int>(zeta);
    snr.rate = positive(require(s, "channel.snr", "rate"), "channel.snr.rate");
    for (double g : snr.gains) ch.dropout.push_back(dropout_from_snr(g, snr.blocklength, snr.rate));
    ch.gains = snr.gains;
    c.snr = snr;
  }
  if (ch.dropout.size() != m)
    throw ConfigError(c.snr ? "channel.snr.gains" : "channel.dropout",
                      "expected " + std::to_string(m) + " entries, found " + std::to_string(ch.dropout.size()));
  const ChannelValidation v = validate(ch);
  if (!v.well_formed() || !v.irreducible) throw ConfigError(path, v.issues.empty() ? "invalid channel" : v.issues.front());
}

void parse_simulation(const json& j, ExperimentConfig& c) {
  const std::string path = "simulation";
  expect_object(j, path, {"horizon", "seeds", "initial_state", "mode", "record_trajectory"});
  SimulationConfig& s = c.simulation;
  if (j.contains("horizon")) {
    const std::int64_t h = integer(j.at("horizon"), "simulation.horizon");
    if (h < 1) throw ConfigError("simulation.horizon", "expected an integer >= 1");
    s.horizon = static_cast<std::size_t>(h);
  }
  if (j.contains("seeds")) {
    const json& seeds = j.at("seeds");
    if (!seeds.is_array() || seeds.empty()) throw ConfigError("simulation.seeds", "expected a nonempty array of integers");
    s.seeds.clear();
    for (std::size_t i = 0; i < seeds.size(); ++i) {
      const json& e = seeds[i];
      if (!e.is_number_unsigned() && !(e.is_number_integer() && e.get<std::int64_t>() >= 0))
        throw ConfigError(at("simulation.seeds", i), "expected a nonnegative 64-bit integer");
      s.seeds.push_back(e.get<std::uint64_t>());
    }
  }
  if (j.contains("initial_state")) {
    const json& e = j.at("initial_state");
    if (e.is_string()) {
      if (e.get<std::string>() != "stationary")
        throw ConfigError("simulation.initial_state", "expected \"stationary\" or a state number");
      s.initial_state.reset();
    } else {
      const std::int64_t k = integer(e, "simulation.initial_state");
      if (k < 1 || static_cast<std::size_t>(k) > c.channel.states())
        throw ConfigError("simulation.initial_state", "state number out of range 1.." + std::to_string(c.channel.states()));
      s.initial_state = static_cast<std::size_t>(k - 1);
    }
  }
  if (j.contains("mode")) {
    if (!j.at("mode").is_string()) throw ConfigError("simulation.mode", "expected a string");
    try {
      s.mode = parse_sensor_mode(j.at("mode").get<std::string>());
    } catch (const std::invalid_argument& e) {
      throw ConfigError("simulation.mode", e.what());
    }
  }
  if (j.contains("record_trajectory")) {
    if (!j.at("record_trajectory").is_boolean()) throw ConfigError("simulation.record_trajectory", "expected true or false");
    s.record_trajectory = j.at("record_trajectory").get<bool>();
  }
}

void parse_scan(const json& j, ExperimentConfig& c) {
  const std::string path = "scan";
  expect_object(j, path, {"axes", "resolution", "mse"});
  ScanSpec scan;
  const json& axes = require(j, path, "axes");
  if (!axes.is_array() || axes.empty()) throw ConfigError("scan.axes", "expected a nonempty array");
  std::set<std::size_t> seen;
  for (std::size_t i = 0; i < axes.size(); ++i) {
    const std::string ap = at("scan.axes", i);
    expect_object(axes[i], ap, {"state", "range"});
    ScanAxis axis;
    const std::int64_t k = integer(require(axes[i], ap, "state"), at(ap, "state"));
    if (k < 1 || static_cast<std::size_t>(k) > c.channel.states())
      throw ConfigError(at(ap, "state"), "state number out of range 1.." + std::to_string(c.channel.states()));
    axis.state = static_cast<std::size_t>(k - 1);
    if (!seen.insert(axis.state).second) throw ConfigError(at(ap, "state"), "state scanned twice");
    if (axes[i].contains("range")) {
      const Vector r = vector_of(axes[i].at("range"), at(ap, "range"));
      if (r.size() != 2 || !(r[0] >= 0.0 && r[1] <= 1.0 && r[0] <= r[1]))
        throw ConfigError(at(ap, "range"), "expected [lo, hi] with 0 <= lo <= hi <= 1");
      axis.lo = r[0];
      axis.hi = r[1];
    }
    scan.axes.push_back(axis);
  }
  if (j.contains("resolution")) {
    const std::int64_t r = integer(j.at("resolution"), "scan.resolution");
    if (r < 2) throw ConfigError("scan.resolution", "expected an integer >= 2");
    scan.resolution = static_cast<std::size_t>(r);
  }
  if (j.contains("mse")) {
    if (!j.at("mse").is_boolean()) throw ConfigError("scan.mse", "expected true or false");
    scan.mse = j.at("mse").get<bool>();
  }
  c.scan = scan;
}

void parse_bounds(const json& j, ExperimentConfig& c) {
  const std::string path = "bounds";
  expect_object(j, path, {"epsilon", "trace_epsilon", "range"});
  if (j.contains("epsilon")) c.bounds.epsilon = positive(j.at("epsilon"), "bounds.epsilon");
  if (j.contains("trace_epsilon")) c.bounds.trace_epsilon = positive(j.at("trace_epsilon"), "bounds.trace_epsilon");
  if (j.contains("range")) {
    const json& r = j.at("range");
    if (!r.is_array() || r.size() != 2) throw ConfigError("bounds.range", "expected [first, last]");
    const std::int64_t a = integer(r[0], "bounds.range[0]"), b = integer(r[1], "bounds.range[1]");
    if (a < 1 || b < a + 7) throw ConfigError("bounds.range", "expected 1 <= first and at least 8 indices");
    c.bounds.range = {static_cast<std::size_t>(a), static_cast<std::size_t>(b)};
  }
}

void parse_tolerances(const json& j, ExperimentConfig& c) {
  expect_object(j, "tolerances", {"iteration", "rank", "riccati"});
  if (j.contains("iteration")) c.tolerances.iteration = positive(j.at("iteration"), "tolerances.iteration");
  if (j.contains("rank")) c.tolerances.rank = positive(j.at("rank"), "tolerances.rank");
  if (j.contains("riccati")) c.tolerances.riccati = positive(j.at("riccati"), "tolerances.riccati");
}

}  // namespace

ExperimentConfig parse_config(const json& doc) {
  expect_object(doc, "", {"name", "system", "channel", "simulation", "scan", "bounds", "tolerances"});
  ExperimentConfig c;
  if (doc.contains("name")) {
    if (!doc.at("name").is_string()) throw ConfigError("name", "expected a string");
    c.name = doc.at("name").get<std::string>();
  }
  parse_system(require(doc, "", "system"), c);
  parse_channel(require(doc, "", "channel"), c);
  if (doc.contains("simulation")) parse_simulation(doc.at("simulation"), c);
  if (doc.contains("scan")) parse_scan(doc.at("scan"), c);
  if (doc.contains("bounds")) parse_bounds(doc.at("bounds"), c);
  if (doc.contains("tolerances")) parse_tolerances(doc.at("tolerances"), c);
  return c;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path, "cannot open config file");
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(path, std::string("malformed JSON: ") + e.what());
  }
  return parse_config(doc);
}

json to_json(const ExperimentConfig& c) {
  json doc;
  if (!c.name.empty()) doc["name"] = c.name;
  json& sys = doc["system"];
  sys["A"] = matrix_json(c.system.A);
  sys["C"] = matrix_json(c.system.C);
  if (c.w_factor) sys["W_factor"] = *c.w_factor;
  else sys["W"] = matrix_json(c.system.W);
  sys["V"] = matrix_json(c.system.V);

  json& ch = doc["channel"];
  ch["transition"] = matrix_json(c.channel.transition);
  if (c.snr) ch["snr"] = {{"gains", c.snr->gains}, {"blocklength", c.snr->blocklength}, {"rate", c.snr->rate}};
  else ch["dropout"] = c.channel.dropout;

  const SimulationConfig& s = c.simulation;
  json& sim = doc["simulation"];
  sim["horizon"] = s.horizon;
  sim["seeds"] = s.seeds;
  if (s.initial_state) sim["initial_state"] = *s.initial_state + 1;
  else sim["initial_state"] = "stationary";
  sim["mode"] = to_string(s.mode);
  sim["record_trajectory"] = s.record_trajectory;

  if (c.scan) {
    json axes = json::array();
    for (const ScanAxis& a : c.scan->axes) axes.push_back({{"state", a.state + 1}, {"range", {a.lo, a.hi}}});
    doc["scan"] = {{"axes", axes}, {"resolution", c.scan->resolution}, {"mse", c.scan->mse}};
  }
  json& b = doc["bounds"];
  b["epsilon"] = c.bounds.epsilon;
  if (c.bounds.trace_epsilon) b["trace_epsilon"] = *c.bounds.trace_epsilon;
  b["range"] = {c.bounds.range.first, c.bounds.range.last};
  doc["tolerances"] = {{"iteration", c.tolerances.iteration},
                       {"rank", c.tolerances.rank},
                       {"riccati", c.tolerances.riccati}};
  return doc;
}

}  // namespace remest

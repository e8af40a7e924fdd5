#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "remest/bounds.hpp"
#include "remest/channel.hpp"
#include "remest/lti.hpp"
#include "remest/region.hpp"
#include "remest/simulation.hpp"

namespace remest {

/// Invalid experiment description. what() starts with the JSON path of the
/// offending field, e.g. "system.A[2]: expected 4 entries, found 3".
class ConfigError : public std::invalid_argument {
 public:
  ConfigError(const std::string& path, const std::string& message)
      : std::invalid_argument(path + ": " + message), path_(path) {}
  const std::string& path() const { return path_; }

 private:
  std::string path_;
};

struct SnrSpec {
  Vector gains;
  int blocklength = 0;
  double rate = 0.0;

  bool operator==(const SnrSpec&) const = default;
};

struct ScanSpec {
  std::vector<ScanAxis> axes;
  std::size_t resolution = 101;
  /// Fill the J column of the region CSV.
  bool mse = true;

  bool operator==(const ScanSpec&) const = default;
};

struct BoundsSpec {
  double epsilon = 0.05;
  /// Envelope slack for c(i); 0.05 rho²(A) when empty.
  std::optional<double> trace_epsilon;
  IndexRange range;

  bool operator==(const BoundsSpec&) const = default;
};

struct Tolerances {
  /// Spectral iterations and the MSE series.
  double iteration = kDefaultIterTol;
  double rank = kDefaultRankTol;
  double riccati = kDefaultIterTol;

  bool operator==(const Tolerances&) const = default;
};

struct ExperimentConfig {
  std::string name;
  LtiSystem system;
  /// W was given as u (W = u uᵀ); kept so the echo reproduces the input.
  std::optional<Vector> w_factor;
  MarkovChannel channel;
  /// The dropout vector was derived from this block.
  std::optional<SnrSpec> snr;
  SimulationConfig simulation;
  std::optional<ScanSpec> scan;
  BoundsSpec bounds;
  Tolerances tolerances;

  bool operator==(const ExperimentConfig&) const = default;
};

/// Parses and validates: system dimensions, W PSD, V positive definite,
/// row-stochastic irreducible channel. Rank conditions are not enforced
/// here; the commands report them.
ExperimentConfig parse_config(const nlohmann::json& doc);
/// Reads a file; parse errors name the file and the JSON position.
ExperimentConfig load_config(const std::string& path);
/// Input-faithful echo: parse_config(to_json(c)) == c.
nlohmann::json to_json(const ExperimentConfig& config);

}  // namespace remest

#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace remest {

/// Exit codes shared by every subcommand.
inline constexpr int kExitOk = 0;
inline constexpr int kExitInputError = 1;
/// Unstable configuration, failed check, or disagreement.
inline constexpr int kExitFailed = 2;

struct CommandOptions {
  std::string config_path;
  std::vector<std::uint64_t> seeds;  // overrides simulation.seeds when nonempty
  std::string out_path;              // stdout when empty
  std::string format;                // csv | json | svg; empty = command default
  std::optional<double> tol;
};

enum class MseMode { kAnalytic, kSimulate, kBoth };

/// Each command writes its artifact to options.out_path (or `out`) only after
/// all work is done and reports problems on `err`.
int cmd_stability(const CommandOptions& options, std::ostream& out, std::ostream& err);
int cmd_region(const CommandOptions& options, std::ostream& out, std::ostream& err);
int cmd_mse(const CommandOptions& options, MseMode mode, std::ostream& out, std::ostream& err);
int cmd_bounds(const CommandOptions& options, std::ostream& out, std::ostream& err);
int cmd_channel_from_snr(const std::vector<double>& gains, int blocklength, double rate,
                         const CommandOptions& options, std::ostream& out, std::ostream& err);
/// Writes the parsed configuration back as JSON.
int cmd_echo(const CommandOptions& options, std::ostream& out, std::ostream& err);

/// Full command line, argv[0] included.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace remest

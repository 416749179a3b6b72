#pragma once

/**
 * @file
 * @brief Subcommands of the miqp_mpc command-line tool.
 *
 * Exit codes: 0 success, 1 bad input (parse errors, invalid arguments, I/O),
 * 2 controller infeasible, 3 unstable run.
 */

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace miqp_mpc::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitInput = 1;
inline constexpr int kExitInfeasible = 2;
inline constexpr int kExitUnstable = 3;

struct CommonOptions {
  std::string out_dir = ".";
  std::optional<std::uint64_t> seed;  ///< overrides the scenario's rng_seed
};

/// Writes <out>/<name>.trace.csv.
int cmd_run(const std::string& scenario_path, const CommonOptions& opts, std::ostream& out, std::ostream& err);

/// Writes <out>/<name>.<label>.trace.csv per sweep point and <out>/<name>.sweep.csv.
/// Points run on up to `threads` workers; unstable or infeasible points are
/// reported in the summary and still exit 0.
int cmd_sweep(const std::string& scenario_path, const CommonOptions& opts, int threads, std::ostream& out,
              std::ostream& err);

/// Writes <out>/position.svg and <out>/error.svg.
int cmd_plot(const std::vector<std::string>& trace_paths, const std::optional<std::string>& reference,
             const CommonOptions& opts, std::ostream& out, std::ostream& err);

/// Writes <out>/<name>.k<sample>.tree.txt with the tree log of that sample's solve.
int cmd_tree(const std::string& scenario_path, int sample, const CommonOptions& opts, std::ostream& out,
             std::ostream& err);

/// MIQP_MPC_THREADS when set to a positive integer, else the hardware concurrency (at least 1).
int sweep_threads();

}  // namespace miqp_mpc::cli

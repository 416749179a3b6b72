#pragma once

/**
 * @file
 * @brief Sectioned key-value scenario files and sweep expansion.
 *
 * Sections and keys (every key optional, defaults as in the C++ structs):
 *   [scenario]  name, example (switching_thrusters | min_thrust), x0 (6 numbers),
 *               horizon, samples, mode (fixed | uniting), prune_rule
 *               (depth_first | best_first), lyapunov (obj | feas), rng_seed
 *   [dynamics]  orbital_rate, mass, dt
 *   [limits]    axis (bnb | qp), base_ib, base_iqp, low_ib, low_iqp, high_ib, high_iqp
 *   [lyapunov_obj], [lyapunov_feas]  theta, sigma, c0, c1
 *   [switching_thrusters]  alpha_v1, alpha_v2, alpha_state, big_m, position_bound,
 *               velocity_bound, control_bound, per_axis_gating (true | false)
 *   [min_thrust]  state_weight, control_weight, v_min, v_max, terminal_position,
 *               terminal_velocity
 *   [solver]    qp_tol_primal, qp_tol_dual
 *   [sweep]     i_b_low, i_qp_low (lists), lyapunov (list of obj | feas), fixed (true | false)
 * Lines are `key = value`; `#` and `;` start comments; lists are whitespace separated.
 */

#include "miqp_mpc/sim_harness.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace miqp_mpc {

struct SweepSpec {
  std::vector<std::int64_t> i_b_low;
  std::vector<int> i_qp_low;
  std::vector<LyapunovKind> lyapunov;  ///< empty: the scenario's own kind
  bool fixed = true;                   ///< add fixed-limit runs at every limit and at high

  bool operator==(const SweepSpec&) const = default;
};

/// Scenario plus both monitor parameter sets; scenario.lyapunov is the
/// selected one of lyapunov_obj / lyapunov_feas.
struct ScenarioFile {
  Scenario scenario;
  LyapunovConfig lyapunov_obj;
  LyapunovConfig lyapunov_feas;
  SweepSpec sweep;

  ScenarioFile();
  const LyapunovConfig& monitor(LyapunovKind kind) const {
    return kind == LyapunovKind::Obj ? lyapunov_obj : lyapunov_feas;
  }
};

/// Throws ParseError with "<source>:<line>: ..." on syntax errors, unknown
/// sections or keys, duplicate keys, bad values, and violated invariants.
ScenarioFile parse_scenario_file(std::istream& is, const std::string& source = "<input>");
ScenarioFile load_scenario_file(const std::string& path);

/// Emits every key; parse_scenario_file(format_scenario_file(f)) reproduces f.
std::string format_scenario_file(const ScenarioFile& file);

struct SweepPoint {
  std::string label;      ///< file-name stem, e.g. "feas.ib2"
  std::string limit;      ///< summary column: limit value on the limited axis
  std::string lyapunov;   ///< summary column: obj, feas or fixed
  Scenario scenario;
};

/// Uniting runs for every (low limit, monitor kind) pair in the sweep lists,
/// then, when sweep.fixed, fixed-limit runs at every listed limit and at the
/// high limit (duplicates dropped). An empty list on the limited axis uses
/// the scenario's own low limit.
std::vector<SweepPoint> expand_sweep(const ScenarioFile& file);

inline constexpr const char* kSweepHeader = "limit,lyapunov,avg_ib,avg_iqp,final_error,switches";

}  // namespace miqp_mpc

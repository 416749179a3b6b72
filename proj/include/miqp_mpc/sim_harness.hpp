#pragma once

/**
 * @file
 * @brief Closed-loop runner, converged-solve baseline, metrics and trace CSV.
 */

#include "miqp_mpc/uniting.hpp"

#include <Eigen/Dense>

#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

namespace miqp_mpc {

struct Scenario {
  std::string name = "scenario";
  Example example = Example::MinThrust;
  Eigen::VectorXd x0 = Eigen::VectorXd::Zero(6);
  int horizon = 15;  ///< N, copied into the builder config of the example
  int samples = 60;
  LimitMode mode = LimitMode::FixedLimits;
  IterationSchedule schedule;
  LyapunovConfig lyapunov;
  PruneRule prune_rule = PruneRule::DepthFirst;
  cw::CwParams dynamics;  ///< dynamics.dt is the sample period
  SwitchingThrustersConfig switching;
  MinThrustConfig min_thrust;
  BnbOptions bnb;  ///< node QP tolerances and solver settings
  std::uint64_t rng_seed = 0;  ///< unused by nominal runs

  /// Throws InvalidArgument / DimensionMismatch / builder errors on bad fields.
  void validate() const;
  MpcModel model() const;
};

enum class RunOutcome { Completed, Unstable, ControllerInfeasible };

const char* to_string(RunOutcome outcome);

/// u holds both channels: u[0..2] impulsive (B1), u[3..5] electric (B2).
struct SimRow {
  int k = 0;
  Eigen::Matrix<double, 6, 1> x = Eigen::Matrix<double, 6, 1>::Zero();
  Eigen::Matrix<double, 6, 1> u = Eigen::Matrix<double, 6, 1>::Zero();
  int q = 1;
  double V = 0.0;
  double psi = 0.0;
  double viol_inf = 0.0;
  std::int64_t ib_used = 0;
  std::int64_t iqp_total = 0;
  MiqpStatus status = MiqpStatus::Infeasible;
  bool switched = false;

  bool operator==(const SimRow&) const = default;
};

struct SimTrace {
  std::string name;
  std::vector<SimRow> rows;  ///< x of row k is the state the sample-k solve saw
  Eigen::Matrix<double, 6, 1> x_end = Eigen::Matrix<double, 6, 1>::Zero();
  RunOutcome outcome = RunOutcome::Completed;

  double final_error_l2() const { return x_end.norm(); }
  int switch_count() const;
};

/// Called after every completed sample with the row and the full controller step.
using SampleCallback = std::function<void(const SimRow&, const ControlStep&)>;

/// Divergence guard: a run stops as Unstable once |x|_2 > 100 |x_0|_2 (only
/// when x_0 != 0) or the state stops being finite. ControllerInfeasible stops
/// the run with the rows gathered so far; neither case throws.
SimTrace run_closed_loop(const Scenario& scenario, const SampleCallback& on_sample = {});

/// Fixed limits i_b = 2^(s+1) (s = binary count, saturated at int64 max),
/// i_qp = 5000, best-first pruning.
Scenario oracle_scenario(const Scenario& scenario);
SimTrace oracle_trajectory(const Scenario& scenario, const SampleCallback& on_sample = {});

/// e_k = |x_k - x_k^ref|_2. Throws LengthMismatch on different row counts.
std::vector<double> tracking_error(const SimTrace& trace, const SimTrace& reference);

/// Mean of ib_used (BranchAndBound) or of iqp_total / max(ib_used, 1)
/// (QuadraticProgramming) over the first min(window, rows) rows.
/// Throws EmptyWindow when window < 1 or the trace has no rows.
double average_iterations(const SimTrace& trace, LimitedAxis axis, int window = 30);

inline constexpr const char* kTraceHeader =
    "k,x1,x2,x3,x4,x5,x6,u1,u2,u3,u4,u5,u6,q,V,psi,viol_inf,ib_used,iqp_total,status,switched";

/// Header, one line per row, then `# key=value` summary lines.
void write_trace_csv(std::ostream& os, const SimTrace& trace);
/// Inverse of write_trace_csv for rows, x_end, name and outcome. Throws ParseError.
SimTrace read_trace_csv(std::istream& is);

}  // namespace miqp_mpc

#pragma once

/**
 * @file
 * @brief Hysteresis supervisor that unites a low-limit and a high-limit MPC.
 *
 * Logic state q = 1 runs the high iteration limits, q = 0 the low ones. With
 * the Lyapunov-like monitor V and thresholds c0 < c1: T0 = {V <= c0},
 * U0 = {V <= c1}, T1 = {V >= c1}. The supervisor switches 0 -> 1 on T1 and
 * 1 -> 0 on T0; inside (c0, c1) q never changes.
 */

#include "miqp_mpc/bnb.hpp"
#include "miqp_mpc/mpc_builder.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <optional>

namespace miqp_mpc {

enum class LyapunovKind { Obj, Feas };

const char* to_string(LyapunovKind kind);

struct LyapunovConfig {
  LyapunovKind kind = LyapunovKind::Feas;
  double theta = 1e-3;
  double sigma = 1e-5;  ///< Gamma = sigma I
  double c0 = 200.0;
  double c1 = 300.0;

  /// InvalidArgument unless theta, sigma >= 0, finite thresholds and c0 < c1.
  void validate() const;
};

enum class LimitedAxis { BranchAndBound, QuadraticProgramming };

const char* to_string(LimitedAxis axis);

struct IterationLimits {
  std::int64_t i_b = 20;
  int i_qp = 100;

  bool operator==(const IterationLimits&) const = default;
};

/// Limits per mode: the limited axis takes low (q = 0) or high (q = 1); the
/// other axis stays at its base value in both modes.
struct IterationSchedule {
  LimitedAxis axis = LimitedAxis::BranchAndBound;
  IterationLimits base{20, 100};
  IterationLimits low{2, 5};
  IterationLimits high{20, 100};

  /// InvalidArgument unless every limit is >= 1 and low <= high on the limited axis.
  void validate() const;
  IterationLimits limits(int q) const;
};

/// Quantities of one solve that the monitors read.
struct SolveRecord {
  int k = 0;
  double psi = 0.0;       ///< Problem 1 objective of the returned incumbent
  double viol_inf = 0.0;  ///< l-inf constraint violation of the incumbent
  std::optional<double> previous_psi;
};

/// Obj: theta |psi_k - psi_{k-1}| + sigma |x|^2 (difference taken as 0 at k = 0).
/// Feas: theta viol_inf + sigma |x|^2.
/// Throws MissingPreviousObjective for Obj with k > 0 and no previous psi.
double eval_lyapunov(const LyapunovConfig& cfg, const Eigen::VectorXd& x_k, const SolveRecord& record);

struct SupervisorDecision {
  int q_next = 1;
  IterationLimits limits;  ///< limits of mode q_next
  bool switched = false;
};

/// Throws InvalidArgument when V is NaN or q is not 0 or 1.
SupervisorDecision supervisor_step(int q, double V, const LyapunovConfig& cfg, const IterationSchedule& sched);

enum class LimitMode { FixedLimits, Uniting };

const char* to_string(LimitMode mode);

/// Plant, example and builder settings of one closed loop.
struct MpcModel {
  Example example = Example::MinThrust;
  Plant plant;
  SwitchingThrustersConfig switching;
  MinThrustConfig min_thrust;

  MiqpProblem build(const Eigen::VectorXd& x_k) const;
};

struct ControlStep {
  Eigen::VectorXd u;
  int q = 1;  ///< mode the solve ran in
  int q_next = 1;
  bool switched = false;
  IterationLimits limits;
  double V = 0.0;
  SolveRecord record;
  MiqpResult result;
};

/// Sampled uniting loop: solve with the limits of the current q (warm started
/// from the shifted previous incumbent), apply kappa, evaluate V on the fresh
/// solve, then commit the supervisor's q for the next sample. FixedLimits
/// always uses the schedule's base limits and never switches.
class UnitingController {
 public:
  UnitingController(MpcModel model, IterationSchedule schedule, LyapunovConfig lyapunov, PruneRule rule,
                    LimitMode mode, BnbOptions options = {}, int initial_q = 1);

  /// Throws ControllerInfeasible when branch-and-bound proves infeasibility.
  ControlStep step(const Eigen::VectorXd& x_k);

  int q() const { return q_; }
  const MpcModel& model() const { return model_; }

 private:
  MpcModel model_;
  IterationSchedule schedule_;
  LyapunovConfig lyapunov_;
  PruneRule rule_;
  LimitMode mode_;
  BnbOptions options_;
  int q_;
  int k_ = 0;
  std::optional<MiqpProblem> previous_problem_;
  Eigen::VectorXd previous_y_;
  std::optional<double> previous_psi_;
};

}  // namespace miqp_mpc

#include "miqp_mpc/uniting.hpp"

#include "miqp_mpc/error.hpp"

#include <cmath>
#include <string>

namespace miqp_mpc {

using Eigen::VectorXd;

const char* to_string(LyapunovKind kind) { return kind == LyapunovKind::Obj ? "obj" : "feas"; }

const char* to_string(LimitedAxis axis) {
  return axis == LimitedAxis::BranchAndBound ? "bnb" : "qp";
}

const char* to_string(LimitMode mode) { return mode == LimitMode::FixedLimits ? "fixed" : "uniting"; }

void LyapunovConfig::validate() const {
  if (!(std::isfinite(theta) && theta >= 0.0) || !(std::isfinite(sigma) && sigma >= 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "theta and sigma must be finite and >= 0");
  }
  if (!std::isfinite(c0) || !std::isfinite(c1) || !(c0 < c1)) {
    throw Error(ErrorCode::InvalidArgument, "switching thresholds need c_{p,0} < c_{p,1} (got c0=" +
                                                std::to_string(c0) + ", c1=" + std::to_string(c1) + ")");
  }
}

void IterationSchedule::validate() const {
  for (const auto& l : {base, low, high}) {
    if (l.i_b < 1 || l.i_qp < 1) throw Error(ErrorCode::InvalidArgument, "iteration limits must be >= 1");
  }
  const bool ordered = axis == LimitedAxis::BranchAndBound ? low.i_b <= high.i_b : low.i_qp <= high.i_qp;
  if (!ordered) throw Error(ErrorCode::InvalidArgument, "low limit exceeds high limit on the limited axis");
}

IterationLimits IterationSchedule::limits(int q) const {
  IterationLimits out = base;
  const IterationLimits& mode = q == 1 ? high : low;
  if (axis == LimitedAxis::BranchAndBound) {
    out.i_b = mode.i_b;
  } else {
    out.i_qp = mode.i_qp;
  }
  return out;
}

double eval_lyapunov(const LyapunovConfig& cfg, const VectorXd& x_k, const SolveRecord& record) {
  const double quad = cfg.sigma * x_k.squaredNorm();
  if (cfg.kind == LyapunovKind::Feas) return cfg.theta * record.viol_inf + quad;
  if (record.k == 0) return quad;
  if (!record.previous_psi) {
    throw Error(ErrorCode::MissingPreviousObjective,
                "objective monitor at sample " + std::to_string(record.k) + " has no previous psi");
  }
  return cfg.theta * std::abs(record.psi - *record.previous_psi) + quad;
}

SupervisorDecision supervisor_step(int q, double V, const LyapunovConfig& cfg, const IterationSchedule& sched) {
  if (q != 0 && q != 1) throw Error(ErrorCode::InvalidArgument, "logic state must be 0 or 1");
  if (std::isnan(V)) throw Error(ErrorCode::InvalidArgument, "Lyapunov value is NaN");
  SupervisorDecision d;
  d.q_next = q;
  if (q == 0 && V >= cfg.c1) {
    d.q_next = 1;
  } else if (q == 1 && V <= cfg.c0) {
    d.q_next = 0;
  }
  d.switched = d.q_next != q;
  d.limits = sched.limits(d.q_next);
  return d;
}

MiqpProblem MpcModel::build(const VectorXd& x_k) const {
  return example == Example::SwitchingThrusters ? build_switching_thrusters(x_k, switching, plant)
                                                : build_min_thrust(x_k, min_thrust, plant);
}

UnitingController::UnitingController(MpcModel model, IterationSchedule schedule, LyapunovConfig lyapunov,
                                     PruneRule rule, LimitMode mode, BnbOptions options, int initial_q)
    : model_(std::move(model)), schedule_(schedule), lyapunov_(lyapunov), rule_(rule), mode_(mode),
      options_(options), q_(initial_q) {
  schedule_.validate();
  lyapunov_.validate();
  if (q_ != 0 && q_ != 1) throw Error(ErrorCode::InvalidArgument, "logic state must be 0 or 1");
}

ControlStep UnitingController::step(const VectorXd& x_k) {
  ControlStep out;
  out.q = q_;
  out.limits = mode_ == LimitMode::FixedLimits ? schedule_.base : schedule_.limits(q_);

  MiqpProblem problem = model_.build(x_k);
  std::optional<Incumbent> warm;
  if (previous_problem_) {
    VectorXd ys = shift_warm_start(*previous_problem_, previous_y_, model_.plant.A);
    const double psi = problem.objective(ys);
    const bool integral = problem.integral(ys);
    warm = Incumbent{std::move(ys), psi, integral, -1};
  }
  out.result = solve_miqp(problem, out.limits.i_b, out.limits.i_qp, rule_, warm, options_);
  if (out.result.status == MiqpStatus::Infeasible) {
    throw Error(ErrorCode::ControllerInfeasible, "branch-and-bound found no feasible point at sample " +
                                                     std::to_string(k_));
  }
  out.u = extract_control(out.result.y, problem, model_.example);

  out.record.k = k_;
  out.record.psi = out.result.psi;
  out.record.viol_inf = out.result.violation;
  out.record.previous_psi = previous_psi_;
  out.V = eval_lyapunov(lyapunov_, x_k, out.record);

  if (mode_ == LimitMode::Uniting) {
    const SupervisorDecision d = supervisor_step(q_, out.V, lyapunov_, schedule_);
    out.q_next = d.q_next;
    out.switched = d.switched;
  } else {
    out.q_next = q_;
  }

  previous_y_ = out.result.y;
  previous_problem_ = std::move(problem);
  previous_psi_ = out.result.psi;
  q_ = out.q_next;
  ++k_;
  return out;
}

}  // namespace miqp_mpc

#include "miqp_mpc/mpc_builder.hpp"

#include "miqp_mpc/error.hpp"

#include <cmath>
#include <limits>
#include <string>

namespace miqp_mpc {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

bool positive(double v) { return std::isfinite(v) && v > 0.0; }
bool nonnegative(double v) { return std::isfinite(v) && v >= 0.0; }

void check_horizon(Index n) {
  if (n < 1) throw Error(ErrorCode::HorizonTooShort, "horizon must be >= 1, got " + std::to_string(n));
}

void check_half_width(double w, const char* name) {
  if (std::isnan(w) || w < 0.0) {
    throw Error(ErrorCode::InfeasibleBoxes, std::string(name) + " box is empty (half-width " +
                                                std::to_string(w) + ")");
  }
}

void check_state(const VectorXd& x) {
  if (x.size() != 6) throw Error(ErrorCode::DimensionMismatch, "state must have 6 entries");
  if (!x.allFinite()) throw Error(ErrorCode::InvalidArgument, "state must be finite");
}

/// Row-by-row assembly of the stacked problem.
struct Assembly {
  Index n;
  MatrixXd H;
  VectorXd c;
  std::vector<std::pair<VectorXd, double>> ineq;
  std::vector<std::pair<VectorXd, double>> eq;
  VectorXd lo, hi;
  Index param_row = 0;
  cw::Matrix6d param_block = cw::Matrix6d::Zero();

  explicit Assembly(Index vars)
      : n(vars), H(MatrixXd::Zero(vars, vars)), c(VectorXd::Zero(vars)),
        lo(VectorXd::Constant(vars, -kInf)), hi(VectorXd::Constant(vars, kInf)) {}

  VectorXd row() const { return VectorXd::Zero(n); }

  /// Dynamics rows  zeta_{t+1} - A zeta_t - sum_c B_c v_{c,t} = 0, with the
  /// t = 0 right-hand side A x_k = G x_k.
  void dynamics(const LayoutBlock& zeta, const std::vector<const LayoutBlock*>& inputs,
                const std::vector<const cw::Matrix63d*>& channels, const cw::Matrix6d& A,
                const VectorXd& x_k) {
    param_row = static_cast<Index>(eq.size());
    param_block = A;
    for (Index t = 0; t < zeta.stages; ++t) {
      for (Index i = 0; i < 6; ++i) {
        VectorXd r = row();
        r[zeta.index(t, i)] = 1.0;
        if (t > 0)
          for (Index j = 0; j < 6; ++j) r[zeta.index(t - 1, j)] -= A(i, j);
        for (size_t ch = 0; ch < inputs.size(); ++ch)
          for (Index j = 0; j < 3; ++j) r[inputs[ch]->index(t, j)] -= (*channels[ch])(i, j);
        eq.emplace_back(std::move(r), t == 0 ? A.row(i).dot(x_k) : 0.0);
      }
    }
  }

  void box(const LayoutBlock& b, Index stage, Index comp, double lower, double upper) {
    const Index j = b.index(stage, comp);
    lo[j] = std::max(lo[j], lower);
    hi[j] = std::min(hi[j], upper);
  }

  MiqpProblem finish(std::vector<LayoutBlock> layout, Index horizon) && {
    const Index m = static_cast<Index>(ineq.size());
    const Index p = static_cast<Index>(eq.size());
    MatrixXd C(m, n), E(p, n);
    VectorXd b(m), e(p);
    for (Index i = 0; i < m; ++i) {
      C.row(i) = ineq[i].first.transpose();
      b[i] = ineq[i].second;
    }
    for (Index i = 0; i < p; ++i) {
      E.row(i) = eq[i].first.transpose();
      e[i] = eq[i].second;
    }
    MatrixXd G = MatrixXd::Zero(p, 6);
    G.middleRows<6>(param_row) = param_block;
    std::vector<Index> binaries;
    for (const auto& blk : layout)
      if (blk.kind == BlockKind::Binary)
        for (Index j = 0; j < blk.size(); ++j) binaries.push_back(blk.start + j);
    QpProblem qp(std::move(H), std::move(c), std::move(C), std::move(b), std::move(E), std::move(e),
                 std::move(lo), std::move(hi));
    return MiqpProblem(std::move(qp), std::move(binaries), std::move(layout), std::move(G), horizon);
  }
};

const LayoutBlock& named(const MiqpProblem& problem, const char* name, BlockKind kind) {
  const LayoutBlock& b = problem.block(name);
  if (b.kind != kind || b.stage_width != 3) {
    throw Error(ErrorCode::LayoutMismatch, std::string("block '") + name + "' has an unexpected shape");
  }
  return b;
}

std::vector<const LayoutBlock*> control_blocks(const MiqpProblem& problem, Example example) {
  if (example == Example::SwitchingThrusters)
    return {&named(problem, "v1", BlockKind::Control), &named(problem, "v2", BlockKind::Control)};
  return {&named(problem, "v", BlockKind::Control)};
}

}  // namespace

const char* to_string(Example example) {
  return example == Example::SwitchingThrusters ? "switching_thrusters" : "min_thrust";
}

Plant make_plant(const cw::CwParams& params, int quadrature_steps) {
  params.validate();
  return Plant{cw::stm(params, params.dt), cw::b_impulsive(params, params.dt),
               cw::b_electric(params, params.dt, quadrature_steps)};
}

void SwitchingThrustersConfig::validate() const {
  check_horizon(horizon);
  if (!nonnegative(alpha_v1) || !nonnegative(alpha_v2) || !nonnegative(alpha_state)) {
    throw Error(ErrorCode::InvalidArgument, "weights must be finite and nonnegative");
  }
  if (!positive(big_m)) throw Error(ErrorCode::InvalidArgument, "big_m must be > 0");
  check_half_width(position_bound, "position");
  check_half_width(velocity_bound, "velocity");
  check_half_width(control_bound, "control");
}

void MinThrustConfig::validate() const {
  check_horizon(horizon);
  if (!nonnegative(state_weight) || !nonnegative(control_weight)) {
    throw Error(ErrorCode::InvalidArgument, "weights must be finite and nonnegative");
  }
  if (!positive(v_min) || !positive(v_max) || !(v_min < v_max)) {
    throw Error(ErrorCode::InvalidArgument, "thrust bounds need 0 < v_min < v_max");
  }
  check_half_width(terminal_position, "terminal position");
  check_half_width(terminal_velocity, "terminal velocity");
}

MiqpProblem build_switching_thrusters(const VectorXd& x_k, const SwitchingThrustersConfig& cfg,
                                      const Plant& plant) {
  cfg.validate();
  check_state(x_k);
  const Index N = cfg.horizon;
  const Index zw = cfg.per_axis_gating ? 3 : 1;
  const LayoutBlock zeta{"zeta", BlockKind::State, 0, 6, N};
  const LayoutBlock v1{"v1", BlockKind::Control, 6 * N, 3, N};
  const LayoutBlock v2{"v2", BlockKind::Control, 9 * N, 3, N};
  const LayoutBlock z{"z", BlockKind::Binary, 12 * N, zw, N};
  Assembly a(12 * N + zw * N);

  for (Index t = 0; t < N; ++t) {
    for (Index i = 0; i < 6; ++i) {
      const Index j = zeta.index(t, i);
      a.H(j, j) = 2.0 * cfg.alpha_state;
      const double w = i < 3 ? cfg.position_bound : cfg.velocity_bound;
      a.box(zeta, t, i, -w, w);
    }
    for (Index i = 0; i < 3; ++i) {
      a.H(v1.index(t, i), v1.index(t, i)) = 2.0 * cfg.alpha_v1;
      a.H(v2.index(t, i), v2.index(t, i)) = 2.0 * cfg.alpha_v2;
      a.box(v1, t, i, -cfg.control_bound, cfg.control_bound);
      a.box(v2, t, i, -cfg.control_bound, cfg.control_bound);
    }
    for (Index i = 0; i < zw; ++i) a.box(z, t, i, 0.0, 1.0);
  }

  // |v1| <= M z and |v2| <= M (1 - z), componentwise.
  const double M = cfg.big_m;
  for (Index t = 0; t < N; ++t) {
    for (Index i = 0; i < 3; ++i) {
      const Index zj = z.index(t, cfg.per_axis_gating ? i : 0);
      for (double sign : {1.0, -1.0}) {
        VectorXd r = a.row();
        r[v1.index(t, i)] = sign;
        r[zj] = -M;
        a.ineq.emplace_back(std::move(r), 0.0);
      }
      for (double sign : {1.0, -1.0}) {
        VectorXd r = a.row();
        r[v2.index(t, i)] = sign;
        r[zj] = M;
        a.ineq.emplace_back(std::move(r), M);
      }
    }
  }

  a.dynamics(zeta, {&v1, &v2}, {&plant.B1, &plant.B2}, plant.A, x_k);
  for (Index i = 0; i < 6; ++i) {
    VectorXd r = a.row();
    r[zeta.index(N - 1, i)] = 1.0;
    a.eq.emplace_back(std::move(r), 0.0);
  }
  return std::move(a).finish({zeta, v1, v2, z}, N);
}

MiqpProblem build_min_thrust(const VectorXd& x_k, const MinThrustConfig& cfg, const Plant& plant) {
  cfg.validate();
  check_state(x_k);
  const Index N = cfg.horizon;
  const LayoutBlock zeta{"zeta", BlockKind::State, 0, 6, N};
  const LayoutBlock v{"v", BlockKind::Control, 6 * N, 3, N};
  const LayoutBlock vp{"v_plus", BlockKind::Auxiliary, 9 * N, 3, N};
  const LayoutBlock vm{"v_minus", BlockKind::Auxiliary, 12 * N, 3, N};
  const LayoutBlock bin{"b", BlockKind::Binary, 15 * N, 7, N};
  Assembly a(22 * N);
  const double vmax = cfg.v_max;

  for (Index t = 0; t < N; ++t) {
    for (Index i = 0; i < 6; ++i) a.H(zeta.index(t, i), zeta.index(t, i)) = 2.0 * cfg.state_weight;
    for (Index i = 0; i < 3; ++i) {
      a.H(v.index(t, i), v.index(t, i)) = 2.0 * cfg.control_weight;
      a.box(v, t, i, -vmax, vmax);
      a.box(vp, t, i, 0.0, vmax);
      a.box(vm, t, i, 0.0, vmax);
    }
    for (Index i = 0; i < 7; ++i) a.box(bin, t, i, 0.0, 1.0);
  }
  for (Index i = 0; i < 6; ++i) {
    const double w = i < 3 ? cfg.terminal_position : cfg.terminal_velocity;
    a.box(zeta, N - 1, i, -w, w);
  }

  for (Index t = 0; t < N; ++t) {
    const Index zt = bin.index(t, 0);
    for (Index i = 0; i < 3; ++i) {
      const Index sp = bin.index(t, 1 + i), sm = bin.index(t, 4 + i);
      VectorXd r = a.row();
      r[vp.index(t, i)] = 1.0;
      r[sp] = -vmax;
      a.ineq.emplace_back(std::move(r), 0.0);
      r = a.row();
      r[vm.index(t, i)] = 1.0;
      r[sm] = -vmax;
      a.ineq.emplace_back(std::move(r), 0.0);
      r = a.row();
      r[sp] = 1.0;
      r[sm] = 1.0;
      r[zt] = -1.0;
      a.ineq.emplace_back(std::move(r), 0.0);
    }
    // v_min z <= sum(v+ + v-) <= v_max z
    VectorXd sum = a.row();
    for (Index i = 0; i < 3; ++i) sum[vp.index(t, i)] = sum[vm.index(t, i)] = 1.0;
    VectorXd r = -sum;
    r[zt] = cfg.v_min;
    a.ineq.emplace_back(std::move(r), 0.0);
    r = sum;
    r[zt] = -vmax;
    a.ineq.emplace_back(std::move(r), 0.0);
  }

  a.dynamics(zeta, {&v}, {&plant.B2}, plant.A, x_k);
  for (Index t = 0; t < N; ++t) {
    for (Index i = 0; i < 3; ++i) {
      VectorXd r = a.row();
      r[v.index(t, i)] = 1.0;
      r[vp.index(t, i)] = -1.0;
      r[vm.index(t, i)] = 1.0;
      a.eq.emplace_back(std::move(r), 0.0);
    }
  }
  return std::move(a).finish({zeta, v, vp, vm, bin}, N);
}

VectorXd extract_control(const VectorXd& y, const MiqpProblem& problem, Example example) {
  if (y.size() != problem.num_vars()) {
    throw Error(ErrorCode::LayoutMismatch, "y has " + std::to_string(y.size()) + " entries, layout expects " +
                                               std::to_string(problem.num_vars()));
  }
  const auto blocks = control_blocks(problem, example);
  VectorXd u(3 * static_cast<Index>(blocks.size()));
  for (size_t k = 0; k < blocks.size(); ++k) u.segment<3>(3 * k) = y.segment<3>(blocks[k]->start);
  return u;
}

void embed_control(VectorXd& y, const MiqpProblem& problem, Example example, const VectorXd& u) {
  const auto blocks = control_blocks(problem, example);
  if (y.size() != problem.num_vars() || u.size() != 3 * static_cast<Index>(blocks.size())) {
    throw Error(ErrorCode::LayoutMismatch, "embed_control: size mismatch");
  }
  for (size_t k = 0; k < blocks.size(); ++k) y.segment<3>(blocks[k]->start) = u.segment<3>(3 * k);
}

std::vector<MatrixXd> control_channels(Example example, const Plant& plant) {
  if (example == Example::SwitchingThrusters) return {plant.B1, plant.B2};
  return {plant.B2};
}

VectorXd shift_warm_start(const MiqpProblem& problem, const VectorXd& y, const cw::Matrix6d& A) {
  if (y.size() != problem.num_vars() || problem.layout().empty()) {
    throw Error(ErrorCode::LayoutMismatch, "shift_warm_start needs y matching a laid-out problem");
  }
  VectorXd out = VectorXd::Zero(y.size());
  for (const auto& b : problem.layout()) {
    const Index w = b.stage_width;
    if (b.stages > 1) out.segment(b.start, w * (b.stages - 1)) = y.segment(b.start + w, w * (b.stages - 1));
    if (b.kind == BlockKind::State && w == 6)
      out.segment<6>(b.index(b.stages - 1, 0)) = A * y.segment<6>(b.index(b.stages - 1, 0));
  }
  return out;
}

}  // namespace miqp_mpc

#include "miqp_mpc/cw_dynamics.hpp"

#include "miqp_mpc/error.hpp"

#include <cmath>
#include <string>

namespace miqp_mpc::cw {

namespace {

bool positive_finite(double v) { return std::isfinite(v) && v > 0.0; }

// Columns 4..6 of the STM, i.e. [Phi_rv; Phi_vv].
Matrix63d velocity_columns(double n, double t) {
  const double w = n * t;
  const double c = std::cos(w);
  const double s = std::sin(w);

  Matrix63d m = Matrix63d::Zero();
  m(0, 0) = s / n;
  m(0, 1) = 2.0 * (1.0 - c) / n;
  m(1, 0) = 2.0 * (c - 1.0) / n;
  m(1, 1) = (4.0 * s - 3.0 * w) / n;
  m(2, 2) = s / n;

  m(3, 0) = c;
  m(3, 1) = 2.0 * s;
  m(4, 0) = -2.0 * s;
  m(4, 1) = 4.0 * c - 3.0;
  m(5, 2) = c;
  return m;
}

}  // namespace

void CwParams::validate() const {
  if (!positive_finite(orbital_rate) || !positive_finite(mass) || !positive_finite(dt)) {
    throw Error(ErrorCode::InvalidArgument,
                "orbital_rate, mass and dt must be finite and > 0 (got n_L=" +
                    std::to_string(orbital_rate) + ", m_s=" + std::to_string(mass) +
                    ", dt=" + std::to_string(dt) + ")");
  }
}

Matrix6d stm(const CwParams& params, double dt) {
  if (!(dt >= 0.0)) throw Error(ErrorCode::InvalidArgument, "stm requires dt >= 0");
  const double n = params.orbital_rate;
  const double w = n * dt;
  const double c = std::cos(w);
  const double s = std::sin(w);

  Matrix6d phi = Matrix6d::Zero();
  // Phi_rr
  phi(0, 0) = 4.0 - 3.0 * c;
  phi(1, 0) = 6.0 * (s - w);
  phi(1, 1) = 1.0;
  phi(2, 2) = c;
  // Phi_vr
  phi(3, 0) = 3.0 * n * s;
  phi(4, 0) = 6.0 * n * (c - 1.0);
  phi(5, 2) = -n * s;
  // Phi_rv and Phi_vv
  phi.rightCols<3>() = velocity_columns(n, dt);
  return phi;
}

Matrix63d b_impulsive(const CwParams& params, double dt) {
  return stm(params, dt).rightCols<3>();
}

Matrix63d b_electric(const CwParams& params, double dt, int quadrature_steps) {
  if (quadrature_steps < 2 || quadrature_steps % 2 != 0) {
    throw Error(ErrorCode::OddStepCount,
                "quadrature_steps must be even and >= 2, got " + std::to_string(quadrature_steps));
  }
  if (!(dt >= 0.0)) throw Error(ErrorCode::InvalidArgument, "b_electric requires dt >= 0");
  if (dt == 0.0) return Matrix63d::Zero();

  const double n = params.orbital_rate;
  const double h = dt / quadrature_steps;
  Matrix63d acc = velocity_columns(n, 0.0) + velocity_columns(n, dt);
  for (int i = 1; i < quadrature_steps; ++i) {
    acc += (i % 2 == 1 ? 4.0 : 2.0) * velocity_columns(n, i * h);
  }
  return acc * (h / 3.0) / params.mass;
}

Eigen::VectorXd propagate(const Eigen::VectorXd& state, const Eigen::VectorXd& u,
                          const Eigen::MatrixXd& A, std::span<const Eigen::MatrixXd> channels) {
  if (A.rows() != A.cols() || A.cols() != state.size()) {
    throw Error(ErrorCode::DimensionMismatch, "A must be square and match the state size");
  }
  Eigen::Index total = 0;
  for (const auto& B : channels) {
    if (B.rows() != A.rows()) {
      throw Error(ErrorCode::DimensionMismatch, "control matrix row count must match the state");
    }
    total += B.cols();
  }
  if (total != u.size()) {
    throw Error(ErrorCode::DimensionMismatch,
                "control vector has " + std::to_string(u.size()) + " entries, channels expect " +
                    std::to_string(total));
  }

  Eigen::VectorXd next = A * state;
  Eigen::Index offset = 0;
  for (const auto& B : channels) {
    next.noalias() += B * u.segment(offset, B.cols());
    offset += B.cols();
  }
  return next;
}

}  // namespace miqp_mpc::cw

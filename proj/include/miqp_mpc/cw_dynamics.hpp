#pragma once

/**
 * @file
 * @brief Clohessy-Wiltshire relative motion about a circular target orbit.
 *
 * State layout is position (3, km) followed by velocity (3, km/s) in the
 * rotating frame: x radial, y along-track, z out-of-plane. Impulsive inputs
 * are velocity increments in km/s; electric inputs are thrust values u such
 * that u / mass is an acceleration in km/s^2.
 */

#include <Eigen/Dense>

#include <span>

namespace miqp_mpc::cw {

using Matrix6d = Eigen::Matrix<double, 6, 6>;
using Matrix63d = Eigen::Matrix<double, 6, 3>;
using Vector6d = Eigen::Matrix<double, 6, 1>;

struct CwParams {
  double orbital_rate = 1.13e-3;  ///< n_L [1/s]
  double mass = 100.0;            ///< spacecraft mass [kg]
  double dt = 300.0;              ///< sample period [s]

  /// Throws InvalidArgument unless every field is finite and strictly positive.
  void validate() const;
};

/// State transition matrix over an interval of length `dt` (dt >= 0).
Matrix6d stm(const CwParams& params, double dt);

/// Control matrix of an impulsive velocity change applied at the start of the interval.
Matrix63d b_impulsive(const CwParams& params, double dt);

/// Control matrix of constant thrust held over the interval, integrated with
/// composite Simpson using `quadrature_steps` (even, >= 2) subintervals.
Matrix63d b_electric(const CwParams& params, double dt, int quadrature_steps = 100);

/// x+ = A x + sum_i B_i u_i, where `u` concatenates the per-channel inputs in
/// the order of `channels`.
Eigen::VectorXd propagate(const Eigen::VectorXd& state, const Eigen::VectorXd& u,
                          const Eigen::MatrixXd& A, std::span<const Eigen::MatrixXd> channels);

}  // namespace miqp_mpc::cw

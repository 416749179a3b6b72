#pragma once

/**
 * @file
 * @brief Horizon-stacked MIQP instances for the two rendezvous examples.
 *
 * Switching thrusters: y = [zeta (6N), v1 (3N), v2 (3N), z (N or 3N)], where v1
 * drives the impulsive channel, v2 the electric channel, and z = 1 selects the
 * impulsive thruster. Minimum thrust: y = [zeta (6N), v (3N), v+ (3N), v- (3N),
 * b (7N)] with b_k = [z_k, s+_k (3), s-_k (3)]. Stage t of zeta is the predicted
 * state after t + 1 steps.
 */

#include "miqp_mpc/cw_dynamics.hpp"
#include "miqp_mpc/miqp_problem.hpp"

#include <Eigen/Dense>

#include <vector>

namespace miqp_mpc {

enum class Example { SwitchingThrusters, MinThrust };

const char* to_string(Example example);

/// Discretized plant shared by the predictor and the simulator.
struct Plant {
  cw::Matrix6d A;
  cw::Matrix63d B1;  ///< impulsive channel
  cw::Matrix63d B2;  ///< electric channel
};

Plant make_plant(const cw::CwParams& params, int quadrature_steps = 100);

struct SwitchingThrustersConfig {
  Eigen::Index horizon = 15;
  double alpha_v1 = 1.0;
  double alpha_v2 = 0.1;
  double alpha_state = 1e-4;
  double big_m = 0.1;
  double position_bound = 8000.0;  ///< half-width of the position box [km]
  double velocity_bound = 1.0;     ///< half-width of the velocity box [km/s]
  double control_bound = 0.1;      ///< half-width of the box on v1 and v2
  bool per_axis_gating = false;    ///< one binary per axis instead of per step

  void validate() const;
};

struct MinThrustConfig {
  Eigen::Index horizon = 15;
  double state_weight = 1e-7;    ///< P = state_weight * I
  double control_weight = 1e2;   ///< R = control_weight * I
  double v_min = 1e-4;
  double v_max = 5e-3;
  double terminal_position = 0.1;  ///< half-width of the terminal position box [km]
  double terminal_velocity = 1e-3; ///< half-width of the terminal velocity box [km/s]

  void validate() const;
};

/// Objective  sum_k a_v1 |v1_k|^2 + a_v2 |v2_k|^2 + a_1 |zeta_k|^2  under the
/// dynamics, big-M gating, terminal zeta_N = 0 and the state/control boxes.
MiqpProblem build_switching_thrusters(const Eigen::VectorXd& x_k, const SwitchingThrustersConfig& config,
                                      const Plant& plant);

/// Objective  zeta' P zeta + v' R v  under the electric-thrust dynamics, the
/// exact l1 gate  z_k v_min <= |v_k|_1 <= z_k v_max  and the terminal box.
MiqpProblem build_min_thrust(const Eigen::VectorXd& x_k, const MinThrustConfig& config, const Plant& plant);

/// kappa(y): [v1_0; v2_0] for switching thrusters, v_0 for minimum thrust.
/// Throws LayoutMismatch when y or the layout does not fit the example.
Eigen::VectorXd extract_control(const Eigen::VectorXd& y, const MiqpProblem& problem, Example example);

/// Writes u into the stage-0 control entries of y; inverse of extract_control.
void embed_control(Eigen::VectorXd& y, const MiqpProblem& problem, Example example, const Eigen::VectorXd& u);

/// Plant input matrices in the order of extract_control's output.
std::vector<Eigen::MatrixXd> control_channels(Example example, const Plant& plant);

/// Warm start for the next sample: every block moves one stage earlier and the
/// freed last stage coasts (state blocks get A times the old last state, all
/// other blocks get 0). Dynamics rows stay satisfied when they held for y.
Eigen::VectorXd shift_warm_start(const MiqpProblem& problem, const Eigen::VectorXd& y, const cw::Matrix6d& A);

}  // namespace miqp_mpc

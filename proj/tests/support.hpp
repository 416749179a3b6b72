#pragma once

// Shared fixtures for the unit tests and the acceptance binary.

#include "miqp_mpc/bnb.hpp"
#include "oracles/miqp_enum.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <vector>

namespace support {

using Eigen::MatrixXd;
using Eigen::VectorXd;

inline constexpr double kInf = std::numeric_limits<double>::infinity();

inline miqp_mpc::MiqpProblem to_miqp(const oracle::MiqpInstance& inst) {
  const auto n = inst.qp.c.size();
  VectorXd lo = VectorXd::Constant(n, -kInf), hi = VectorXd::Constant(n, kInf);
  for (auto j : inst.binaries) {
    lo[j] = 0.0;
    hi[j] = 1.0;
  }
  return miqp_mpc::MiqpProblem(miqp_mpc::QpProblem(inst.qp.H, inst.qp.c, inst.qp.C, inst.qp.b, inst.qp.E,
                                                   inst.qp.e, lo, hi, inst.qp.constant),
                               inst.binaries);
}

/// min (y - a)^2 with y binary.
inline miqp_mpc::MiqpProblem single_binary(double a) {
  oracle::MiqpInstance inst;
  inst.qp.H = MatrixXd::Constant(1, 1, 2.0);
  inst.qp.c = VectorXd::Constant(1, -2.0 * a);
  inst.qp.C.resize(0, 1);
  inst.qp.E.resize(0, 1);
  inst.qp.constant = a * a;
  inst.binaries = {0};
  return to_miqp(inst);
}

/// min (y0 - 0.6)^2 + (y1 - 0.7)^2 s.t. y0 + y1 <= 1.5, both binary.
/// Patterns: (0,0) 0.85, (1,0) 0.65, (0,1) 0.45, (1,1) infeasible.
inline oracle::MiqpInstance two_binary_data() {
  oracle::MiqpInstance inst;
  inst.qp.H = 2.0 * MatrixXd::Identity(2, 2);
  inst.qp.c = VectorXd(2);
  inst.qp.c << -1.2, -1.4;
  inst.qp.C = MatrixXd::Ones(1, 2);
  inst.qp.b = VectorXd::Constant(1, 1.5);
  inst.qp.E.resize(0, 2);
  inst.qp.constant = 0.85;
  inst.binaries = {0, 1};
  return inst;
}

inline miqp_mpc::MiqpProblem two_binary_instance() { return to_miqp(two_binary_data()); }

/// Three binary items and two continuous variables sharing a capacity row.
inline oracle::MiqpInstance knapsack_instance() {
  oracle::MiqpInstance inst;
  VectorXd t(5);
  t << 0.8, 0.7, 0.6, 1.0, -0.5;
  inst.qp.H = 2.0 * MatrixXd::Identity(5, 5);
  inst.qp.c = -2.0 * t;
  inst.qp.constant = t.squaredNorm();
  inst.qp.C = MatrixXd::Zero(2, 5);
  inst.qp.C.row(0) << 3.0, 2.0, 2.0, 1.0, 0.0;
  inst.qp.C.row(1) << 0.0, 0.0, 0.0, 1.0, -1.0;
  inst.qp.b = VectorXd(2);
  inst.qp.b << 4.0, 1.2;
  inst.qp.E.resize(0, 5);
  inst.binaries = {0, 1, 2};
  return inst;
}

inline miqp_mpc::BnbOptions tight() {
  miqp_mpc::BnbOptions o;
  o.qp_tolerances = {1e-9, 1e-9};
  return o;
}

struct Step {
  int node;
  miqp_mpc::NodeAction action;
  double psi;  // NAN: not compared
};

inline bool log_matches(const std::vector<miqp_mpc::TreeLogEntry>& log, const std::vector<Step>& expect,
                        double tol = 1e-6) {
  if (log.size() != expect.size()) return false;
  for (size_t k = 0; k < log.size(); ++k) {
    if (log[k].node_id != expect[k].node || log[k].action != expect[k].action) return false;
    if (!std::isnan(expect[k].psi) && !(std::abs(log[k].psi - expect[k].psi) <= tol)) return false;
  }
  return true;
}

/// Hand trace of the two-binary instance under DepthFirst with an ample budget.
inline std::vector<Step> two_binary_depth_first_trace() {
  using miqp_mpc::NodeAction;
  return {{0, NodeAction::Solved, 0.0},     {0, NodeAction::Branched, 0.0},
          {1, NodeAction::Solved, 0.36},    {2, NodeAction::PrunedDepthFirst, NAN},
          {1, NodeAction::Branched, 0.36},  {3, NodeAction::Solved, 0.85},
          {4, NodeAction::PrunedDepthFirst, NAN}};
}

/// Hand trace of the two-binary instance under BestFirst with an ample budget.
inline std::vector<Step> two_binary_best_first_trace() {
  using miqp_mpc::NodeAction;
  return {{0, NodeAction::Solved, 0.0},        {0, NodeAction::Branched, 0.0},
          {1, NodeAction::Solved, 0.36},       {1, NodeAction::Branched, 0.36},
          {2, NodeAction::Solved, 0.2},        {2, NodeAction::Branched, 0.2},
          {5, NodeAction::Solved, 0.65},       {6, NodeAction::Solved, NAN},
          {6, NodeAction::PrunedInfeasible, NAN}, {3, NodeAction::Solved, 0.85},
          {3, NodeAction::PrunedBound, 0.85},  {4, NodeAction::Solved, 0.45}};
}

inline bool every_branch_has_two_children(const std::vector<miqp_mpc::TreeLogEntry>& log) {
  std::map<int, std::vector<int>> kids;
  for (const auto& e : log)
    if (e.parent_id >= 0) {
      auto& v = kids[e.parent_id];
      if (std::find(v.begin(), v.end(), e.node_id) == v.end()) v.push_back(e.node_id);
    }
  for (const auto& e : log)
    if (e.action == miqp_mpc::NodeAction::Branched && kids[e.node_id].size() != 2) return false;
  return true;
}

}  // namespace support

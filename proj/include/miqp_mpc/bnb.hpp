#pragma once

/**
 * @file
 * @brief Iteration-limited branch-and-bound over binary variables.
 *
 * Nodes are numbered in creation order. The main loop solves at most i_b
 * nodes; if nodes remain, the two oldest unsolved ones receive a final solve
 * without further branching, so at most i_b + 2 node QPs run per call.
 */

#include "miqp_mpc/miqp_problem.hpp"
#include "miqp_mpc/qp.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace miqp_mpc {

enum class PruneRule { DepthFirst, BestFirst };
enum class MiqpStatus { IntegralOptimal, IntegralFeasible, RelaxedOnly, Infeasible };
enum class NodeAction {
  Solved,
  PrunedInfeasible,
  PrunedBound,
  PrunedDepthFirst,
  Branched,
  FinalSolve,
  Unexplored,  ///< created but never solved when the budget ran out
};

const char* to_string(PruneRule rule);
const char* to_string(MiqpStatus status);
const char* to_string(NodeAction action);

constexpr double kIncumbentSentinel = 1e18;

struct BnbNode {
  int id = 0;
  int parent_id = -1;
  int depth = 0;
  std::map<Eigen::Index, int> pinned;  ///< binary index -> 0 or 1
  std::optional<QpResult> relaxed_result;
  bool alive = true;
  bool solved = false;
  double parent_objective = 0.0;  ///< exploration key under BestFirst
};

struct TreeLogEntry {
  int node_id;
  int parent_id;
  int depth;
  NodeAction action;
  double psi;           ///< node QP objective, nan when unsolved
  double residual_inf;  ///< node QP primal residual, nan when unsolved
};

struct Incumbent {
  Eigen::VectorXd y_best;
  double psi_best = kIncumbentSentinel;
  bool integral = false;
  int source_node = -1;  ///< -1 for a warm start
};

struct BnbTree {
  std::vector<BnbNode> nodes;
  std::vector<TreeLogEntry> log;

  int add_node(BnbNode node);
  void record(int id, NodeAction action);
  /// Unsolved alive nodes in creation order.
  std::vector<int> frontier() const;
};

struct BnbOptions {
  QpTolerances qp_tolerances;
  QpSolverOptions qp_options;
  double integrality_tol = 1e-6;
  /// Warm incumbents with violation above this are used only as starting points.
  double warm_feasibility_tol = 1e-6;
};

/// Bookkeeping that prune() updates besides the incumbent.
struct PruneState {
  std::optional<Incumbent> relaxed_fallback;  ///< best non-integral iterate
  std::vector<double> incumbent_history;      ///< psi_best after each update
};

struct MiqpResult {
  Eigen::VectorXd y;
  double psi = kIncumbentSentinel;
  MiqpStatus status = MiqpStatus::Infeasible;
  std::int64_t bnb_iterations_used = 0;
  std::int64_t qp_iterations_total = 0;
  int max_node_qp_iterations = 0;
  std::vector<TreeLogEntry> tree_log;
  std::vector<double> incumbent_history;
  double violation = 0.0;  ///< l-inf constraint violation of y
};

/// Children pin the lowest-index unpinned binary to 0 (first) and 1.
/// Throws NoUnpinnedBinary when every binary is pinned.
std::vector<BnbNode> branch(const MiqpProblem& problem, const BnbNode& node, int first_child_id);

/// Applies the prune logic to a freshly solved node: infeasible nodes die;
/// otherwise an integral iterate (binaries within tol of {0,1}) is rounded
/// and replaces the incumbent if its objective is lower, and a fractional one
/// is kept as a fallback. DepthFirst then kills the unsolved sibling;
/// BestFirst kills the node when its objective is not below the incumbent's.
void prune(const MiqpProblem& problem, BnbTree& tree, int node_id, Incumbent& incumbent,
           PruneRule rule, PruneState& state, const BnbOptions& options = {});

MiqpResult solve_miqp(const MiqpProblem& problem, std::int64_t i_b, int i_qp, PruneRule rule,
                      const std::optional<Incumbent>& warm = std::nullopt,
                      const BnbOptions& options = {});

/// One line per entry: node_id,parent_id,depth,action,psi,residual_inf.
std::string format_tree_log(const std::vector<TreeLogEntry>& log);

}  // namespace miqp_mpc

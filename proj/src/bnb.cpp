#include "miqp_mpc/bnb.hpp"

#include "miqp_mpc/error.hpp"
#include "miqp_mpc/text.hpp"

#include <cmath>
#include <limits>
#include <sstream>

namespace miqp_mpc {

using Eigen::Index;
using Eigen::VectorXd;

const char* to_string(PruneRule rule) {
  return rule == PruneRule::DepthFirst ? "depth_first" : "best_first";
}

const char* to_string(MiqpStatus status) {
  switch (status) {
    case MiqpStatus::IntegralOptimal: return "IntegralOptimal";
    case MiqpStatus::IntegralFeasible: return "IntegralFeasible";
    case MiqpStatus::RelaxedOnly: return "RelaxedOnly";
    case MiqpStatus::Infeasible: return "Infeasible";
  }
  return "Unknown";
}

const char* to_string(NodeAction action) {
  switch (action) {
    case NodeAction::Solved: return "solved";
    case NodeAction::PrunedInfeasible: return "pruned_infeasible";
    case NodeAction::PrunedBound: return "pruned_bound";
    case NodeAction::PrunedDepthFirst: return "pruned_depthfirst";
    case NodeAction::Branched: return "branched";
    case NodeAction::FinalSolve: return "final_solve";
    case NodeAction::Unexplored: return "unexplored";
  }
  return "unknown";
}

int BnbTree::add_node(BnbNode node) {
  node.id = static_cast<int>(nodes.size());
  nodes.push_back(std::move(node));
  return nodes.back().id;
}

void BnbTree::record(int id, NodeAction action) {
  const BnbNode& n = nodes.at(id);
  const double nan = std::numeric_limits<double>::quiet_NaN();
  const bool has = n.relaxed_result.has_value();
  log.push_back({n.id, n.parent_id, n.depth, action, has ? n.relaxed_result->objective : nan,
                 has ? n.relaxed_result->primal_residual_inf : nan});
}

std::vector<int> BnbTree::frontier() const {
  std::vector<int> out;
  for (const auto& n : nodes)
    if (n.alive && !n.solved) out.push_back(n.id);
  return out;
}

std::vector<BnbNode> branch(const MiqpProblem& problem, const BnbNode& node, int first_child_id) {
  for (Index j : problem.binary_indices()) {
    if (node.pinned.count(j)) continue;
    std::vector<BnbNode> children(2);
    for (int v = 0; v < 2; ++v) {
      BnbNode& c = children[v];
      c.id = first_child_id + v;
      c.parent_id = node.id;
      c.depth = node.depth + 1;
      c.pinned = node.pinned;
      c.pinned[j] = v;
      c.parent_objective = node.relaxed_result ? node.relaxed_result->objective : 0.0;
    }
    return children;
  }
  throw Error(ErrorCode::NoUnpinnedBinary,
              "node " + std::to_string(node.id) + " has every binary pinned");
}

namespace {

bool better_fallback(const MiqpProblem& problem, const VectorXd& y, const Incumbent& cur) {
  const double v = problem.violation(y);
  const double cv = problem.violation(cur.y_best);
  return v < cv || (v == cv && problem.objective(y) < cur.psi_best);
}

// Incumbent/fallback update shared by prune() and the final solves.
void update_incumbent(const MiqpProblem& problem, const BnbNode& node, Incumbent& incumbent,
                      PruneState& state, const BnbOptions& options) {
  const VectorXd& y = node.relaxed_result->iterate;
  if (problem.integral(y, options.integrality_tol)) {
    VectorXd yr = problem.round_binaries(y);
    const double psi = problem.objective(yr);
    if (psi < incumbent.psi_best) {
      incumbent = Incumbent{std::move(yr), psi, true, node.id};
      state.incumbent_history.push_back(psi);
    }
  } else if (!state.relaxed_fallback || better_fallback(problem, y, *state.relaxed_fallback)) {
    state.relaxed_fallback = Incumbent{y, problem.objective(y), false, node.id};
  }
}

bool has_incumbent(const Incumbent& inc) { return inc.psi_best < kIncumbentSentinel; }

}  // namespace

void prune(const MiqpProblem& problem, BnbTree& tree, int node_id, Incumbent& incumbent,
           PruneRule rule, PruneState& state, const BnbOptions& options) {
  BnbNode& node = tree.nodes.at(node_id);
  if (!node.relaxed_result) {
    throw Error(ErrorCode::InvalidArgument, "prune requires a solved node");
  }
  if (node.relaxed_result->status == QpStatus::PrimalInfeasible) {
    node.alive = false;
    tree.record(node_id, NodeAction::PrunedInfeasible);
    return;
  }

  if (rule == PruneRule::BestFirst && has_incumbent(incumbent)) {
    const double psi = node.relaxed_result->objective;
    const double bound = incumbent.psi_best - 1e-9 * (1.0 + std::abs(incumbent.psi_best));
    if (psi > bound) {
      node.alive = false;
      tree.record(node_id, NodeAction::PrunedBound);
      return;
    }
  }

  update_incumbent(problem, node, incumbent, state, options);

  if (rule == PruneRule::DepthFirst && node.parent_id >= 0) {
    for (auto& other : tree.nodes) {
      if (other.parent_id == node.parent_id && other.id != node.id && other.alive && !other.solved) {
        other.alive = false;
        tree.record(other.id, NodeAction::PrunedDepthFirst);
      }
    }
  }
}

namespace {

class Search {
 public:
  Search(const MiqpProblem& problem, int i_qp, PruneRule rule, const BnbOptions& options)
      : pb_(problem), i_qp_(i_qp), rule_(rule), opt_(options) {}

  MiqpResult run(std::int64_t i_b, const std::optional<Incumbent>& warm) {
    const Index n = pb_.num_vars();
    if (warm && warm->y_best.size() == n && warm->y_best.allFinite()) {
      start_ = warm->y_best;
      if (pb_.integral(warm->y_best, opt_.integrality_tol) &&
          pb_.violation(pb_.round_binaries(warm->y_best)) <= opt_.warm_feasibility_tol) {
        VectorXd yr = pb_.round_binaries(warm->y_best);
        const double psi = pb_.objective(yr);
        incumbent_ = Incumbent{std::move(yr), psi, true, -1};
        state_.incumbent_history.push_back(psi);
      }
    } else if (warm && warm->y_best.size() != 0 && warm->y_best.size() != n) {
      throw Error(ErrorCode::DimensionMismatch, "warm incumbent has wrong size");
    }

    BnbNode root;
    root.parent_objective = -std::numeric_limits<double>::infinity();
    tree_.add_node(std::move(root));

    std::int64_t solved = 0;
    while (solved < i_b) {
      const auto fr = tree_.frontier();
      if (fr.empty()) break;
      const int id = select(fr);
      solve_node(id);
      ++solved;
      tree_.record(id, NodeAction::Solved);
      prune(pb_, tree_, id, incumbent_, rule_, state_, opt_);

      const BnbNode& node = tree_.nodes[id];
      const bool fathomed = node.relaxed_result->status == QpStatus::Optimal &&
                            pb_.integral(node.relaxed_result->iterate, opt_.integrality_tol);
      if (node.alive && !fathomed && static_cast<Index>(node.pinned.size()) < pb_.num_binaries()) {
        auto children = branch(pb_, node, static_cast<int>(tree_.nodes.size()));
        tree_.record(id, NodeAction::Branched);
        for (auto& c : children) tree_.add_node(std::move(c));
      }
    }

    auto fr = tree_.frontier();
    const bool exhausted = fr.empty();
    for (size_t k = 0; k < fr.size() && k < 2; ++k) {
      const int id = fr[k];
      solve_node(id);
      ++solved;
      tree_.record(id, NodeAction::FinalSolve);
      BnbNode& node = tree_.nodes[id];
      if (node.relaxed_result->status == QpStatus::PrimalInfeasible) {
        node.alive = false;
        tree_.record(id, NodeAction::PrunedInfeasible);
      } else {
        update_incumbent(pb_, node, incumbent_, state_, opt_);
      }
    }
    for (int id : tree_.frontier()) tree_.record(id, NodeAction::Unexplored);

    MiqpResult out;
    out.bnb_iterations_used = solved;
    out.qp_iterations_total = qp_total_;
    out.max_node_qp_iterations = max_node_iters_;
    out.incumbent_history = std::move(state_.incumbent_history);
    if (has_incumbent(incumbent_)) {
      out.y = incumbent_.y_best;
      out.psi = incumbent_.psi_best;
      out.status = (rule_ == PruneRule::BestFirst && exhausted && all_nodes_converged_)
                       ? MiqpStatus::IntegralOptimal
                       : MiqpStatus::IntegralFeasible;
    } else if (state_.relaxed_fallback && !proved_infeasible(exhausted)) {
      out.y = state_.relaxed_fallback->y_best;
      out.psi = pb_.objective(out.y);
      out.status = MiqpStatus::RelaxedOnly;
    } else {
      out.y = VectorXd::Zero(n);
      out.psi = std::numeric_limits<double>::infinity();
      out.status = MiqpStatus::Infeasible;
    }
    out.violation = pb_.violation(out.y);
    out.tree_log = std::move(tree_.log);
    return out;
  }

 private:
  int select(const std::vector<int>& fr) const {
    if (rule_ == PruneRule::DepthFirst) return fr.front();
    int best = fr.front();
    for (int id : fr) {
      const BnbNode& c = tree_.nodes[id];
      const BnbNode& b = tree_.nodes[best];
      const double tol = 1e-9 * (1.0 + std::abs(b.parent_objective));
      if (c.parent_objective < b.parent_objective - tol) {
        best = id;
      } else if (std::abs(c.parent_objective - b.parent_objective) <= tol && c.depth > b.depth) {
        best = id;
      }
    }
    return best;
  }

  // Every leaf died infeasible and nothing was cut by a heuristic or a limit.
  bool proved_infeasible(bool exhausted) const {
    if (!exhausted || !all_nodes_converged_) return false;
    for (const auto& e : tree_.log)
      if (e.action == NodeAction::PrunedDepthFirst || e.action == NodeAction::FinalSolve) return false;
    return true;
  }

  void solve_node(int id) {
    BnbNode& node = tree_.nodes[id];
    VectorXd lo = pb_.relaxation().lower();
    VectorXd hi = pb_.relaxation().upper();
    for (const auto& [j, v] : node.pinned) lo[j] = hi[j] = v;
    const QpProblem qp = pb_.relaxation().with_bounds(std::move(lo), std::move(hi));
    // every node starts from the warm vector alone; no solution is shared between nodes
    std::optional<QpWarmStart> ws;
    if (start_.size() > 0) ws = QpWarmStart{start_, {}};
    node.relaxed_result = solve_qp(qp, ws, i_qp_, opt_.qp_tolerances, opt_.qp_options);
    node.solved = true;
    qp_total_ += node.relaxed_result->iterations_used;
    max_node_iters_ = std::max(max_node_iters_, node.relaxed_result->iterations_used);
    if (node.relaxed_result->status == QpStatus::IterationLimited) all_nodes_converged_ = false;
  }

  const MiqpProblem& pb_;
  int i_qp_;
  PruneRule rule_;
  BnbOptions opt_;
  BnbTree tree_;
  Incumbent incumbent_;
  PruneState state_;
  VectorXd start_;
  std::int64_t qp_total_ = 0;
  int max_node_iters_ = 0;
  bool all_nodes_converged_ = true;
};

}  // namespace

MiqpResult solve_miqp(const MiqpProblem& problem, std::int64_t i_b, int i_qp, PruneRule rule,
                      const std::optional<Incumbent>& warm, const BnbOptions& options) {
  if (i_b < 1 || i_qp < 1) {
    throw Error(ErrorCode::InvalidArgument, "iteration limits must be >= 1 (i_b=" +
                                                std::to_string(i_b) + ", i_qp=" + std::to_string(i_qp) + ")");
  }
  Search search(problem, i_qp, rule, options);
  return search.run(i_b, warm);
}

std::string format_tree_log(const std::vector<TreeLogEntry>& log) {
  std::ostringstream out;
  for (const auto& e : log) {
    out << e.node_id << ',' << e.parent_id << ',' << e.depth << ',' << to_string(e.action) << ','
        << format_double(e.psi) << ',' << format_double(e.residual_inf) << '\n';
  }
  return out.str();
}

}  // namespace miqp_mpc

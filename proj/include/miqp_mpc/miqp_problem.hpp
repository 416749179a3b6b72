#pragma once

#include "miqp_mpc/qp.hpp"

#include <Eigen/Dense>

#include <iosfwd>
#include <string>
#include <vector>

namespace miqp_mpc {

enum class BlockKind { State, Control, Auxiliary, Binary };

const char* to_string(BlockKind kind);

/// Contiguous stage-major block of the decision vector: entry (stage t,
/// component i) lives at start + t * stage_width + i.
struct LayoutBlock {
  std::string name;
  BlockKind kind = BlockKind::Auxiliary;
  Eigen::Index start = 0;
  Eigen::Index stage_width = 0;
  Eigen::Index stages = 0;

  Eigen::Index size() const { return stage_width * stages; }
  Eigen::Index index(Eigen::Index stage, Eigen::Index component) const {
    return start + stage * stage_width + component;
  }
};

/// Parametric MIQP  min 1/2 y'Hy + c'y  s.t. Cy <= b, Ey = e0 + G x_k, bounds,
/// y_j binary for j in binary_indices. The relaxation holds the data for the
/// current x_k with binaries relaxed to [0, 1].
class MiqpProblem {
 public:
  /// Validates binary indices (sorted, unique, in range, bounds within [0, 1],
  /// inside a Binary block when a layout is given) and the layout tiling.
  MiqpProblem(QpProblem relaxation, std::vector<Eigen::Index> binary_indices,
              std::vector<LayoutBlock> layout = {}, Eigen::MatrixXd parameter_map = {},
              Eigen::Index horizon = 0);

  const QpProblem& relaxation() const { return relaxation_; }
  const std::vector<Eigen::Index>& binary_indices() const { return binaries_; }
  const std::vector<LayoutBlock>& layout() const { return layout_; }
  /// G in Ey = e0 + G x_k; empty when the problem is not parametric.
  const Eigen::MatrixXd& parameter_map() const { return parameter_map_; }
  Eigen::Index horizon() const { return horizon_; }
  Eigen::Index num_vars() const { return relaxation_.num_vars(); }
  Eigen::Index num_binaries() const { return static_cast<Eigen::Index>(binaries_.size()); }

  /// Problem 1 objective at y (no rounding).
  double objective(const Eigen::VectorXd& y) const { return relaxation_.objective(y); }
  /// l-inf constraint violation of y against the relaxation rows and bounds.
  double violation(const Eigen::VectorXd& y) const { return relaxation_.primal_residual(y); }
  /// All binaries within tol of {0, 1}.
  bool integral(const Eigen::VectorXd& y, double tol = 1e-6) const;
  /// Copy of y with binaries rounded to {0, 1}.
  Eigen::VectorXd round_binaries(const Eigen::VectorXd& y) const;

  /// Block by name; throws LayoutMismatch when absent.
  const LayoutBlock& block(const std::string& name) const;

 private:
  QpProblem relaxation_;
  std::vector<Eigen::Index> binaries_;
  std::vector<LayoutBlock> layout_;
  Eigen::MatrixXd parameter_map_;
  Eigen::Index horizon_;
};

/// Plain-text dump: header "n m p s", then H rows, c, C rows with b appended,
/// E rows with e appended, lo, hi, the binary indices, and the constant.
/// Infinite bounds print as inf / -inf.
void write_text(std::ostream& out, const MiqpProblem& problem);

/// Inverse of write_text (layout and parameter map are not serialized).
MiqpProblem read_text(std::istream& in);

}  // namespace miqp_mpc

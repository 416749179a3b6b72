#include "miqp_mpc/miqp_problem.hpp"

#include "miqp_mpc/error.hpp"
#include "miqp_mpc/text.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

namespace miqp_mpc {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

const char* to_string(BlockKind kind) {
  switch (kind) {
    case BlockKind::State: return "state";
    case BlockKind::Control: return "control";
    case BlockKind::Auxiliary: return "auxiliary";
    case BlockKind::Binary: return "binary";
  }
  return "unknown";
}

MiqpProblem::MiqpProblem(QpProblem relaxation, std::vector<Index> binary_indices,
                         std::vector<LayoutBlock> layout, MatrixXd parameter_map, Index horizon)
    : relaxation_(std::move(relaxation)),
      binaries_(std::move(binary_indices)),
      layout_(std::move(layout)),
      parameter_map_(std::move(parameter_map)),
      horizon_(horizon) {
  const Index n = relaxation_.num_vars();
  for (size_t k = 0; k < binaries_.size(); ++k) {
    const Index j = binaries_[k];
    if (j < 0 || j >= n) {
      throw Error(ErrorCode::LayoutMismatch, "binary index " + std::to_string(j) + " out of range");
    }
    if (k > 0 && binaries_[k - 1] >= j) {
      throw Error(ErrorCode::LayoutMismatch, "binary indices must be strictly increasing");
    }
    if (relaxation_.lower()[j] < 0.0 || relaxation_.upper()[j] > 1.0) {
      throw Error(ErrorCode::InvalidArgument,
                  "relaxed binary " + std::to_string(j) + " must have bounds inside [0, 1]");
    }
  }

  if (!layout_.empty()) {
    std::vector<const LayoutBlock*> sorted;
    for (const auto& b : layout_) sorted.push_back(&b);
    std::sort(sorted.begin(), sorted.end(),
              [](const LayoutBlock* a, const LayoutBlock* b) { return a->start < b->start; });
    Index next = 0;
    for (const auto* b : sorted) {
      if (b->start != next || b->stage_width < 0 || b->stages < 0) {
        throw Error(ErrorCode::LayoutMismatch, "layout block '" + b->name + "' does not tile y");
      }
      next += b->size();
    }
    if (next != n) {
      throw Error(ErrorCode::LayoutMismatch, "layout covers " + std::to_string(next) +
                                                 " entries, problem has " + std::to_string(n));
    }
    for (Index j : binaries_) {
      const bool inside = std::any_of(layout_.begin(), layout_.end(), [&](const LayoutBlock& b) {
        return b.kind == BlockKind::Binary && j >= b.start && j < b.start + b.size();
      });
      if (!inside) {
        throw Error(ErrorCode::LayoutMismatch,
                    "binary index " + std::to_string(j) + " lies outside every binary block");
      }
    }
  }
  if (parameter_map_.size() > 0 && parameter_map_.rows() != relaxation_.num_eq()) {
    throw Error(ErrorCode::DimensionMismatch, "parameter map must have one row per equality row");
  }
}

bool MiqpProblem::integral(const VectorXd& y, double tol) const {
  for (Index j : binaries_) {
    if (std::min(std::abs(y[j]), std::abs(y[j] - 1.0)) > tol) return false;
  }
  return true;
}

VectorXd MiqpProblem::round_binaries(const VectorXd& y) const {
  VectorXd out = y;
  for (Index j : binaries_) out[j] = y[j] >= 0.5 ? 1.0 : 0.0;
  return out;
}

const LayoutBlock& MiqpProblem::block(const std::string& name) const {
  for (const auto& b : layout_)
    if (b.name == name) return b;
  throw Error(ErrorCode::LayoutMismatch, "no layout block named '" + name + "'");
}

namespace {

void write_row(std::ostream& out, const Eigen::Ref<const VectorXd>& row) {
  for (Index j = 0; j < row.size(); ++j) out << (j ? " " : "") << format_double(row[j]);
  out << '\n';
}

double read_number(std::istream& in) {
  std::string tok;
  if (!(in >> tok)) throw Error(ErrorCode::ParseError, "unexpected end of problem text");
  if (tok == "inf") return std::numeric_limits<double>::infinity();
  if (tok == "-inf") return -std::numeric_limits<double>::infinity();
  try {
    size_t used = 0;
    const double v = std::stod(tok, &used);
    if (used != tok.size()) throw std::invalid_argument(tok);
    return v;
  } catch (const std::exception&) {
    throw Error(ErrorCode::ParseError, "bad number '" + tok + "' in problem text");
  }
}

Index read_count(std::istream& in) {
  const double v = read_number(in);
  if (!(v >= 0.0) || v != std::floor(v)) throw Error(ErrorCode::ParseError, "bad count in problem text");
  return static_cast<Index>(v);
}

}  // namespace

void write_text(std::ostream& out, const MiqpProblem& problem) {
  const auto& q = problem.relaxation();
  const auto& d = q.data();
  out << q.num_vars() << ' ' << q.num_ineq() << ' ' << q.num_eq() << ' ' << problem.num_binaries() << '\n';
  for (Index i = 0; i < d.H.rows(); ++i) write_row(out, d.H.row(i).transpose());
  write_row(out, d.c);
  for (Index i = 0; i < d.C.rows(); ++i) {
    VectorXd row(q.num_vars() + 1);
    row << d.C.row(i).transpose(), d.b[i];
    write_row(out, row);
  }
  for (Index i = 0; i < d.E.rows(); ++i) {
    VectorXd row(q.num_vars() + 1);
    row << d.E.row(i).transpose(), d.e[i];
    write_row(out, row);
  }
  write_row(out, q.lower());
  write_row(out, q.upper());
  for (size_t k = 0; k < problem.binary_indices().size(); ++k)
    out << (k ? " " : "") << problem.binary_indices()[k];
  out << '\n' << format_double(d.constant) << '\n';
}

MiqpProblem read_text(std::istream& in) {
  const Index n = read_count(in), m = read_count(in), p = read_count(in), s = read_count(in);
  MatrixXd H(n, n), C(m, n), E(p, n);
  VectorXd c(n), b(m), e(p), lo(n), hi(n);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < n; ++j) H(i, j) = read_number(in);
  for (Index j = 0; j < n; ++j) c[j] = read_number(in);
  for (Index i = 0; i < m; ++i) {
    for (Index j = 0; j < n; ++j) C(i, j) = read_number(in);
    b[i] = read_number(in);
  }
  for (Index i = 0; i < p; ++i) {
    for (Index j = 0; j < n; ++j) E(i, j) = read_number(in);
    e[i] = read_number(in);
  }
  for (Index j = 0; j < n; ++j) lo[j] = read_number(in);
  for (Index j = 0; j < n; ++j) hi[j] = read_number(in);
  std::vector<Index> bins(s);
  for (Index k = 0; k < s; ++k) bins[k] = read_count(in);
  const double constant = read_number(in);
  return MiqpProblem(QpProblem(H, c, C, b, E, e, lo, hi, constant), std::move(bins));
}

}  // namespace miqp_mpc

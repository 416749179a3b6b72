#include "miqp_mpc/qp.hpp"

#include "miqp_mpc/error.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SparseCholesky>

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace miqp_mpc {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::string dims(Index r, Index c) { return std::to_string(r) + "x" + std::to_string(c); }

void require(bool ok, const std::string& what) {
  if (!ok) throw Error(ErrorCode::DimensionMismatch, what);
}

bool is_diagonal(const MatrixXd& H) {
  for (Index j = 0; j < H.cols(); ++j)
    for (Index i = 0; i < H.rows(); ++i)
      if (i != j && H(i, j) != 0.0) return false;
  return true;
}

double min_eigenvalue(const MatrixXd& H) {
  if (H.size() == 0) return 0.0;
  if (is_diagonal(H)) return H.diagonal().minCoeff();
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(H, Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

void fill_sparse(QpData& d) {
  d.Hs = d.H.sparseView();
  d.Cs = d.C.sparseView();
  d.Es = d.E.sparseView();
}

double inv_sqrt_clamped(double v) {
  return v > 0.0 ? std::clamp(1.0 / std::sqrt(v), 1e-4, 1e4) : 1.0;
}

// Ruiz equilibration of [[H, C', E'], [C, 0, 0], [E, 0, 0]] followed by a cost
// scaling that brings the mean Hessian column norm (or |c|_inf) to 1.
std::shared_ptr<const QpData> equilibrate(QpData& d) {
  const Index n = d.c.size(), m = d.b.size(), p = d.e.size();
  auto s = std::make_shared<QpData>();
  s->H = d.H;
  s->C = d.C;
  s->E = d.E;
  VectorXd dv = VectorXd::Ones(n), dc = VectorXd::Ones(m), de = VectorXd::Ones(p);
  for (int it = 0; it < 25; ++it) {
    VectorXd sv(n), sc(m), se(p);
    for (Index j = 0; j < n; ++j) {
      double v = s->H.col(j).cwiseAbs().maxCoeff();
      if (m > 0) v = std::max(v, s->C.col(j).cwiseAbs().maxCoeff());
      if (p > 0) v = std::max(v, s->E.col(j).cwiseAbs().maxCoeff());
      sv[j] = inv_sqrt_clamped(v);
    }
    for (Index i = 0; i < m; ++i) sc[i] = inv_sqrt_clamped(s->C.row(i).cwiseAbs().maxCoeff());
    for (Index i = 0; i < p; ++i) se[i] = inv_sqrt_clamped(s->E.row(i).cwiseAbs().maxCoeff());
    s->H = sv.asDiagonal() * s->H * sv.asDiagonal();
    s->C = sc.asDiagonal() * s->C * sv.asDiagonal();
    s->E = se.asDiagonal() * s->E * sv.asDiagonal();
    dv.array() *= sv.array();
    dc.array() *= sc.array();
    de.array() *= se.array();
  }
  s->c = dv.cwiseProduct(d.c);
  double mean_col = 0.0;
  for (Index j = 0; j < n; ++j) mean_col += s->H.col(j).cwiseAbs().maxCoeff();
  mean_col = n > 0 ? mean_col / static_cast<double>(n) : 0.0;
  const double ref = std::max(mean_col, s->c.size() ? s->c.cwiseAbs().maxCoeff() : 0.0);
  const double cost = ref > 0.0 ? std::clamp(1.0 / ref, 1e-4, 1e4) : 1.0;
  s->H *= cost;
  s->c *= cost;
  s->b = dc.cwiseProduct(d.b);
  s->e = de.cwiseProduct(d.e);
  s->constant = 0.0;
  fill_sparse(*s);
  s->var_scale = VectorXd::Ones(n);
  s->ineq_scale = VectorXd::Ones(m);
  s->eq_scale = VectorXd::Ones(p);
  d.var_scale = std::move(dv);
  d.ineq_scale = std::move(dc);
  d.eq_scale = std::move(de);
  d.cost_scale = cost;
  return s;
}

}  // namespace

QpProblem::QpProblem(MatrixXd H, VectorXd c, MatrixXd C, VectorXd b, MatrixXd E, VectorXd e,
                     VectorXd lo, VectorXd hi, double constant) {
  const Index n = c.size();
  require(H.rows() == n && H.cols() == n, "hessian is " + dims(H.rows(), H.cols()) +
                                              ", expected " + dims(n, n));
  require(C.cols() == n || (C.rows() == 0), "ineq rows have " + std::to_string(C.cols()) +
                                                " columns, expected " + std::to_string(n));
  require(C.rows() == b.size(), "ineq rows " + std::to_string(C.rows()) + " vs rhs " +
                                    std::to_string(b.size()));
  require(E.cols() == n || (E.rows() == 0), "eq rows have " + std::to_string(E.cols()) +
                                                " columns, expected " + std::to_string(n));
  require(E.rows() == e.size(), "eq rows " + std::to_string(E.rows()) + " vs rhs " +
                                    std::to_string(e.size()));
  require(lo.size() == n && hi.size() == n, "bounds must have " + std::to_string(n) + " entries");
  if (C.rows() == 0) C.resize(0, n);
  if (E.rows() == 0) E.resize(0, n);

  if (!H.allFinite() || !c.allFinite() || !C.allFinite() || !b.allFinite() || !E.allFinite() ||
      !e.allFinite() || !std::isfinite(constant)) {
    throw Error(ErrorCode::InvalidArgument, "problem data must be finite");
  }
  if ((H - H.transpose()).cwiseAbs().maxCoeff() > 1e-12 * (1.0 + H.cwiseAbs().maxCoeff())) {
    throw Error(ErrorCode::NonPsdHessian, "hessian is not symmetric");
  }
  const double lmin = min_eigenvalue(H);
  if (lmin < -1e-9) {
    throw Error(ErrorCode::NonPsdHessian,
                "hessian has eigenvalue " + std::to_string(lmin) + " < -1e-9");
  }

  auto data = std::make_shared<QpData>();
  data->H = std::move(H);
  data->c = std::move(c);
  data->C = std::move(C);
  data->b = std::move(b);
  data->E = std::move(E);
  data->e = std::move(e);
  data->constant = constant;
  fill_sparse(*data);
  data->scaled = equilibrate(*data);
  data_ = std::move(data);
  lo_ = std::move(lo);
  hi_ = std::move(hi);
  check_bounds();
}

QpProblem::QpProblem(std::shared_ptr<const QpData> data, VectorXd lo, VectorXd hi)
    : data_(std::move(data)), lo_(std::move(lo)), hi_(std::move(hi)) {
  require(lo_.size() == num_vars() && hi_.size() == num_vars(),
          "bounds must have " + std::to_string(num_vars()) + " entries");
  check_bounds();
}

void QpProblem::check_bounds() const {
  for (Index j = 0; j < lo_.size(); ++j) {
    if (std::isnan(lo_[j]) || std::isnan(hi_[j]) || lo_[j] > hi_[j] || lo_[j] == kInf ||
        hi_[j] == -kInf) {
      throw Error(ErrorCode::InfeasibleBoxes, "variable " + std::to_string(j) + " has bounds [" +
                                                  std::to_string(lo_[j]) + ", " +
                                                  std::to_string(hi_[j]) + "]");
    }
  }
}

QpProblem QpProblem::unconstrained(MatrixXd H, VectorXd c) {
  const Index n = c.size();
  return QpProblem(std::move(H), std::move(c), MatrixXd(0, n), VectorXd(0), MatrixXd(0, n),
                   VectorXd(0), VectorXd::Constant(n, -kInf), VectorXd::Constant(n, kInf));
}

QpProblem QpProblem::with_bounds(VectorXd lo, VectorXd hi) const {
  return QpProblem(data_, std::move(lo), std::move(hi));
}

QpProblem QpProblem::equilibrated() const {
  if (!data_->scaled) return *this;
  return QpProblem(data_->scaled, lo_.cwiseQuotient(data_->var_scale), hi_.cwiseQuotient(data_->var_scale));
}

double QpProblem::objective(const VectorXd& y) const {
  const auto& d = *data_;
  return 0.5 * y.dot(d.Hs * y) + d.c.dot(y) + d.constant;
}

double QpProblem::primal_residual(const VectorXd& y) const {
  const auto& d = *data_;
  double r = 0.0;
  if (d.e.size() > 0) r = std::max(r, (d.Es * y - d.e).cwiseAbs().maxCoeff());
  if (d.b.size() > 0) r = std::max(r, (d.Cs * y - d.b).maxCoeff());
  for (Index j = 0; j < y.size(); ++j) {
    r = std::max(r, y[j] - hi_[j]);
    r = std::max(r, lo_[j] - y[j]);
  }
  return std::max(r, 0.0);
}

const char* to_string(QpStatus status) {
  switch (status) {
    case QpStatus::Optimal: return "Optimal";
    case QpStatus::IterationLimited: return "IterationLimited";
    case QpStatus::PrimalInfeasible: return "PrimalInfeasible";
  }
  return "Unknown";
}

namespace {

// Inequality rows seen by the solver: [C; I_up; -I_low] over finite bounds.
class RowMap {
 public:
  explicit RowMap(const QpProblem& p) : m_(p.num_ineq()), n_(p.num_vars()) {
    for (Index j = 0; j < n_; ++j) {
      if (std::isfinite(p.upper()[j])) up_.push_back(j);
      if (std::isfinite(p.lower()[j])) low_.push_back(j);
    }
    rhs_.resize(size());
    rhs_.head(m_) = p.data().b;
    for (size_t k = 0; k < up_.size(); ++k) rhs_[m_ + k] = p.upper()[up_[k]];
    for (size_t k = 0; k < low_.size(); ++k) rhs_[m_ + up_.size() + k] = -p.lower()[low_[k]];
  }

  Index size() const { return m_ + static_cast<Index>(up_.size() + low_.size()); }
  Index m() const { return m_; }
  const std::vector<Index>& up() const { return up_; }
  const std::vector<Index>& low() const { return low_; }
  const VectorXd& rhs() const { return rhs_; }
  Index up_row(size_t k) const { return m_ + static_cast<Index>(k); }
  Index low_row(size_t k) const { return m_ + static_cast<Index>(up_.size() + k); }

  VectorXd apply(const QpData& d, const VectorXd& z) const {
    VectorXd out(size());
    if (m_ > 0) out.head(m_) = d.Cs * z;
    for (size_t k = 0; k < up_.size(); ++k) out[up_row(k)] = z[up_[k]];
    for (size_t k = 0; k < low_.size(); ++k) out[low_row(k)] = -z[low_[k]];
    return out;
  }

  VectorXd apply_transpose(const QpData& d, const VectorXd& lam) const {
    VectorXd out = VectorXd::Zero(n_);
    if (m_ > 0) out = d.Cs.transpose() * lam.head(m_);
    for (size_t k = 0; k < up_.size(); ++k) out[up_[k]] += lam[up_row(k)];
    for (size_t k = 0; k < low_.size(); ++k) out[low_[k]] -= lam[low_row(k)];
    return out;
  }

  VectorXd to_external(const VectorXd& mu, const VectorXd& lam) const {
    const Index p = mu.size();
    VectorXd out = VectorXd::Zero(m_ + p + 2 * n_);
    out.head(m_) = lam.head(m_);
    out.segment(m_, p) = mu;
    for (size_t k = 0; k < up_.size(); ++k) out[m_ + p + up_[k]] = lam[up_row(k)];
    for (size_t k = 0; k < low_.size(); ++k) out[m_ + p + n_ + low_[k]] = lam[low_row(k)];
    return out;
  }

  void from_external(const VectorXd& dual, Index p, VectorXd& mu, VectorXd& lam) const {
    mu = dual.segment(m_, p);
    lam.resize(size());
    lam.head(m_) = dual.head(m_);
    for (size_t k = 0; k < up_.size(); ++k) lam[up_row(k)] = dual[m_ + p + up_[k]];
    for (size_t k = 0; k < low_.size(); ++k) lam[low_row(k)] = dual[m_ + p + n_ + low_[k]];
  }

 private:
  Index m_;
  Index n_;
  std::vector<Index> up_;
  std::vector<Index> low_;
  VectorXd rhs_;
};

struct Point {
  VectorXd z;
  VectorXd mu;
  VectorXd lam;
};

struct Residual {
  VectorXd rz;
  VectorXd rmu;
  VectorXd rlam;
  VectorXd a;  // first FB argument per inequality row
  double merit = 0.0;  // 1/2 |R|^2
};

// Penalized Fischer-Burmeister function and a generalized derivative.
class Fb {
 public:
  explicit Fb(double alpha) : alpha_(alpha) {}

  double value(double a, double b) const {
    const double r = std::hypot(a, b);
    const double fb = (a > 0.0 && b > 0.0) ? 2.0 * a * b / (a + b + r) : a + b - r;
    return alpha_ * fb + (1.0 - alpha_) * std::max(a, 0.0) * std::max(b, 0.0);
  }

  void derivative(double a, double b, double& ga, double& gb) const {
    const double r = std::hypot(a, b);
    if (r == 0.0) {
      ga = gb = alpha_ * (1.0 - 1.0 / std::sqrt(2.0));
      return;
    }
    ga = alpha_ * (1.0 - a / r) + (1.0 - alpha_) * (a > 0.0 ? std::max(b, 0.0) : 0.0);
    gb = alpha_ * (1.0 - b / r) + (1.0 - alpha_) * (b > 0.0 ? std::max(a, 0.0) : 0.0);
  }

 private:
  double alpha_;
};

// KKT matrix [[H + sI + A'DA, E'], [E, -sI]] (lower triangle) with a fixed
// sparsity pattern so the symbolic factorization is done once per solve.
class KktSystem {
 public:
  KktSystem(const QpData& d, const RowMap& rows) : n_(d.c.size()), p_(d.e.size()) {
    const Index N = n_ + p_;
    std::vector<Eigen::Triplet<double>> trip;
    for (Index i = 0; i < N; ++i) trip.emplace_back(i, i, 0.0);
    for (Index j = 0; j < d.Hs.outerSize(); ++j)
      for (Eigen::SparseMatrix<double>::InnerIterator it(d.Hs, j); it; ++it)
        if (it.row() >= it.col()) trip.emplace_back(it.row(), it.col(), 0.0);
    for (Index r = 0; r < rows.m(); ++r)
      for (RowIt i(d.Cs, r); i; ++i)
        for (RowIt k(d.Cs, r); k; ++k)
          if (i.col() >= k.col()) trip.emplace_back(i.col(), k.col(), 0.0);
    for (Index r = 0; r < p_; ++r)
      for (RowIt i(d.Es, r); i; ++i) trip.emplace_back(n_ + r, i.col(), 0.0);

    K_.resize(N, N);
    K_.setFromTriplets(trip.begin(), trip.end());
    K_.makeCompressed();

    base_ = VectorXd::Zero(K_.nonZeros());
    for (Index j = 0; j < d.Hs.outerSize(); ++j)
      for (Eigen::SparseMatrix<double>::InnerIterator it(d.Hs, j); it; ++it)
        if (it.row() >= it.col()) base_[position(it.row(), it.col())] += it.value();
    for (Index r = 0; r < p_; ++r)
      for (RowIt i(d.Es, r); i; ++i) base_[position(n_ + r, i.col())] += i.value();

    diag_.resize(N);
    for (Index i = 0; i < N; ++i) diag_[i] = position(i, i);

    row_start_.push_back(0);
    for (Index r = 0; r < rows.m(); ++r) {
      for (RowIt i(d.Cs, r); i; ++i)
        for (RowIt k(d.Cs, r); k; ++k)
          if (i.col() >= k.col())
            contrib_.push_back({position(i.col(), k.col()), i.value() * k.value()});
      row_start_.push_back(static_cast<Index>(contrib_.size()));
    }
    for (size_t k = 0; k < rows.up().size(); ++k) bound_var_.push_back(rows.up()[k]);
    for (size_t k = 0; k < rows.low().size(); ++k) bound_var_.push_back(rows.low()[k]);

    ldlt_.analyzePattern(K_);
  }

  /// Factorizes with prox weight s and per-row weights D. Returns false on breakdown.
  bool factorize(double s, const VectorXd& D, Index m) {
    double* v = K_.valuePtr();
    std::copy(base_.data(), base_.data() + base_.size(), v);
    for (Index i = 0; i < n_; ++i) v[diag_[i]] += s;
    for (Index i = n_; i < n_ + p_; ++i) v[diag_[i]] -= s;
    for (Index r = 0; r < m; ++r)
      for (Index k = row_start_[r]; k < row_start_[r + 1]; ++k)
        v[contrib_[k].pos] += D[r] * contrib_[k].coef;
    for (size_t k = 0; k < bound_var_.size(); ++k) v[diag_[bound_var_[k]]] += D[m + k];

    dense_.reset();
    ldlt_.factorize(K_);
    if (ldlt_.info() == Eigen::Success && ldlt_.vectorD().allFinite() &&
        (ldlt_.vectorD().array() != 0.0).all()) {
      return true;
    }
    const Eigen::SparseMatrix<double> sym = K_.selfadjointView<Eigen::Lower>();
    MatrixXd full = MatrixXd(sym);
    dense_ = std::make_unique<Eigen::PartialPivLU<MatrixXd>>(full);
    return full.allFinite();
  }

  VectorXd solve(const VectorXd& rhs) const {
    VectorXd x = dense_ ? VectorXd(dense_->solve(rhs)) : VectorXd(ldlt_.solve(rhs));
    // one step of iterative refinement
    const VectorXd res = rhs - K_.selfadjointView<Eigen::Lower>() * x;
    x += dense_ ? VectorXd(dense_->solve(res)) : VectorXd(ldlt_.solve(res));
    return x;
  }

 private:
  using RowIt = Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator;
  struct Contribution {
    Index pos;
    double coef;
  };

  Index position(Index row, Index col) const {
    const auto* outer = K_.outerIndexPtr();
    const auto* inner = K_.innerIndexPtr();
    const auto* first = inner + outer[col];
    const auto* last = inner + outer[col + 1];
    return static_cast<Index>(std::lower_bound(first, last, row) - inner);
  }

  Index n_;
  Index p_;
  Eigen::SparseMatrix<double> K_;
  VectorXd base_;
  std::vector<Index> diag_;
  std::vector<Contribution> contrib_;
  std::vector<Index> row_start_;
  std::vector<Index> bound_var_;
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>, Eigen::Lower, Eigen::AMDOrdering<int>> ldlt_;
  std::unique_ptr<Eigen::PartialPivLU<MatrixXd>> dense_;
};

// Iterates on the equilibrated problem; optimality, infeasibility and the
// best-iterate rule are judged on the original problem.
class Solver {
 public:
  Solver(const QpProblem& problem, const QpTolerances& tol, const QpSolverOptions& opt)
      : pb_(problem), sp_(opt.equilibrate ? problem.equilibrated() : problem), d_(sp_.data()), rows_(sp_),
        orig_rows_(problem), tol_(tol), opt_(opt), fb_(opt.alpha), sigma_(opt.sigma + opt.sigma_floor) {
    const QpData& o = problem.data();
    const bool scaled = opt.equilibrate && o.scaled;
    const Index n = problem.num_vars(), m = problem.num_ineq(), p = problem.num_eq();
    const double cost = scaled ? o.cost_scale : 1.0;
    var_ = scaled ? o.var_scale : VectorXd::Ones(n);
    mu_factor_ = (scaled ? o.eq_scale : VectorXd::Ones(p)) / cost;
    lam_factor_.resize(rows_.size());
    lam_factor_.head(m) = (scaled ? o.ineq_scale : VectorXd::Ones(m)) / cost;
    for (size_t k = 0; k < rows_.up().size(); ++k) lam_factor_[rows_.up_row(k)] = 1.0 / (var_[rows_.up()[k]] * cost);
    for (size_t k = 0; k < rows_.low().size(); ++k) lam_factor_[rows_.low_row(k)] = 1.0 / (var_[rows_.low()[k]] * cost);
  }

  QpResult run(const std::optional<QpWarmStart>& warm, int max_iters) {
    const Index n = pb_.num_vars();
    const Index p = pb_.num_eq();
    Point x{VectorXd::Zero(n), VectorXd::Zero(p), VectorXd::Zero(rows_.size())};
    if (warm) {
      if (warm->y.size() != n) {
        throw Error(ErrorCode::DimensionMismatch, "warm start has " +
                                                      std::to_string(warm->y.size()) +
                                                      " entries, expected " + std::to_string(n));
      }
      x.z = warm->y;
      if (warm->dual.size() > 0) {
        if (warm->dual.size() != pb_.dual_size()) {
          throw Error(ErrorCode::DimensionMismatch, "warm dual has wrong size");
        }
        orig_rows_.from_external(warm->dual, p, x.mu, x.lam);
      }
      if (!x.z.allFinite() || !x.mu.allFinite() || !x.lam.allFinite()) {
        throw Error(ErrorCode::InvalidArgument, "warm start must be finite");
      }
      x = scale(x);
    }

    int iters = 0;
    if (consider(x)) return finish(QpStatus::Optimal, iters);

    std::unique_ptr<KktSystem> kkt;
    Point xbar = x;
    while (iters < max_iters) {
      const double tau = std::max(0.1 * std::min(tol_.primal, tol_.dual),
                                  0.1 * std::sqrt(2.0 * residual(xbar, xbar).merit));
      Residual R = residual(x, xbar);
      hist_.clear();
      bool stepped = false;
      while (iters < max_iters && (!stepped || std::sqrt(2.0 * R.merit) > tau)) {
        if (!kkt) kkt = std::make_unique<KktSystem>(d_, rows_);
        const bool progress = newton_step(*kkt, x, xbar, R);
        ++iters;
        stepped = true;
        if (consider(x)) return finish(QpStatus::Optimal, iters);
        if (!progress) break;
      }
      if (infeasibility_ray(x, xbar)) return finish(QpStatus::PrimalInfeasible, iters);
      xbar = x;
    }
    return finish(QpStatus::IterationLimited, iters);
  }

 private:
  Point unscale(const Point& x) const {
    return {x.z.cwiseProduct(var_), x.mu.cwiseProduct(mu_factor_), x.lam.cwiseProduct(lam_factor_)};
  }

  Point scale(const Point& x) const {
    return {x.z.cwiseQuotient(var_), x.mu.cwiseQuotient(mu_factor_), x.lam.cwiseQuotient(lam_factor_)};
  }

  Residual residual(const Point& x, const Point& xbar) const {
    Residual R;
    R.rz = d_.Hs * x.z + d_.c + rows_.apply_transpose(d_, x.lam) + sigma_ * (x.z - xbar.z);
    if (x.mu.size() > 0) R.rz += d_.Es.transpose() * x.mu;
    R.rmu = (x.mu.size() > 0 ? VectorXd(d_.Es * x.z - d_.e) : VectorXd(0)) -
            sigma_ * (x.mu - xbar.mu);
    R.a = rows_.rhs() - rows_.apply(d_, x.z) + sigma_ * (x.lam - xbar.lam);
    R.rlam.resize(R.a.size());
    for (Index i = 0; i < R.a.size(); ++i) R.rlam[i] = fb_.value(R.a[i], x.lam[i]);
    R.merit = 0.5 * (R.rz.squaredNorm() + R.rmu.squaredNorm() + R.rlam.squaredNorm());
    if (!std::isfinite(R.merit)) R.merit = kInf;
    return R;
  }

  // One damped Newton step on R_sigma(.; xbar). Returns false when the line
  // search could not reduce the merit function.
  bool newton_step(KktSystem& kkt, Point& x, const Point& xbar, Residual& R) {
    const Index n = x.z.size();
    const Index p = x.mu.size();
    const Index mi = x.lam.size();

    VectorXd W(mi), D(mi), ga(mi);
    for (Index i = 0; i < mi; ++i) {
      double gb;
      fb_.derivative(R.a[i], x.lam[i], ga[i], gb);
      W[i] = sigma_ * ga[i] + gb;
      D[i] = ga[i] / W[i];
    }

    const VectorXd winv_r = R.rlam.cwiseQuotient(W);
    VectorXd rhs(n + p);
    rhs.head(n) = -R.rz + rows_.apply_transpose(d_, winv_r);
    rhs.tail(p) = -R.rmu;

    Point dx;
    if (!kkt.factorize(sigma_, D, rows_.m())) return false;
    const VectorXd sol = kkt.solve(rhs);
    if (!sol.allFinite()) return false;
    dx.z = sol.head(n);
    dx.mu = sol.tail(p);
    dx.lam = (-R.rlam + ga.cwiseProduct(rows_.apply(d_, dx.z))).cwiseQuotient(W);

    // nonmonotone Armijo test against the largest of the recent merits
    hist_.push_back(R.merit);
    if (hist_.size() > static_cast<size_t>(std::max(opt_.nonmonotone_memory, 1))) hist_.erase(hist_.begin());
    const double ref = *std::max_element(hist_.begin(), hist_.end());
    double t = 1.0;
    for (int k = 0; k <= opt_.max_backtracks; ++k) {
      Point trial{x.z + t * dx.z, x.mu + t * dx.mu, x.lam + t * dx.lam};
      Residual Rt = residual(trial, xbar);
      if (Rt.merit <= ref - 2.0 * opt_.armijo * t * R.merit) {
        x = std::move(trial);
        R = std::move(Rt);
        return true;
      }
      t *= 0.5;
    }
    return false;
  }

  bool infeasibility_ray(const Point& x, const Point& xbar) {
    const VectorXd dmu = (x.mu - xbar.mu).cwiseProduct(mu_factor_);
    const VectorXd dlam = (x.lam - xbar.lam).cwiseProduct(lam_factor_).cwiseMax(0.0);
    const double scale = std::max(dmu.size() ? dmu.cwiseAbs().maxCoeff() : 0.0,
                                  dlam.size() ? dlam.maxCoeff() : 0.0);
    if (!(scale > 0.0) || !std::isfinite(scale)) return false;
    const Point u = unscale(x);
    if (pb_.primal_residual(u.z) <= tol_.primal) return false;
    const VectorXd ray = orig_rows_.to_external(dmu / scale, dlam / scale);
    const CertificateCheck chk = check_certificate(pb_, ray);
    if (!chk.valid || chk.stationarity_inf > 1e-7) return false;
    certificate_ = ray;
    infeasible_point_ = u;
    return true;
  }

  // Records x as a candidate best iterate; returns true if it is optimal.
  bool consider(const Point& xs) {
    Point x = unscale(xs);
    const double pr = pb_.primal_residual(x.z);
    const double obj = pb_.objective(x.z);
    const bool better = !best_ || pr < best_pr_ || (pr == best_pr_ && obj < best_obj_);
    const bool optimal = pr <= tol_.primal && dual_residual_original(x) <= tol_.dual;
    if (optimal || better) {
      best_ = std::make_unique<Point>(std::move(x));
      best_pr_ = pr;
      best_obj_ = obj;
    }
    return optimal;
  }

  double dual_residual_original(const Point& x) const {
    const QpData& d = pb_.data();
    VectorXd stat = d.Hs * x.z + d.c + orig_rows_.apply_transpose(d, x.lam);
    if (x.mu.size() > 0) stat += d.Es.transpose() * x.mu;
    double r = stat.size() ? stat.cwiseAbs().maxCoeff() : 0.0;
    const VectorXd slack = orig_rows_.rhs() - orig_rows_.apply(d, x.z);
    for (Index i = 0; i < slack.size(); ++i) r = std::max(r, std::abs(std::min(slack[i], x.lam[i])));
    return r;
  }

  QpResult finish(QpStatus status, int iters) {
    QpResult out;
    out.status = status;
    out.iterations_used = iters;
    const Point& x = (status == QpStatus::PrimalInfeasible) ? infeasible_point_ : *best_;
    out.iterate = x.z;
    out.dual = orig_rows_.to_external(x.mu, x.lam);
    out.primal_residual_inf = pb_.primal_residual(x.z);
    out.dual_residual_inf = dual_residual_original(x);
    out.objective = pb_.objective(x.z);
    if (status == QpStatus::PrimalInfeasible) out.certificate = certificate_;
    return out;
  }

  const QpProblem& pb_;
  QpProblem sp_;
  const QpData& d_;
  RowMap rows_;
  RowMap orig_rows_;
  QpTolerances tol_;
  QpSolverOptions opt_;
  Fb fb_;
  double sigma_;
  VectorXd var_;
  VectorXd mu_factor_;
  VectorXd lam_factor_;

  std::vector<double> hist_;
  std::unique_ptr<Point> best_;
  double best_pr_ = kInf;
  double best_obj_ = kInf;
  VectorXd certificate_;
  Point infeasible_point_;
};

}  // namespace

QpResult solve_qp(const QpProblem& problem, const std::optional<QpWarmStart>& warm_start,
                  int max_iters, const QpTolerances& tol, const QpSolverOptions& options) {
  if (max_iters < 1) {
    throw Error(ErrorCode::InvalidArgument, "max_iters must be >= 1, got " + std::to_string(max_iters));
  }
  Solver solver(problem, tol, options);
  return solver.run(warm_start, max_iters);
}

double dual_residual(const QpProblem& problem, const VectorXd& y, const VectorXd& dual) {
  if (y.size() != problem.num_vars() || dual.size() != problem.dual_size()) {
    throw Error(ErrorCode::DimensionMismatch, "iterate or dual has wrong size");
  }
  const auto& d = problem.data();
  const Index m = problem.num_ineq();
  const Index p = problem.num_eq();
  const Index n = problem.num_vars();
  const auto lamC = dual.head(m);
  const auto mu = dual.segment(m, p);
  const auto lu = dual.segment(m + p, n);
  const auto ll = dual.segment(m + p + n, n);

  VectorXd stat = d.Hs * y + d.c + lu - ll;
  if (m > 0) stat += d.Cs.transpose() * lamC;
  if (p > 0) stat += d.Es.transpose() * mu;
  double r = n ? stat.cwiseAbs().maxCoeff() : 0.0;
  if (m > 0) {
    const VectorXd slack = d.b - d.Cs * y;
    for (Index i = 0; i < m; ++i) r = std::max(r, std::abs(std::min(slack[i], lamC[i])));
  }
  for (Index j = 0; j < n; ++j) {
    if (std::isfinite(problem.upper()[j]))
      r = std::max(r, std::abs(std::min(problem.upper()[j] - y[j], lu[j])));
    if (std::isfinite(problem.lower()[j]))
      r = std::max(r, std::abs(std::min(y[j] - problem.lower()[j], ll[j])));
  }
  return r;
}

CertificateCheck check_certificate(const QpProblem& problem, const VectorXd& ray) {
  if (ray.size() != problem.dual_size()) {
    throw Error(ErrorCode::DimensionMismatch, "certificate has wrong size");
  }
  const auto& d = problem.data();
  const Index m = problem.num_ineq();
  const Index p = problem.num_eq();
  const Index n = problem.num_vars();
  const auto lamC = ray.head(m);
  const auto mu = ray.segment(m, p);
  const auto lu = ray.segment(m + p, n);
  const auto ll = ray.segment(m + p + n, n);

  CertificateCheck chk{};
  VectorXd stat = lu - ll;
  if (m > 0) stat += d.Cs.transpose() * lamC;
  if (p > 0) stat += d.Es.transpose() * mu;
  chk.stationarity_inf = n ? stat.cwiseAbs().maxCoeff() : 0.0;

  double rhs = lamC.dot(d.b) + mu.dot(d.e);
  bool finite_support = true;
  for (Index j = 0; j < n; ++j) {
    if (lu[j] != 0.0) {
      if (std::isfinite(problem.upper()[j])) rhs += problem.upper()[j] * lu[j];
      else finite_support = false;
    }
    if (ll[j] != 0.0) {
      if (std::isfinite(problem.lower()[j])) rhs -= problem.lower()[j] * ll[j];
      else finite_support = false;
    }
  }
  chk.rhs = rhs;
  chk.min_ineq_multiplier = 0.0;
  if (m > 0) chk.min_ineq_multiplier = std::min(chk.min_ineq_multiplier, lamC.minCoeff());
  if (n > 0) chk.min_ineq_multiplier = std::min({chk.min_ineq_multiplier, lu.minCoeff(), ll.minCoeff()});
  chk.scale = ray.size() ? ray.cwiseAbs().maxCoeff() : 0.0;
  chk.valid = finite_support && std::isfinite(rhs) && chk.scale > 0.0 &&
              chk.stationarity_inf <= 1e-6 * (1.0 + chk.scale) && rhs < 0.0 &&
              chk.min_ineq_multiplier >= -1e-12;
  return chk;
}

}  // namespace miqp_mpc

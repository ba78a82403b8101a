// Copyright 2026 The HTCP Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "htcp/qp.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/QR>
#include <Eigen/SVD>

namespace htcp {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kSymmetryTol = 1e-10;
constexpr double kRankTol = 1e-10;
constexpr double kStepTol = 1e-12;
constexpr double kMultiplierTol = 1e-10;
constexpr double kPhaseOneWeight = 1e-6;

// Every inequality as a row of G x >= h, in the order: general rows,
// finite lower bounds, finite upper bounds.
struct Inequalities {
  Eigen::MatrixXd g;
  Eigen::VectorXd h;
  enum class Source { kRow, kLower, kUpper };
  std::vector<Source> source;
  std::vector<int> source_index;
};

Inequalities stack_inequalities(const QPProblem& p) {
  const int n = p.num_vars();
  std::vector<int> lower_ids;
  std::vector<int> upper_ids;
  for (int i = 0; i < n; ++i) {
    if (std::isfinite(p.lower()[i])) lower_ids.push_back(i);
    if (std::isfinite(p.upper()[i])) upper_ids.push_back(i);
  }
  const int rows = static_cast<int>(p.a_in().rows() + lower_ids.size() +
                                    upper_ids.size());
  Inequalities out;
  out.g = Eigen::MatrixXd::Zero(rows, n);
  out.h = Eigen::VectorXd::Zero(rows);
  int r = 0;
  for (int i = 0; i < p.a_in().rows(); ++i, ++r) {
    out.g.row(r) = p.a_in().row(i);
    out.h[r] = p.b_in()[i];
    out.source.push_back(Inequalities::Source::kRow);
    out.source_index.push_back(i);
  }
  for (int i : lower_ids) {
    out.g(r, i) = 1.0;
    out.h[r++] = p.lower()[i];
    out.source.push_back(Inequalities::Source::kLower);
    out.source_index.push_back(i);
  }
  for (int i : upper_ids) {
    out.g(r, i) = -1.0;
    out.h[r++] = -p.upper()[i];
    out.source.push_back(Inequalities::Source::kUpper);
    out.source_index.push_back(i);
  }
  return out;
}

Eigen::MatrixXd stack_rows(const Eigen::MatrixXd& e, const Eigen::MatrixXd& g,
                           const std::vector<int>& working) {
  Eigen::MatrixXd c(e.rows() + static_cast<int>(working.size()), e.cols());
  c.topRows(e.rows()) = e;
  for (std::size_t k = 0; k < working.size(); ++k) {
    c.row(e.rows() + static_cast<int>(k)) = g.row(working[k]);
  }
  return c;
}

Eigen::MatrixXd kernel(const Eigen::MatrixXd& c, int n) {
  if (c.rows() == 0) return Eigen::MatrixXd::Identity(n, n);
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(c, Eigen::ComputeFullV);
  const Eigen::VectorXd& s = svd.singularValues();
  const double scale = std::max(1.0, s.size() > 0 ? s[0] : 0.0);
  int rank = 0;
  for (int i = 0; i < s.size(); ++i) {
    if (s[i] > kRankTol * scale) ++rank;
  }
  return svd.matrixV().rightCols(n - rank);
}

Eigen::VectorXd multipliers(const Eigen::MatrixXd& c,
                            const Eigen::VectorXd& grad) {
  if (c.rows() == 0) return Eigen::VectorXd();
  Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(c.transpose());
  return cod.solve(grad);
}

struct ActiveSetResult {
  Eigen::VectorXd x;
  std::vector<int> working;
  int iterations = 0;
  bool converged = false;
};

// Primal active set from a feasible start.
ActiveSetResult active_set(const Eigen::MatrixXd& hessian,
                           const Eigen::VectorXd& linear,
                           const Eigen::MatrixXd& e, const Eigen::MatrixXd& g,
                           const Eigen::VectorXd& h, Eigen::VectorXd x,
                           int max_iter) {
  const int n = static_cast<int>(x.size());
  const int m_eq = static_cast<int>(e.rows());
  ActiveSetResult out;
  std::vector<int> working;
  std::vector<char> in_working(g.rows(), 0);
  for (int iter = 0; iter < max_iter; ++iter) {
    out.iterations = iter + 1;
    const Eigen::VectorXd grad = hessian * x + linear;
    const Eigen::MatrixXd c = stack_rows(e, g, working);
    const Eigen::MatrixXd z = kernel(c, n);

    Eigen::VectorXd step = Eigen::VectorXd::Zero(n);
    if (z.cols() > 0) {
      const Eigen::MatrixXd reduced = z.transpose() * hessian * z;
      step = -z * reduced.llt().solve(z.transpose() * grad);
    }

    const double scale = 1.0 + x.cwiseAbs().maxCoeff();
    if (step.cwiseAbs().maxCoeff() <= kStepTol * scale) {
      const Eigen::VectorXd y = multipliers(c, grad);
      int drop = -1;
      double most_negative = -kMultiplierTol;
      for (std::size_t k = 0; k < working.size(); ++k) {
        const double lambda = y[m_eq + static_cast<int>(k)];
        if (lambda < most_negative) {
          most_negative = lambda;
          drop = static_cast<int>(k);
        }
      }
      if (drop < 0) {
        out.converged = true;
        break;
      }
      in_working[working[drop]] = 0;
      working.erase(working.begin() + drop);
      continue;
    }

    double alpha = 1.0;
    int blocking = -1;
    const Eigen::VectorXd slope = g * step;
    for (int i = 0; i < g.rows(); ++i) {
      if (in_working[i] || slope[i] >= -kStepTol) continue;
      const double ratio =
          std::max(0.0, (h[i] - g.row(i).dot(x)) / slope[i]);
      if (ratio < alpha) {
        alpha = ratio;
        blocking = i;
      }
    }
    x += alpha * step;
    if (blocking >= 0) {
      in_working[blocking] = 1;
      working.insert(std::lower_bound(working.begin(), working.end(), blocking),
                     blocking);
    }
  }
  out.x = std::move(x);
  out.working = std::move(working);
  return out;
}

// Minimizer of the equality-constrained problem, ignoring inequalities.
Eigen::VectorXd equality_minimizer(const Eigen::MatrixXd& hessian,
                                   const Eigen::VectorXd& linear,
                                   const Eigen::MatrixXd& e,
                                   const Eigen::VectorXd& rhs) {
  const int n = static_cast<int>(linear.size());
  Eigen::VectorXd particular = Eigen::VectorXd::Zero(n);
  if (e.rows() > 0) {
    particular = e.completeOrthogonalDecomposition().solve(rhs);
  }
  const Eigen::MatrixXd z = kernel(e, n);
  if (z.cols() == 0) return particular;
  const Eigen::MatrixXd reduced = z.transpose() * hessian * z;
  const Eigen::VectorXd grad = hessian * particular + linear;
  return particular - z * reduced.llt().solve(z.transpose() * grad);
}

// Minimize total (row-normalized) inequality violation subject to the
// equalities, starting next to `anchor`.
Eigen::VectorXd phase_one(const Eigen::MatrixXd& e, const Eigen::MatrixXd& g, const Eigen::VectorXd& h,
                          const Eigen::VectorXd& anchor, int max_iter,
                          int* iterations) {
  const int n = static_cast<int>(anchor.size());
  const int m = static_cast<int>(g.rows());
  Eigen::MatrixXd g_scaled = g;
  Eigen::VectorXd h_scaled = h;
  for (int i = 0; i < m; ++i) {
    const double norm = g.row(i).norm();
    if (norm > 0.0) {
      g_scaled.row(i) /= norm;
      h_scaled[i] /= norm;
    }
  }
  const int dim = n + m;
  const Eigen::MatrixXd hessian =
      kPhaseOneWeight * Eigen::MatrixXd::Identity(dim, dim);
  Eigen::VectorXd linear(dim);
  linear.head(n) = -kPhaseOneWeight * anchor;
  linear.tail(m).setOnes();

  Eigen::MatrixXd e1 = Eigen::MatrixXd::Zero(e.rows(), dim);
  e1.leftCols(n) = e;
  Eigen::MatrixXd g1 = Eigen::MatrixXd::Zero(2 * m, dim);
  Eigen::VectorXd h1 = Eigen::VectorXd::Zero(2 * m);
  g1.topLeftCorner(m, n) = g_scaled;
  g1.topRightCorner(m, m).setIdentity();
  h1.head(m) = h_scaled;
  g1.bottomRightCorner(m, m).setIdentity();

  Eigen::VectorXd start(dim);
  start.head(n) = anchor;
  start.tail(m) = (h_scaled - g_scaled * anchor).cwiseMax(0.0);
  ActiveSetResult r = active_set(hessian, linear, e1, g1, h1, start, max_iter);
  *iterations = r.iterations;
  return r.x.head(n);
}

}  // namespace

std::string_view to_string(QPStatus status) {
  switch (status) {
    case QPStatus::kOptimal:
      return "optimal";
    case QPStatus::kInfeasible:
      return "infeasible";
    case QPStatus::kMaxIterations:
      return "max_iterations";
  }
  return "unknown";
}

QPProblem::QPProblem(Eigen::MatrixXd hessian, Eigen::VectorXd linear,
                     Eigen::MatrixXd a_eq, Eigen::VectorXd b_eq,
                     Eigen::MatrixXd a_in, Eigen::VectorXd b_in,
                     Eigen::VectorXd lower, Eigen::VectorXd upper)
    : hessian_(std::move(hessian)),
      linear_(std::move(linear)),
      a_eq_(std::move(a_eq)),
      b_eq_(std::move(b_eq)),
      a_in_(std::move(a_in)),
      b_in_(std::move(b_in)),
      lower_(std::move(lower)),
      upper_(std::move(upper)) {
  const auto n = linear_.size();
  if (n == 0) throw InvalidArgument("QP has no variables");
  if (hessian_.rows() != n || hessian_.cols() != n) {
    throw InvalidArgument("QP Hessian must be n x n");
  }
  if (a_eq_.rows() != b_eq_.size() || (a_eq_.rows() > 0 && a_eq_.cols() != n)) {
    throw InvalidArgument("QP equality block has inconsistent dimensions");
  }
  if (a_in_.rows() != b_in_.size() || (a_in_.rows() > 0 && a_in_.cols() != n)) {
    throw InvalidArgument("QP inequality block has inconsistent dimensions");
  }
  if (a_eq_.rows() == 0) a_eq_.resize(0, n);
  if (a_in_.rows() == 0) a_in_.resize(0, n);
  if (lower_.size() != n || upper_.size() != n) {
    throw InvalidArgument("QP bounds must have n entries");
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    if (lower_[i] > upper_[i]) {
      throw InvalidArgument("QP bound " + std::to_string(i) +
                            " has lower > upper");
    }
  }
  if (!hessian_.allFinite() || !linear_.allFinite() || !a_eq_.allFinite() ||
      !b_eq_.allFinite() || !a_in_.allFinite() || !b_in_.allFinite()) {
    throw InvalidArgument("QP data contains non-finite entries");
  }
  if ((hessian_ - hessian_.transpose()).cwiseAbs().maxCoeff() > kSymmetryTol) {
    throw InvalidArgument("QP Hessian is not symmetric");
  }
  hessian_.diagonal().array() += kRegularization;
  Eigen::LLT<Eigen::MatrixXd> llt(hessian_);
  if (llt.info() != Eigen::Success) {
    throw InvalidArgument("QP Hessian is not positive definite");
  }
}

QPProblem::QPProblem(Eigen::MatrixXd hessian, Eigen::VectorXd linear,
                     Eigen::MatrixXd a_eq, Eigen::VectorXd b_eq,
                     Eigen::MatrixXd a_in, Eigen::VectorXd b_in)
    : QPProblem(hessian, linear, std::move(a_eq), std::move(b_eq),
                std::move(a_in), std::move(b_in),
                Eigen::VectorXd::Constant(linear.size(), -kInf),
                Eigen::VectorXd::Constant(linear.size(), kInf)) {}

double QPProblem::objective(const Eigen::VectorXd& x) const {
  return 0.5 * x.dot(hessian_ * x) + linear_.dot(x);
}

double QPProblem::max_violation(const Eigen::VectorXd& x) const {
  double v = 0.0;
  if (a_eq_.rows() > 0) {
    v = std::max(v, (a_eq_ * x - b_eq_).cwiseAbs().maxCoeff());
  }
  if (a_in_.rows() > 0) {
    v = std::max(v, (b_in_ - a_in_ * x).maxCoeff());
  }
  v = std::max(v, (lower_ - x).maxCoeff());
  v = std::max(v, (x - upper_).maxCoeff());
  return v;
}

QPSolution solve_qp(const QPProblem& problem, int max_iter) {
  const int n = problem.num_vars();
  const Inequalities ineq = stack_inequalities(problem);
  const Eigen::MatrixXd& e = problem.a_eq();
  const int m_eq = static_cast<int>(e.rows());

  QPSolution sol;
  sol.eq_multipliers = Eigen::VectorXd::Zero(m_eq);
  sol.in_multipliers = Eigen::VectorXd::Zero(problem.a_in().rows());
  sol.lower_multipliers = Eigen::VectorXd::Zero(n);
  sol.upper_multipliers = Eigen::VectorXd::Zero(n);

  Eigen::VectorXd start = equality_minimizer(
      problem.hessian(), problem.linear(), e, problem.b_eq());
  if (m_eq > 0 &&
      (e * start - problem.b_eq()).cwiseAbs().maxCoeff() > kQpFeasibilityTol) {
    sol.x = start;
    sol.status = QPStatus::kInfeasible;
    sol.kkt_residual = kInf;
    return sol;
  }
  int used = 0;
  if (ineq.g.rows() > 0 &&
      (ineq.h - ineq.g * start).maxCoeff() > 0.0) {
    start = phase_one(e, ineq.g, ineq.h, start, max_iter,
                      &used);
    if (problem.max_violation(start) > kQpFeasibilityTol) {
      sol.x = start;
      sol.status = QPStatus::kInfeasible;
      sol.iterations = used;
      sol.kkt_residual = kInf;
      return sol;
    }
  }

  ActiveSetResult r = active_set(problem.hessian(), problem.linear(), e,
                                 ineq.g, ineq.h, start, max_iter);
  sol.x = r.x;
  sol.iterations = used + r.iterations;

  // KKT bookkeeping at the returned point.
  const Eigen::VectorXd grad = problem.hessian() * sol.x + problem.linear();
  const Eigen::MatrixXd c = stack_rows(e, ineq.g, r.working);
  const Eigen::VectorXd y = multipliers(c, grad);
  Eigen::VectorXd lambda = Eigen::VectorXd::Zero(ineq.g.rows());
  for (std::size_t k = 0; k < r.working.size(); ++k) {
    lambda[r.working[k]] = y[m_eq + static_cast<int>(k)];
  }
  Eigen::VectorXd residual = grad - ineq.g.transpose() * lambda;
  if (m_eq > 0) {
    sol.eq_multipliers = y.head(m_eq);
    residual -= e.transpose() * sol.eq_multipliers;
  }
  double kkt = residual.cwiseAbs().maxCoeff();
  kkt = std::max(kkt, problem.max_violation(sol.x));
  for (int i = 0; i < ineq.g.rows(); ++i) {
    kkt = std::max(kkt, -lambda[i]);
    kkt = std::max(kkt,
                   std::abs(lambda[i] * (ineq.g.row(i).dot(sol.x) - ineq.h[i])));
    const int idx = ineq.source_index[i];
    switch (ineq.source[i]) {
      case Inequalities::Source::kRow:
        sol.in_multipliers[idx] = lambda[i];
        break;
      case Inequalities::Source::kLower:
        sol.lower_multipliers[idx] = lambda[i];
        break;
      case Inequalities::Source::kUpper:
        sol.upper_multipliers[idx] = lambda[i];
        break;
    }
  }
  sol.kkt_residual = kkt;
  sol.status = r.converged ? QPStatus::kOptimal : QPStatus::kMaxIterations;
  return sol;
}

}  // namespace htcp

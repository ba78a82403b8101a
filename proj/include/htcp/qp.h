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

#ifndef HTCP_QP_H_
#define HTCP_QP_H_

#include <string_view>

#include <Eigen/Core>

#include "htcp/errors.h"

namespace htcp {

// Dense strictly convex QP:
//
//   min  1/2 x'Hx + f'x
//   s.t. A_eq x  = b_eq
//        A_in x >= b_in
//        lower <= x <= upper      (infinite bounds allowed)
//
// The constructor checks dimensions and symmetry, adds a 1e-9 diagonal
// regularization to H and verifies positive definiteness.
class QPProblem {
 public:
  static constexpr double kRegularization = 1e-9;

  QPProblem(Eigen::MatrixXd hessian, Eigen::VectorXd linear,
            Eigen::MatrixXd a_eq, Eigen::VectorXd b_eq, Eigen::MatrixXd a_in,
            Eigen::VectorXd b_in, Eigen::VectorXd lower,
            Eigen::VectorXd upper);

  // Problem without box bounds.
  QPProblem(Eigen::MatrixXd hessian, Eigen::VectorXd linear,
            Eigen::MatrixXd a_eq, Eigen::VectorXd b_eq, Eigen::MatrixXd a_in,
            Eigen::VectorXd b_in);

  int num_vars() const { return static_cast<int>(linear_.size()); }
  const Eigen::MatrixXd& hessian() const { return hessian_; }
  const Eigen::VectorXd& linear() const { return linear_; }
  const Eigen::MatrixXd& a_eq() const { return a_eq_; }
  const Eigen::VectorXd& b_eq() const { return b_eq_; }
  const Eigen::MatrixXd& a_in() const { return a_in_; }
  const Eigen::VectorXd& b_in() const { return b_in_; }
  const Eigen::VectorXd& lower() const { return lower_; }
  const Eigen::VectorXd& upper() const { return upper_; }

  double objective(const Eigen::VectorXd& x) const;
  // Largest violation over every equality, inequality, and bound.
  double max_violation(const Eigen::VectorXd& x) const;

 private:
  Eigen::MatrixXd hessian_;
  Eigen::VectorXd linear_;
  Eigen::MatrixXd a_eq_;
  Eigen::VectorXd b_eq_;
  Eigen::MatrixXd a_in_;
  Eigen::VectorXd b_in_;
  Eigen::VectorXd lower_;
  Eigen::VectorXd upper_;
};

enum class QPStatus { kOptimal, kInfeasible, kMaxIterations };

std::string_view to_string(QPStatus status);

struct QPSolution {
  Eigen::VectorXd x;
  QPStatus status = QPStatus::kInfeasible;
  // Max of stationarity, primal and dual infeasibility and complementarity.
  double kkt_residual = 0.0;
  int iterations = 0;
  // Multipliers at x: one per equality row, and one per inequality row,
  // lower bound and upper bound (all >= 0 at optimality).
  Eigen::VectorXd eq_multipliers;
  Eigen::VectorXd in_multipliers;
  Eigen::VectorXd lower_multipliers;
  Eigen::VectorXd upper_multipliers;
};

inline constexpr double kQpFeasibilityTol = 1e-8;
inline constexpr double kQpKktTol = 1e-6;

// Primal active-set method. Equalities and working-set rows are eliminated
// through an orthonormal null-space parameterization; a phase-1 problem
// minimizing total violation supplies the feasible start. Adds the first
// blocking constraint (lowest index on ties) and drops the most negative
// multiplier (lowest index on ties), so results are reproducible bit for
// bit.
QPSolution solve_qp(const QPProblem& problem, int max_iter = 500);

}  // namespace htcp

#endif  // HTCP_QP_H_

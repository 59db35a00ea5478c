/*
 * Copyright 2026 The WCL Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

// Entropy-regularised optimal transport between two uniformly weighted point
// clouds.
//
// Both solvers run the same alternating scaling iteration, starting from
// v = 1 and updating u first:
//
//   u <- (1/m) / (G v),   v <- (1/n) / (G^T u),   G = exp(-C / eps),
//
// and return the plan P = diag(u) G diag(v) together with the sharp distance
// <P, C> (the entropy term is not part of the returned value). The log-domain
// solver carries the potentials f = eps log u and g = eps log v and replaces
// the matrix-vector products by log-sum-exp reductions, so it never
// underflows. The naive solver refuses to run when the kernel underflows.
//
// Iteration stops after `max_iters` sweeps, or earlier once the marginal
// violation of the current plan drops below `tol`.

#ifndef WCL_SINKHORN_HPP_
#define WCL_SINKHORN_HPP_

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "wcl/errors.hpp"
#include "wcl/geometry.hpp"

namespace wcl {

enum class SinkhornMode { naive, log_domain };

inline const char* to_string(SinkhornMode mode) {
  return mode == SinkhornMode::naive ? "naive" : "log_domain";
}

struct SinkhornConfig {
  double epsilon = 1e-3;
  int max_iters = 100;
  double tol = 1e-9;
  SinkhornMode mode = SinkhornMode::log_domain;

  void validate() const {
    if (!(std::isfinite(epsilon) && epsilon > 0.0)) {
      throw InputDomainError("sinkhorn: epsilon must be positive");
    }
    if (max_iters < 1) {
      throw InputDomainError("sinkhorn: max_iters must be >= 1");
    }
    if (!(tol >= 0.0)) throw InputDomainError("sinkhorn: tol must be >= 0");
  }
};

// m x n matrix of squared Euclidean distances.
class CostMatrix {
 public:
  CostMatrix() = default;
  explicit CostMatrix(Eigen::MatrixXd entries) : entries_(std::move(entries)) {
    if (entries_.rows() == 0 || entries_.cols() == 0) {
      throw InputDomainError("cost matrix: empty");
    }
    if (!entries_.allFinite()) {
      throw InputDomainError("cost matrix: non-finite entry");
    }
    if (entries_.minCoeff() < 0.0) {
      throw InputDomainError("cost matrix: negative entry");
    }
  }

  Eigen::Index rows() const { return entries_.rows(); }
  Eigen::Index cols() const { return entries_.cols(); }
  const Eigen::MatrixXd& matrix() const { return entries_; }
  double operator()(Eigen::Index i, Eigen::Index j) const {
    return entries_(i, j);
  }

  CostMatrix transposed() const {
    CostMatrix t;
    t.entries_ = entries_.transpose();
    return t;
  }

 private:
  Eigen::MatrixXd entries_;
};

inline CostMatrix cost_matrix(const PointCloud& x, const PointCloud& y) {
  if (x.empty() || y.empty()) {
    throw InputDomainError("cost_matrix: empty point cloud");
  }
  const Eigen::Index m = x.points.cols();
  const Eigen::Index n = y.points.cols();
  Eigen::MatrixXd c(m, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    c.col(j) = (x.points.colwise() - y.points.col(j)).colwise().squaredNorm();
  }
  return CostMatrix(std::move(c));
}

// Nonnegative m x n coupling. Row sums target 1/m and column sums 1/n; the
// achieved deviation is reported by marginal_violation() rather than
// enforced at construction.
class TransportPlan {
 public:
  TransportPlan() = default;
  explicit TransportPlan(Eigen::MatrixXd entries)
      : entries_(std::move(entries)) {
    if (!entries_.allFinite() || (entries_.size() > 0 &&
                                  entries_.minCoeff() < 0.0)) {
      throw NumericalDegeneracyError(
          "transport plan: entries must be finite and nonnegative");
    }
  }

  Eigen::Index rows() const { return entries_.rows(); }
  Eigen::Index cols() const { return entries_.cols(); }
  const Eigen::MatrixXd& matrix() const { return entries_; }
  double operator()(Eigen::Index i, Eigen::Index j) const {
    return entries_(i, j);
  }

  double row_violation() const {
    const double target = 1.0 / static_cast<double>(rows());
    return (entries_.rowwise().sum().array() - target).abs().maxCoeff();
  }
  double col_violation() const {
    const double target = 1.0 / static_cast<double>(cols());
    return (entries_.colwise().sum().array() - target).abs().maxCoeff();
  }
  double marginal_violation() const {
    return std::max(row_violation(), col_violation());
  }
  bool satisfies_marginals(double tau = 1e-6) const {
    return marginal_violation() <= tau;
  }

 private:
  Eigen::MatrixXd entries_;
};

// Dual scaling variables. Naive mode fills u, v and the kernel; log mode
// fills the potentials f = eps log u, g = eps log v.
struct SinkhornState {
  SinkhornMode mode = SinkhornMode::log_domain;
  Eigen::VectorXd u;
  Eigen::VectorXd v;
  Eigen::MatrixXd kernel;
  Eigen::VectorXd f;
  Eigen::VectorXd g;
};

struct SinkhornResult {
  TransportPlan plan;
  double distance = 0.0;  // <P, C>
  SinkhornState state;
  int iterations = 0;
  double marginal_violation = 0.0;
};

// Potentials of every accepted sweep, scaled by 1/eps: alpha[k] holds f after
// sweep k+1, beta[k] holds g after sweep k (beta[0] is the zero start).
struct SinkhornTape {
  double epsilon = 0.0;
  std::vector<Eigen::VectorXd> alpha;
  std::vector<Eigen::VectorXd> beta;

  int sweeps() const { return static_cast<int>(alpha.size()); }
};

namespace detail {

// exp(x) with results below ~1e-304 flushed to zero. Keeps the reductions out
// of the subnormal range, where they would otherwise crawl.
inline constexpr double kExpFloor = -700.0;

template <typename Derived>
auto flushed_exp(const Eigen::ArrayBase<Derived>& x) {
  return (x < kExpFloor).select(0.0, x.max(kExpFloor).exp());
}

inline void check_cost(const CostMatrix& c) {
  if (c.rows() == 0 || c.cols() == 0) {
    throw InputDomainError("sinkhorn: empty cost matrix");
  }
  if (!c.matrix().allFinite()) {
    throw InputDomainError("sinkhorn: non-finite cost entry");
  }
}

// out[k] = log(target) - logsumexp(cols.col(k) + shift) for each column k.
inline void lse_update(const Eigen::MatrixXd& cols, const Eigen::VectorXd& shift,
                       double log_target, Eigen::VectorXd& out) {
  const Eigen::Index count = cols.cols();
  for (Eigen::Index k = 0; k < count; ++k) {
    const auto col = cols.col(k).array();
    const double mx = (col + shift.array()).maxCoeff();
    const double s = (col + shift.array() - mx).max(kExpFloor).exp().sum();
    out[k] = log_target - (mx + std::log(s));
  }
}

}  // namespace detail

// Naive-domain iteration on the kernel exp(-C/eps).
inline SinkhornResult solve(const CostMatrix& c, const SinkhornConfig& cfg) {
  cfg.validate();
  detail::check_cost(c);
  const Eigen::Index m = c.rows();
  const Eigen::Index n = c.cols();
  const double a = 1.0 / static_cast<double>(m);
  const double b = 1.0 / static_cast<double>(n);

  // Scalar std::exp on purpose: Eigen's packet exp clamps its argument and
  // would hide underflow. Subnormal entries are kept so the naive solver
  // reproduces the textbook iteration, including its underflow behaviour.
  const Eigen::MatrixXd kernel = (-c.matrix() / cfg.epsilon).unaryExpr(
      [](double z) { return std::exp(z); });
  const auto underflow_error = [&](const std::string& what) {
    return NumericalDegeneracyError(
        "sinkhorn: kernel exp(-C/eps) underflows (" + what +
        ") at eps=" + std::to_string(cfg.epsilon) +
        "; use log_domain mode");
  };
  if ((kernel.rowwise().maxCoeff().array() <= 0.0).any()) {
    throw underflow_error("zero row");
  }
  if ((kernel.colwise().maxCoeff().array() <= 0.0).any()) {
    throw underflow_error("zero column");
  }

  Eigen::VectorXd u = Eigen::VectorXd::Constant(m, a);
  Eigen::VectorXd v = Eigen::VectorXd::Ones(n);
  int sweeps = 0;
  for (int it = 0; it < cfg.max_iters; ++it) {
    const Eigen::VectorXd gv = kernel * v;
    if (it > 0) {
      const double viol = ((u.array() * gv.array()) - a).abs().maxCoeff();
      if (viol < cfg.tol) break;
    }
    Eigen::VectorXd u_next = a / gv.array();
    const Eigen::VectorXd gtu = kernel.transpose() * u_next;
    Eigen::VectorXd v_next = b / gtu.array();
    if (!u_next.allFinite() || !v_next.allFinite() ||
        u_next.minCoeff() <= 0.0 || v_next.minCoeff() <= 0.0) {
      throw underflow_error("scaling vector left the positive reals");
    }
    u = std::move(u_next);
    v = std::move(v_next);
    ++sweeps;
  }

  Eigen::MatrixXd p = u.asDiagonal() * kernel * v.asDiagonal();
  SinkhornResult result;
  result.distance = (p.array() * c.matrix().array()).sum();
  result.plan = TransportPlan(std::move(p));
  result.iterations = sweeps;
  result.marginal_violation = result.plan.marginal_violation();
  result.state.mode = SinkhornMode::naive;
  result.state.u = std::move(u);
  result.state.v = std::move(v);
  result.state.kernel = kernel;
  return result;
}

// Log-domain iteration. When `tape` is non-null, the potentials of every
// accepted sweep are recorded for reverse accumulation.
inline SinkhornResult solve_log(const CostMatrix& c, const SinkhornConfig& cfg,
                                SinkhornTape* tape = nullptr) {
  cfg.validate();
  detail::check_cost(c);
  const Eigen::Index m = c.rows();
  const Eigen::Index n = c.cols();
  const double log_a = -std::log(static_cast<double>(m));
  const double log_b = -std::log(static_cast<double>(n));
  const double inv_m = 1.0 / static_cast<double>(m);

  // Column j of `neg` is -C(:, j)/eps; column i of `neg_t` is -C(i, :)/eps.
  const Eigen::MatrixXd neg = -c.matrix() / cfg.epsilon;
  const Eigen::MatrixXd neg_t = neg.transpose();

  Eigen::VectorXd alpha = Eigen::VectorXd::Zero(m);
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd alpha_next(m);
  if (tape != nullptr) {
    tape->epsilon = cfg.epsilon;
    tape->alpha.clear();
    tape->beta.assign(1, beta);
  }

  int sweeps = 0;
  for (int it = 0; it < cfg.max_iters; ++it) {
    detail::lse_update(neg_t, beta, log_a, alpha_next);
    if (it > 0) {
      // Row sums of the current plan are (1/m) exp(alpha - alpha_next).
      const double viol =
          (alpha - alpha_next).array().unaryExpr([](double d) {
            return std::abs(std::expm1(d));
          }).maxCoeff() * inv_m;
      if (viol < cfg.tol) break;
    }
    alpha.swap(alpha_next);
    detail::lse_update(neg, alpha, log_b, beta);
    ++sweeps;
    if (tape != nullptr) {
      tape->alpha.push_back(alpha);
      tape->beta.push_back(beta);
    }
  }

  Eigen::MatrixXd p = detail::flushed_exp(
      ((neg.colwise() + alpha).rowwise() + beta.transpose()).array());
  SinkhornResult result;
  result.distance = (p.array() * c.matrix().array()).sum();
  result.plan = TransportPlan(std::move(p));
  result.iterations = sweeps;
  result.marginal_violation = result.plan.marginal_violation();
  result.state.mode = SinkhornMode::log_domain;
  result.state.f = cfg.epsilon * alpha;
  result.state.g = cfg.epsilon * beta;
  return result;
}

inline SinkhornResult sinkhorn(const CostMatrix& c, const SinkhornConfig& cfg) {
  return cfg.mode == SinkhornMode::naive ? solve(c, cfg) : solve_log(c, cfg);
}

// Derivative of the sharp distance <P, C> with respect to every cost entry,
// obtained by reverse accumulation through the recorded sweeps. The result
// is exact for the finite iteration that produced `tape`.
inline Eigen::MatrixXd distance_gradient(const CostMatrix& c,
                                         const SinkhornTape& tape) {
  if (tape.sweeps() == 0 || tape.beta.size() != tape.alpha.size() + 1) {
    throw InputDomainError("distance_gradient: empty or malformed tape");
  }
  const Eigen::Index m = c.rows();
  const Eigen::Index n = c.cols();
  const double eps = tape.epsilon;
  const Eigen::MatrixXd neg = -c.matrix() / eps;

  const auto scaled_plan = [&](const Eigen::VectorXd& alpha,
                               const Eigen::VectorXd& beta) {
    return Eigen::MatrixXd(detail::flushed_exp(
        ((neg.colwise() + alpha).rowwise() + beta.transpose()).array()));
  };

  const Eigen::MatrixXd p = scaled_plan(tape.alpha.back(), tape.beta.back());
  const Eigen::MatrixXd pc = p.cwiseProduct(c.matrix());

  // Adjoints of the scaled potentials and of -C/eps.
  Eigen::VectorXd alpha_bar = pc.rowwise().sum();
  Eigen::VectorXd beta_bar = pc.colwise().sum().transpose();
  Eigen::MatrixXd neg_bar = pc;

  for (int k = tape.sweeps(); k >= 1; --k) {
    const Eigen::VectorXd& alpha = tape.alpha[static_cast<std::size_t>(k - 1)];
    const Eigen::VectorXd& beta = tape.beta[static_cast<std::size_t>(k)];
    const Eigen::VectorXd& beta_prev =
        tape.beta[static_cast<std::size_t>(k - 1)];

    // beta_j = log(1/n) - lse_i(alpha_i + neg_ij); column-softmax weights.
    const Eigen::MatrixXd col_w = static_cast<double>(n) * scaled_plan(alpha, beta);
    alpha_bar -= col_w * beta_bar;
    neg_bar -= col_w * beta_bar.asDiagonal();

    // alpha_i = log(1/m) - lse_j(beta_prev_j + neg_ij); row-softmax weights.
    const Eigen::MatrixXd row_w =
        static_cast<double>(m) * scaled_plan(alpha, beta_prev);
    neg_bar -= alpha_bar.asDiagonal() * row_w;
    beta_bar = -(row_w.transpose() * alpha_bar);
    alpha_bar.setZero();
  }
  return p - neg_bar / eps;
}

// H(P) = -sum P_ij (log P_ij - 1), with 0 (log 0 - 1) = 0.
inline double entropy(const TransportPlan& plan) {
  double h = 0.0;
  const auto& p = plan.matrix();
  for (Eigen::Index j = 0; j < p.cols(); ++j) {
    for (Eigen::Index i = 0; i < p.rows(); ++i) {
      const double x = p(i, j);
      if (x > 0.0) h -= x * (std::log(x) - 1.0);
    }
  }
  return h;
}

// Gradient of sum_ij w_ij ||x_i - y_j||^2 with respect to both point sets.
struct CloudGradient {
  Eigen::Matrix3Xd dx;
  Eigen::Matrix3Xd dy;
};

inline CloudGradient cost_pullback(const PointCloud& x, const PointCloud& y,
                                   const Eigen::MatrixXd& weights) {
  CloudGradient g;
  const Eigen::VectorXd row = weights.rowwise().sum();
  const Eigen::VectorXd col = weights.colwise().sum().transpose();
  g.dx = 2.0 * (x.points * row.asDiagonal() - y.points * weights.transpose());
  g.dy = 2.0 * (y.points * col.asDiagonal() - x.points * weights);
  return g;
}

}  // namespace wcl

#endif  // WCL_SINKHORN_HPP_

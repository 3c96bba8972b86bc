#pragma once

// Weighted logistic regression and a damped Newton root-finder for vector
// estimating equations. Everything is templated on the Eigen expression type
// so float/double/long double designs all work; the rest of the library
// instantiates it with double.

#include <Eigen/Dense>

#include <cmath>
#include <functional>
#include <limits>
#include <string>
#include <type_traits>

#include "misexp/errors.hpp"

namespace misexp {

struct SolveOptions {
  int max_iterations = 100;
  double tolerance = 1e-8;  // on the max-norm of the score
  int max_halvings = 30;

  void validate() const {
    if (!(tolerance > 0.0)) throw ConfigError("SolveOptions: tolerance must be > 0");
    if (max_iterations < 1) throw ConfigError("SolveOptions: max_iterations must be >= 1");
    if (max_halvings < 0) throw ConfigError("SolveOptions: max_halvings must be >= 0");
  }
};

template <typename Scalar>
struct SolveResult {
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> coef;
  int iterations = 0;
  Scalar score_norm = 0;
};

/// Logistic function, branching on sign so exp() never overflows.
template <typename Scalar>
  requires std::is_floating_point_v<Scalar>
inline Scalar expit(Scalar x) {
  using std::exp;
  if (x >= Scalar(0)) {
    return Scalar(1) / (Scalar(1) + exp(-x));
  }
  const Scalar e = exp(x);
  return e / (Scalar(1) + e);
}

template <typename Scalar>
  requires std::is_floating_point_v<Scalar>
inline Scalar logit(Scalar p) {
  using std::log;
  return log(p / (Scalar(1) - p));
}

/// Elementwise expit of a linear predictor.
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, 1> expit(const Eigen::MatrixBase<Derived>& eta) {
  using Scalar = typename Derived::Scalar;
  return eta.derived().unaryExpr([](Scalar v) { return expit(v); });
}

/// Weighted logistic score  sum_i w_i x_i (y_i - expit(x_i' theta)).
template <typename DX, typename DY, typename DW, typename DT>
Eigen::Matrix<typename DX::Scalar, Eigen::Dynamic, 1> logistic_score(const Eigen::MatrixBase<DX>& X,
                                                                     const Eigen::MatrixBase<DY>& y,
                                                                     const Eigen::MatrixBase<DW>& w,
                                                                     const Eigen::MatrixBase<DT>& theta) {
  const auto mu = expit(X * theta);
  return X.transpose() * (w.array() * (y.array() - mu.array())).matrix();
}

/// Derivative of logistic_score with respect to theta (negative definite).
template <typename DX, typename DW, typename DT>
Eigen::Matrix<typename DX::Scalar, Eigen::Dynamic, Eigen::Dynamic> logistic_score_jacobian(
    const Eigen::MatrixBase<DX>& X, const Eigen::MatrixBase<DW>& w, const Eigen::MatrixBase<DT>& theta) {
  const auto mu = expit(X * theta);
  const auto v = (w.array() * mu.array() * (1 - mu.array())).matrix();
  return -(X.transpose() * v.asDiagonal() * X);
}

/// Fits sum_i w_i x_i [y_i - expit(x_i' theta)] = 0 by IRLS with step halving,
/// starting from theta = 0.
///
/// Throws SeparationError when a positive-weight fitted probability leaves
/// [1e-10, 1 - 1e-10] or one outcome class has no positive weight, RankError
/// when the weighted information has reciprocal condition below 1e-12, and
/// ConvergenceError when max_iterations is exhausted.
template <typename DX, typename DY, typename DW>
SolveResult<typename DX::Scalar> fit_weighted_logistic(const Eigen::MatrixBase<DX>& X,
                                                       const Eigen::MatrixBase<DY>& y,
                                                       const Eigen::MatrixBase<DW>& w,
                                                       const SolveOptions& opts = {}) {
  using Scalar = typename DX::Scalar;
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  opts.validate();

  const Eigen::Index n = X.rows();
  const Eigen::Index k = X.cols();
  if (y.size() != n || w.size() != n) throw ConfigError("fit_weighted_logistic: length mismatch");
  if (n < k) throw RankError("fit_weighted_logistic: fewer rows than columns");
  if (!X.allFinite() || !y.allFinite() || !w.allFinite()) {
    throw ConfigError("fit_weighted_logistic: non-finite input");
  }
  if ((w.array() < 0).any()) throw ConfigError("fit_weighted_logistic: negative weight");

  bool has_one = false;
  bool has_zero = false;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (w(i) > 0) {
      has_one = has_one || y(i) > 0;
      has_zero = has_zero || y(i) < 1;
    }
  }
  if (!has_one || !has_zero) {
    throw SeparationError("fit_weighted_logistic: outcome is constant on positive-weight rows");
  }

  constexpr Scalar kProbFloor = Scalar(1e-10);
  const auto check_separation = [&](const Vector& mu) {
    for (Eigen::Index i = 0; i < n; ++i) {
      if (w(i) > 0 && (mu(i) < kProbFloor || mu(i) > 1 - kProbFloor)) {
        throw SeparationError("fit_weighted_logistic: fitted probabilities pinned to {0,1}");
      }
    }
  };

  Vector theta = Vector::Zero(k);
  Vector mu = expit(X * theta);
  Vector score = X.transpose() * (w.array() * (y.array() - mu.array())).matrix();
  Scalar norm = score.template lpNorm<Eigen::Infinity>();

  for (int iter = 0; iter < opts.max_iterations; ++iter) {
    if (norm <= Scalar(opts.tolerance)) return {theta, iter, norm};

    const Vector v = (w.array() * mu.array() * (1 - mu.array())).matrix();
    const Matrix info = X.transpose() * v.asDiagonal() * X;
    Eigen::LLT<Matrix> llt(info);
    if (llt.info() != Eigen::Success || !(llt.rcond() >= Scalar(1e-12))) {
      throw RankError("fit_weighted_logistic: weighted information matrix is numerically singular");
    }
    const Vector step = llt.solve(score);
    if (!step.allFinite()) throw SeparationError("fit_weighted_logistic: Newton step diverged");

    Scalar scale = 1;
    bool accepted = false;
    for (int h = 0; h <= opts.max_halvings; ++h, scale /= 2) {
      const Vector trial = theta + scale * step;
      Vector trial_mu = expit(X * trial);
      const Vector trial_score = X.transpose() * (w.array() * (y.array() - trial_mu.array())).matrix();
      const Scalar trial_norm = trial_score.template lpNorm<Eigen::Infinity>();
      if (trial_norm < norm || h == opts.max_halvings) {
        check_separation(trial_mu);
        theta = trial;
        mu = std::move(trial_mu);
        score = trial_score;
        accepted = trial_norm < norm;
        norm = trial_norm;
        break;
      }
    }
    if (!accepted && norm > Scalar(opts.tolerance)) {
      throw ConvergenceError("fit_weighted_logistic: step halving could not reduce the score");
    }
  }
  if (norm <= Scalar(opts.tolerance)) return {theta, opts.max_iterations, norm};
  throw ConvergenceError("fit_weighted_logistic: no convergence within " +
                         std::to_string(opts.max_iterations) + " iterations");
}

template <typename Scalar>
using ScoreFunction = std::function<Eigen::Matrix<Scalar, Eigen::Dynamic, 1>(
    const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>&)>;
template <typename Scalar>
using JacobianFunction = std::function<Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>(
    const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>&)>;

/// Damped Newton for score(theta) = 0. The caller guarantees that `jacobian`
/// is the exact derivative of `score`. A full step is halved until the score
/// max-norm decreases.
template <typename Scalar>
SolveResult<Scalar> solve_estimating_equation(const ScoreFunction<Scalar>& score,
                                              const JacobianFunction<Scalar>& jacobian,
                                              Eigen::Matrix<Scalar, Eigen::Dynamic, 1> init,
                                              const SolveOptions& opts = {}) {
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  opts.validate();

  Vector theta = std::move(init);
  Vector g = score(theta);
  if (g.size() != theta.size()) throw ConfigError("solve_estimating_equation: score dimension mismatch");
  if (!g.allFinite()) throw ConvergenceError("solve_estimating_equation: non-finite score at start");
  Scalar norm = g.template lpNorm<Eigen::Infinity>();

  for (int iter = 0; iter < opts.max_iterations; ++iter) {
    if (norm <= Scalar(opts.tolerance)) return {theta, iter, norm};

    const Matrix J = jacobian(theta);
    if (J.rows() != theta.size() || J.cols() != theta.size()) {
      throw ConfigError("solve_estimating_equation: jacobian dimension mismatch");
    }
    Eigen::PartialPivLU<Matrix> lu(J);
    if (!(lu.rcond() >= Scalar(1e-12))) {
      throw SingularJacobianError("solve_estimating_equation: jacobian is numerically singular");
    }
    const Vector step = -lu.solve(g);

    Scalar scale = 1;
    bool accepted = false;
    for (int h = 0; h <= opts.max_halvings; ++h, scale /= 2) {
      const Vector trial = theta + scale * step;
      const Vector trial_g = score(trial);
      if (!trial_g.allFinite()) continue;
      const Scalar trial_norm = trial_g.template lpNorm<Eigen::Infinity>();
      if (trial_norm < norm) {
        theta = trial;
        g = trial_g;
        norm = trial_norm;
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      throw ConvergenceError("solve_estimating_equation: step halving could not reduce the score");
    }
  }
  if (norm <= Scalar(opts.tolerance)) return {theta, opts.max_iterations, norm};
  throw ConvergenceError("solve_estimating_equation: no convergence within " +
                         std::to_string(opts.max_iterations) + " iterations");
}

}  // namespace misexp

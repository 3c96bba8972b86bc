#pragma once

// Independent oracles shared by the test executables. Nothing here calls the
// library's solvers or quadrature; each routine is a slow but obvious
// reimplementation meant to cross-check the fast path.

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <stdexcept>
#include <utility>
#include <vector>

#include "misexp/data.hpp"
#include "misexp/random.hpp"

namespace oracle {

inline double sigmoid(double t) { return 0.5 * (1.0 + std::tanh(0.5 * t)); }

inline double log_likelihood(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const Eigen::VectorXd& theta) {
  double ll = 0.0;
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const double eta = x.row(i).dot(theta);
    // log(1 + e^eta) without overflow
    const double soft = eta > 0 ? eta + std::log1p(std::exp(-eta)) : std::log1p(std::exp(eta));
    ll += y(i) * eta - soft;
  }
  return ll;
}

/// Maximizes the two-coefficient logistic log-likelihood over [lo, hi]^2 by a
/// coarse grid followed by successively finer grids around the best point.
inline Eigen::Vector2d grid_search_logistic(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, double lo = -5.0,
                                            double hi = 5.0) {
  Eigen::Vector2d best(0.0, 0.0);
  double best_ll = -INFINITY;
  double step = 0.01;
  for (double a = lo; a <= hi + 1e-12; a += step) {
    for (double b = lo; b <= hi + 1e-12; b += step) {
      const double ll = log_likelihood(x, y, Eigen::Vector2d(a, b));
      if (ll > best_ll) {
        best_ll = ll;
        best = {a, b};
      }
    }
  }
  for (int round = 0; round < 3; ++round) {
    const Eigen::Vector2d centre = best;
    const double span = 2 * step;
    step /= 20.0;
    for (double a = centre(0) - span; a <= centre(0) + span; a += step) {
      for (double b = centre(1) - span; b <= centre(1) + span; b += step) {
        const double ll = log_likelihood(x, y, Eigen::Vector2d(a, b));
        if (ll > best_ll) {
          best_ll = ll;
          best = {a, b};
        }
      }
    }
  }
  return best;
}

/// Root of a continuous f on [lo, hi] with a sign change.
inline double bisect(const std::function<double(double)>& f, double lo, double hi, double tol = 1e-13) {
  double flo = f(lo);
  if (flo * f(hi) > 0) throw std::invalid_argument("bisect: no sign change");
  while (hi - lo > tol) {
    const double mid = 0.5 * (lo + hi);
    const double fm = f(mid);
    if ((fm < 0) == (flo < 0)) {
      lo = mid;
      flo = fm;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

inline Eigen::MatrixXd central_jacobian(const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& f,
                                        const Eigen::VectorXd& theta, double h = 1e-5) {
  const Eigen::Index k = theta.size();
  Eigen::MatrixXd jac(f(theta).size(), k);
  for (Eigen::Index j = 0; j < k; ++j) {
    Eigen::VectorXd up = theta, down = theta;
    up(j) += h;
    down(j) -= h;
    jac.col(j) = (f(up) - f(down)) / (2 * h);
  }
  return jac;
}

/// Frobenius-norm relative error of `approx` against `exact`.
inline double relative_error(const Eigen::MatrixXd& approx, const Eigen::MatrixXd& exact) {
  return (approx - exact).norm() / std::max(exact.norm(), 1e-300);
}

/// Physicists' Gauss-Hermite rule by Newton iteration on the orthonormal
/// Hermite recurrence, converted to the standard normal weight. Returns
/// (nodes, weights) with sum w f(z) ~ E f(Z).
inline std::pair<std::vector<double>, std::vector<double>> normal_rule(int n) {
  const double pim4 = 0.7511255444649425;  // pi^(-1/4)
  std::vector<double> x(n), w(n);
  double z = 0.0;
  for (int i = 0; i < (n + 1) / 2; ++i) {
    if (i == 0) {
      z = std::sqrt(2.0 * n + 1) - 1.85575 * std::pow(2.0 * n + 1, -0.16667);
    } else if (i == 1) {
      z -= 1.14 * std::pow(n, 0.426) / z;
    } else if (i == 2) {
      z = 1.86 * z - 0.86 * x[0];
    } else if (i == 3) {
      z = 1.91 * z - 0.91 * x[1];
    } else {
      z = 2.0 * z - x[i - 2];
    }
    double pp = 0.0;
    for (int it = 0; it < 200; ++it) {
      double p1 = pim4, p2 = 0.0;
      for (int j = 0; j < n; ++j) {
        const double p3 = p2;
        p2 = p1;
        p1 = z * std::sqrt(2.0 / (j + 1)) * p2 - std::sqrt(static_cast<double>(j) / (j + 1)) * p3;
      }
      pp = std::sqrt(2.0 * n) * p2;
      const double z1 = z;
      z = z1 - p1 / pp;
      if (std::abs(z - z1) <= 1e-15) break;
    }
    x[i] = z;
    x[n - 1 - i] = -z;
    w[i] = 2.0 / (pp * pp);
    w[n - 1 - i] = w[i];
  }
  const double root_pi = std::sqrt(M_PI);
  for (int i = 0; i < n; ++i) {
    x[i] *= std::sqrt(2.0);
    w[i] /= root_pi;
  }
  return {x, w};
}

/// Logistic projection of A on (1, X1, X2, X3, Y) under the three-covariate
/// generating law, by 3-D tensor Gauss-Hermite quadrature. With
/// `complete_cases` the population is reweighted by P(R = 0 | X, Y), which is
/// the limit of a complete-case fit; otherwise it is the full-data limit.
inline Eigen::VectorXd imputation_projection(const Eigen::VectorXd& coef_ps, const Eigen::VectorXd& coef_outcome,
                                             const Eigen::VectorXd& coef_missing, bool complete_cases,
                                             int order = 30) {
  const auto [nodes, weights] = normal_rule(order);
  struct Point {
    Eigen::Matrix<double, 5, 1> d;
    double mass;    // weight of (x, y)
    double exposed; // P(A = 1 | x, y) * mass
  };
  std::vector<Point> pts;
  pts.reserve(static_cast<std::size_t>(order) * order * order * 2);
  for (int i = 0; i < order; ++i) {
    for (int j = 0; j < order; ++j) {
      for (int k = 0; k < order; ++k) {
        const double x1 = nodes[i], x2 = nodes[j], x3 = nodes[k];
        const double wx = weights[i] * weights[j] * weights[k];
        const double e = sigmoid(coef_ps(0) + coef_ps(1) * x1 + coef_ps(2) * x2 + coef_ps(3) * x3);
        const double lin = coef_outcome(0) + coef_outcome(1) * x1 + coef_outcome(2) * x2 + coef_outcome(3) * x3;
        const double p1 = sigmoid(lin + coef_outcome(4));
        const double p0 = sigmoid(lin);
        for (int y = 0; y <= 1; ++y) {
          const double py1 = y ? p1 : 1 - p1;
          const double py0 = y ? p0 : 1 - p0;
          double keep = 1.0;
          if (complete_cases) {
            keep = 1.0 - sigmoid(coef_missing(0) + coef_missing(1) * x1 + coef_missing(2) * x2 +
                                 coef_missing(3) * x3 + coef_missing(4) * y);
          }
          Point pt;
          pt.d << 1.0, x1, x2, x3, static_cast<double>(y);
          pt.mass = wx * keep * (e * py1 + (1 - e) * py0);
          pt.exposed = wx * keep * e * py1;
          pts.push_back(pt);
        }
      }
    }
  }
  Eigen::Matrix<double, 5, 1> delta = Eigen::Matrix<double, 5, 1>::Zero();
  for (int it = 0; it < 100; ++it) {
    Eigen::Matrix<double, 5, 1> g = Eigen::Matrix<double, 5, 1>::Zero();
    Eigen::Matrix<double, 5, 5> h = Eigen::Matrix<double, 5, 5>::Zero();
    for (const Point& pt : pts) {
      const double mu = sigmoid(pt.d.dot(delta));
      g += (pt.exposed - pt.mass * mu) * pt.d;
      h += pt.mass * mu * (1 - mu) * pt.d * pt.d.transpose();
    }
    const Eigen::Matrix<double, 5, 1> step = h.ldlt().solve(g);
    delta += step;
    if (step.lpNorm<Eigen::Infinity>() < 1e-13) break;
  }
  return delta;
}

/// Mean and standard error of the mean.
struct MonteCarlo {
  double mean = 0.0;
  double se = 0.0;
};

inline MonteCarlo summarize(const std::vector<double>& draws) {
  const double n = static_cast<double>(draws.size());
  double s = 0.0, ss = 0.0;
  for (const double v : draws) s += v;
  const double mean = s / n;
  for (const double v : draws) ss += (v - mean) * (v - mean);
  return {mean, std::sqrt(ss / (n - 1) / n)};
}

/// Small dataset with `p` standard normal covariates, a logistic exposure and
/// outcome, and exposure missingness with probability `miss_rate` depending on
/// X1 and Y. Uses std::mt19937_64 so it shares no code with the library's
/// generator.
inline misexp::Dataset random_dataset(misexp::Index n, std::uint64_t seed, double miss_rate = 0.3, int p = 3) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> norm;
  std::uniform_real_distribution<double> unif;
  Eigen::MatrixXd cov(n, p);
  std::vector<std::optional<int>> a(n);
  Eigen::VectorXd y(n);
  for (misexp::Index i = 0; i < n; ++i) {
    for (int j = 0; j < p; ++j) cov(i, j) = norm(gen);
    const double lin = cov.row(i).sum() * 0.5;
    const int ai = unif(gen) < sigmoid(-0.1 + lin) ? 1 : 0;
    y(i) = unif(gen) < sigmoid(0.3 + 0.8 * ai + 0.6 * cov(i, 0) - 0.4 * cov(i, p - 1)) ? 1.0 : 0.0;
    const double pr = miss_rate <= 0 ? 0.0 : sigmoid(std::log(miss_rate / (1 - miss_rate)) + 0.4 * cov(i, 0) + 0.3 * y(i));
    if (unif(gen) >= pr) a[i] = ai;
  }
  return misexp::Dataset::from_columns(cov, a, y);
}

}  // namespace oracle

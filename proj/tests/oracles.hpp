// Test-side oracles, independent of the library implementation paths they
// check: adaptive quadrature, bisection quantiles, endpoint enumeration for
// tiny transport problems, and a vertex-enumeration feasibility check.
#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <vector>

#include <Eigen/Dense>

namespace oracles {

// Adaptive Simpson quadrature.
inline double simpson_segment(const std::function<double(double)>& f, double a,
                              double b, double fa, double fm, double fb) {
  return (b - a) / 6.0 * (fa + 4.0 * fm + fb);
}

inline double adaptive_simpson(const std::function<double(double)>& f, double a,
                               double m, double b, double fa, double fm,
                               double fb, double whole, double tol, int depth) {
  const double lm = 0.5 * (a + m);
  const double rm = 0.5 * (m + b);
  const double flm = f(lm);
  const double frm = f(rm);
  const double left = simpson_segment(f, a, m, fa, flm, fm);
  const double right = simpson_segment(f, m, b, fm, frm, fb);
  if (depth <= 0 || std::abs(left + right - whole) <= 15.0 * tol)
    return left + right + (left + right - whole) / 15.0;
  return adaptive_simpson(f, a, lm, m, fa, flm, fm, left, tol / 2.0, depth - 1) +
         adaptive_simpson(f, m, rm, b, fm, frm, fb, right, tol / 2.0, depth - 1);
}

inline double integrate(const std::function<double(double)>& f, double a,
                        double b, double tol = 1e-10) {
  const double m = 0.5 * (a + b);
  const double fa = f(a), fm = f(m), fb = f(b);
  return adaptive_simpson(f, a, m, b, fa, fm, fb,
                          simpson_segment(f, a, b, fa, fm, fb), tol, 48);
}

// Standard normal quantile by bisection on the erf-based CDF.
inline double normal_quantile_bisect(double p) {
  auto cdf = [](double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); };
  double lo = -42.0, hi = 42.0;
  for (int i = 0; i < 300; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (std::abs(cdf(mid) - p) < 1e-15) return mid;
    (cdf(mid) < p ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

// Exact optimum of a 2x2 transportation problem: one free variable, linear
// cost, so the optimum sits at an endpoint of the feasible interval.
inline double transport_2x2_min_cost(const std::array<double, 2>& supply,
                                     const std::array<double, 2>& demand,
                                     const std::array<double, 4>& cost) {
  const double lo = std::max(0.0, supply[0] - demand[1]);
  const double hi = std::min(supply[0], demand[0]);
  auto total = [&](double w00) {
    const double w01 = supply[0] - w00;
    const double w10 = demand[0] - w00;
    const double w11 = supply[1] - w10;
    return w00 * cost[0] + w01 * cost[1] + w10 * cost[2] + w11 * cost[3];
  };
  return std::min(total(lo), total(hi));
}

// Feasibility of {rows * u >= rhs} for up to 3 variables by enumerating the
// candidate vertices of the constraint arrangement.
inline bool polytope_feasible_by_vertices(const Eigen::MatrixXd& rows,
                                          const Eigen::VectorXd& rhs,
                                          double tol = 1e-9) {
  const Eigen::Index n = rows.cols();
  const Eigen::Index m = rows.rows();
  auto feasible = [&](const Eigen::VectorXd& u) {
    return ((rows * u - rhs).array() >= -tol).all();
  };
  if (feasible(Eigen::VectorXd::Zero(n))) return true;

  std::vector<Eigen::Index> idx(static_cast<std::size_t>(n));
  std::function<bool(Eigen::Index, Eigen::Index)> rec = [&](Eigen::Index k,
                                                            Eigen::Index start) {
    if (k == n) {
      Eigen::MatrixXd a(n, n);
      Eigen::VectorXd b(n);
      for (Eigen::Index i = 0; i < n; ++i) {
        a.row(i) = rows.row(idx[static_cast<std::size_t>(i)]);
        b[i] = rhs[idx[static_cast<std::size_t>(i)]];
      }
      const Eigen::FullPivLU<Eigen::MatrixXd> lu(a);
      if (!lu.isInvertible()) return false;
      return feasible(lu.solve(b));
    }
    for (Eigen::Index i = start; i < m; ++i) {
      idx[static_cast<std::size_t>(k)] = i;
      if (rec(k + 1, i + 1)) return true;
    }
    return false;
  };
  return rec(0, 0);
}

}  // namespace oracles

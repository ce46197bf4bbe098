#include "drefc/detail/simplex.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace drefc::detail {

namespace {

struct Tableau {
  std::size_t m, n;               // constraint rows, structural + artificial cols
  std::vector<double> a;          // row-major m x n
  std::vector<double> rhs;        // length m
  std::vector<double> cost;       // phase-2 reduced cost row, length n
  std::vector<double> art_cost;   // phase-1 reduced cost row, length n
  double obj = 0.0, art_obj = 0.0;
  std::vector<std::size_t> basis;  // length m

  double& at(std::size_t i, std::size_t j) { return a[i * n + j]; }
  double at(std::size_t i, std::size_t j) const { return a[i * n + j]; }

  void pivot(std::size_t pr, std::size_t pc) {
    const double pivot_val = at(pr, pc);
    const double inv = 1.0 / pivot_val;
    for (std::size_t j = 0; j < n; ++j) at(pr, j) *= inv;
    rhs[pr] *= inv;
    at(pr, pc) = 1.0;
    for (std::size_t i = 0; i < m; ++i) {
      if (i == pr) continue;
      const double f = at(i, pc);
      if (f == 0.0) continue;
      for (std::size_t j = 0; j < n; ++j) at(i, j) -= f * at(pr, j);
      at(i, pc) = 0.0;
      rhs[i] -= f * rhs[pr];
    }
    auto eliminate = [&](std::vector<double>& row, double& value) {
      const double f = row[pc];
      if (f == 0.0) return;
      for (std::size_t j = 0; j < n; ++j) row[j] -= f * at(pr, j);
      row[pc] = 0.0;
      value -= f * rhs[pr];
    };
    eliminate(cost, obj);
    eliminate(art_cost, art_obj);
    basis[pr] = pc;
  }

  // One simplex phase on the given reduced-cost row. Bland's rule: entering
  // column is the lowest index with negative reduced cost (columns beyond
  // `col_limit` are ignored, which locks artificials out of phase 2).
  LpStatus run(std::vector<double>& reduced, std::size_t col_limit,
               std::size_t max_iter) {
    const double tol = 1e-9;
    for (std::size_t iter = 0; iter < max_iter; ++iter) {
      std::size_t enter = n;
      for (std::size_t j = 0; j < col_limit; ++j)
        if (reduced[j] < -tol) {
          enter = j;
          break;
        }
      if (enter == n) return LpStatus::optimal;

      std::size_t leave = m;
      double best_ratio = std::numeric_limits<double>::infinity();
      for (std::size_t i = 0; i < m; ++i) {
        const double col = at(i, enter);
        if (col > tol) {
          const double ratio = rhs[i] / col;
          if (ratio < best_ratio - 1e-15 ||
              (ratio < best_ratio + 1e-15 &&
               (leave == m || basis[i] < basis[leave]))) {
            best_ratio = ratio;
            leave = i;
          }
        }
      }
      if (leave == m) return LpStatus::unbounded;
      pivot(leave, enter);
    }
    return LpStatus::iteration_limit;
  }
};

}  // namespace

LpResult solve_lp_eq(const std::vector<double>& c,
                     const std::vector<std::vector<double>>& rows,
                     const std::vector<double>& b, std::size_t max_iter) {
  const std::size_t m = rows.size();
  const std::size_t n_struct = c.size();
  if (max_iter == 0) max_iter = 50 * (m + n_struct) + 1000;

  Tableau t;
  t.m = m;
  t.n = n_struct + m;  // structural + one artificial per row
  t.a.assign(t.m * t.n, 0.0);
  t.rhs.resize(m);
  t.basis.resize(m);
  for (std::size_t i = 0; i < m; ++i) {
    const double flip = b[i] < 0.0 ? -1.0 : 1.0;
    for (std::size_t j = 0; j < n_struct; ++j) t.at(i, j) = flip * rows[i][j];
    t.rhs[i] = flip * b[i];
    t.at(i, n_struct + i) = 1.0;
    t.basis[i] = n_struct + i;
  }

  t.cost.assign(t.n, 0.0);
  for (std::size_t j = 0; j < n_struct; ++j) t.cost[j] = c[j];
  t.art_cost.assign(t.n, 0.0);
  // Price out the artificial basis from the phase-1 objective.
  for (std::size_t j = 0; j < n_struct; ++j) {
    double s = 0.0;
    for (std::size_t i = 0; i < m; ++i) s += t.at(i, j);
    t.art_cost[j] = -s;
  }
  t.art_obj = 0.0;
  for (std::size_t i = 0; i < m; ++i) t.art_obj -= t.rhs[i];

  LpResult out;
  const LpStatus phase1 = t.run(t.art_cost, n_struct, max_iter);
  if (phase1 == LpStatus::iteration_limit) {
    out.status = LpStatus::iteration_limit;
    return out;
  }
  // art_obj tracks -(sum of artificials); feasible iff it reached ~0.
  double b_scale = 0.0;
  for (double v : b) b_scale = std::max(b_scale, std::abs(v));
  if (t.art_obj < -1e-9 * (1.0 + b_scale)) {
    out.status = LpStatus::infeasible;
    return out;
  }

  // Drive any leftover artificial out of the basis.
  for (std::size_t i = 0; i < m; ++i) {
    if (t.basis[i] < n_struct) continue;
    std::size_t pc = t.n;
    for (std::size_t j = 0; j < n_struct; ++j)
      if (std::abs(t.at(i, j)) > 1e-9) {
        pc = j;
        break;
      }
    if (pc != t.n) t.pivot(i, pc);
    // Otherwise the row is redundant; the artificial stays basic at zero.
  }

  const LpStatus phase2 = t.run(t.cost, n_struct, max_iter);
  out.status = phase2;
  if (phase2 != LpStatus::optimal) return out;

  out.x.assign(n_struct, 0.0);
  for (std::size_t i = 0; i < m; ++i)
    if (t.basis[i] < n_struct) out.x[t.basis[i]] = t.rhs[i];
  out.objective = -t.obj;  // obj accumulates -(c.x) through pivots
  return out;
}

}  // namespace drefc::detail

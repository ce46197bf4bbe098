#include "drefc/ambiguity.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>

namespace drefc {

void Coupling::validate(double tol) const {
  if (w.size() != rows * cols || row_marginals.size() != rows ||
      col_marginals.size() != cols)
    throw argument_error("Coupling: shape mismatch");
  for (double x : w)
    if (x < -tol) throw argument_error("Coupling: negative entry");
  for (std::size_t r = 0; r < rows; ++r) {
    double s = 0.0;
    for (std::size_t c = 0; c < cols; ++c) s += (*this)(r, c);
    if (std::abs(s - row_marginals[r]) > tol)
      throw argument_error("Coupling: row marginal mismatch");
  }
  for (std::size_t c = 0; c < cols; ++c) {
    double s = 0.0;
    for (std::size_t r = 0; r < rows; ++r) s += (*this)(r, c);
    if (std::abs(s - col_marginals[c]) > tol)
      throw argument_error("Coupling: column marginal mismatch");
  }
}

double w2_gaussian(double mean1, double stddev1, double mean2, double stddev2) {
  if (!(stddev1 > 0.0) || !(stddev2 > 0.0))
    throw argument_error("w2_gaussian: stddevs must be positive");
  const double dm = mean1 - mean2;
  const double ds = stddev1 - stddev2;
  return dm * dm + ds * ds;
}

namespace {

// Exact solver for the dense transportation problem by the classical
// primal (MODI) transportation simplex: northwest-corner start, dual
// recomputation over the basis tree, Bland entering rule against cycling.
struct TransportSimplex {
  std::size_t m, n;
  const std::vector<double>& cost;  // row-major m x n
  std::vector<double> value;        // current plan, row-major
  std::vector<char> basic;          // basis flags

  TransportSimplex(std::size_t m_, std::size_t n_,
                   const std::vector<double>& cost_)
      : m(m_), n(n_), cost(cost_), value(m_ * n_, 0.0), basic(m_ * n_, 0) {}

  std::size_t idx(std::size_t i, std::size_t j) const { return i * n + j; }

  void northwest_corner(std::vector<double> supply, std::vector<double> demand) {
    std::size_t i = 0, j = 0;
    while (true) {
      const double q = std::min(supply[i], demand[j]);
      value[idx(i, j)] = q;
      basic[idx(i, j)] = 1;
      supply[i] -= q;
      demand[j] -= q;
      if (i == m - 1 && j == n - 1) break;
      const bool row_done = supply[i] <= 0.0;
      if ((row_done && i < m - 1) || j == n - 1)
        ++i;
      else
        ++j;
    }
  }

  // Duals u_i + v_j = c_ij on basic cells, propagated over the basis tree.
  void compute_duals(std::vector<double>& u, std::vector<double>& v) const {
    u.assign(m, std::numeric_limits<double>::quiet_NaN());
    v.assign(n, std::numeric_limits<double>::quiet_NaN());
    u[0] = 0.0;
    std::deque<std::pair<bool, std::size_t>> queue;  // (is_row, index)
    queue.emplace_back(true, 0);
    while (!queue.empty()) {
      auto [is_row, a] = queue.front();
      queue.pop_front();
      if (is_row) {
        for (std::size_t j = 0; j < n; ++j)
          if (basic[idx(a, j)] && std::isnan(v[j])) {
            v[j] = cost[idx(a, j)] - u[a];
            queue.emplace_back(false, j);
          }
      } else {
        for (std::size_t i = 0; i < m; ++i)
          if (basic[idx(i, a)] && std::isnan(u[i])) {
            u[i] = cost[idx(i, a)] - v[a];
            queue.emplace_back(true, i);
          }
      }
    }
  }

  // Path in the basis tree from row `ri` to column `cj`; returns the edge
  // list as cell indices ordered from the row end to the column end.
  std::vector<std::size_t> tree_path(std::size_t ri, std::size_t cj) const {
    const std::size_t nodes = m + n;
    std::vector<int> parent_edge(nodes, -1);
    std::vector<int> parent_node(nodes, -1);
    std::vector<char> seen(nodes, 0);
    std::deque<std::size_t> queue;
    queue.push_back(ri);
    seen[ri] = 1;
    while (!queue.empty()) {
      const std::size_t node = queue.front();
      queue.pop_front();
      if (node == m + cj) break;
      if (node < m) {
        for (std::size_t j = 0; j < n; ++j)
          if (basic[idx(node, j)] && !seen[m + j]) {
            seen[m + j] = 1;
            parent_edge[m + j] = static_cast<int>(idx(node, j));
            parent_node[m + j] = static_cast<int>(node);
            queue.push_back(m + j);
          }
      } else {
        const std::size_t j = node - m;
        for (std::size_t i = 0; i < m; ++i)
          if (basic[idx(i, j)] && !seen[i]) {
            seen[i] = 1;
            parent_edge[i] = static_cast<int>(idx(i, j));
            parent_node[i] = static_cast<int>(node);
            queue.push_back(i);
          }
      }
    }
    std::vector<std::size_t> edges;
    std::size_t node = m + cj;
    while (node != ri) {
      edges.push_back(static_cast<std::size_t>(parent_edge[node]));
      node = static_cast<std::size_t>(parent_node[node]);
    }
    std::reverse(edges.begin(), edges.end());  // row end -> column end
    return edges;
  }

  void solve() {
    double cmax = 0.0;
    for (double c : cost) cmax = std::max(cmax, std::abs(c));
    const double tol = 1e-12 * (1.0 + cmax);
    const std::size_t max_iter = 200 * m * n + 200;

    std::vector<double> u, v;
    for (std::size_t iter = 0; iter < max_iter; ++iter) {
      compute_duals(u, v);

      // Bland: first cell (row-major) with negative reduced cost.
      std::size_t enter = value.size();
      for (std::size_t i = 0; i < m && enter == value.size(); ++i)
        for (std::size_t j = 0; j < n; ++j)
          if (!basic[idx(i, j)] && cost[idx(i, j)] - u[i] - v[j] < -tol) {
            enter = idx(i, j);
            break;
          }
      if (enter == value.size()) return;  // optimal

      const std::size_t ei = enter / n;
      const std::size_t ej = enter % n;
      const std::vector<std::size_t> path = tree_path(ei, ej);

      // Signs alternate around the cycle; the edge touching column ej (the
      // last one) shares a column with the entering cell, so it gets '-'.
      double theta = std::numeric_limits<double>::infinity();
      std::size_t leave = value.size();
      for (std::size_t t = 0; t < path.size(); ++t) {
        const bool minus = ((path.size() - 1 - t) % 2) == 0;
        if (minus && (value[path[t]] < theta ||
                      (value[path[t]] == theta && path[t] < leave))) {
          theta = value[path[t]];
          leave = path[t];
        }
      }

      value[enter] = theta;
      basic[enter] = 1;
      for (std::size_t t = 0; t < path.size(); ++t) {
        const bool minus = ((path.size() - 1 - t) % 2) == 0;
        value[path[t]] += minus ? -theta : theta;
      }
      value[leave] = 0.0;
      basic[leave] = 0;
    }
    throw solver_error("transportation simplex: iteration limit reached");
  }
};

}  // namespace

Mw2Result mw2(const Gmm& a, const Gmm& b) {
  a.validate();
  b.validate();

  // Drop zero-weight components before transport.
  std::vector<std::size_t> ra, rb;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (a.weights[i] > 1e-15) ra.push_back(i);
  for (std::size_t j = 0; j < b.size(); ++j)
    if (b.weights[j] > 1e-15) rb.push_back(j);

  const std::size_t m = ra.size();
  const std::size_t n = rb.size();
  double sa = 0.0, sb = 0.0;
  for (auto i : ra) sa += a.weights[i];
  for (auto j : rb) sb += b.weights[j];

  std::vector<double> supply(m), demand(n), cost(m * n);
  for (std::size_t i = 0; i < m; ++i) supply[i] = a.weights[ra[i]] / sa;
  for (std::size_t j = 0; j < n; ++j) demand[j] = b.weights[rb[j]] / sb;
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j)
      cost[i * n + j] = w2_gaussian(a.means[ra[i]], a.stddevs[ra[i]],
                                    b.means[rb[j]], b.stddevs[rb[j]]);

  TransportSimplex ts(m, n, cost);
  ts.northwest_corner(supply, demand);
  ts.solve();

  Mw2Result out;
  out.coupling.rows = a.size();
  out.coupling.cols = b.size();
  out.coupling.w.assign(a.size() * b.size(), 0.0);
  out.coupling.row_marginals = a.weights;
  out.coupling.col_marginals = b.weights;
  double total = 0.0;
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      const double x = ts.value[i * n + j];
      if (x != 0.0) {
        out.coupling.w[ra[i] * b.size() + rb[j]] = x;
        total += x * cost[i * n + j];
      }
    }
  out.distance_sq = std::max(0.0, total);
  return out;
}

void AmbiguitySet::validate() const {
  reference.validate();
  if (radius < 0.0) throw argument_error("AmbiguitySet: radius must be >= 0");
  if (budget() < 1) throw argument_error("AmbiguitySet: component budget must be >= 1");
}

MembershipResult membership(const AmbiguitySet& set, const Gmm& candidate) {
  set.validate();
  const Mw2Result r = mw2(set.reference, candidate);
  return {r.distance_sq <= set.radius + 1e-12, r.distance_sq};
}

}  // namespace drefc

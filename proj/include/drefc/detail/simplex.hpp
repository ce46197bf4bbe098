// Dense two-phase primal simplex for the small linear programs that appear
// inside the margin solver and the control feasibility check. Bland's rule
// throughout, so it terminates on degenerate bases.
#pragma once

#include <cstddef>
#include <vector>

namespace drefc::detail {

enum class LpStatus { optimal, infeasible, unbounded, iteration_limit };

struct LpResult {
  LpStatus status = LpStatus::iteration_limit;
  std::vector<double> x;
  double objective = 0.0;
};

// Minimize c.x subject to A x = b, x >= 0. Rows of A are the equality
// constraints; b may have any sign (rows are flipped internally).
LpResult solve_lp_eq(const std::vector<double>& c,
                     const std::vector<std::vector<double>>& rows,
                     const std::vector<double>& b,
                     std::size_t max_iter = 0);

}  // namespace drefc::detail

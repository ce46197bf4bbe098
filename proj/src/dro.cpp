#include "drefc/dro.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "drefc/detail/simplex.hpp"

namespace drefc {

namespace {

double normal_cdf(double x) { return 0.5 * std::erfc(-x * 0.7071067811865475244); }

// Acklam's rational approximation of the inverse normal CDF (~1.15e-9
// relative error before refinement).
double quantile_seed(double p) {
  static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                             -2.759285104469687e+02, 1.383577518672690e+02,
                             -3.066479806614716e+01, 2.506628277459239e+00};
  static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                             -1.556989798598866e+02, 6.680131188771972e+01,
                             -1.328068155288572e+01};
  static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                             -2.400758277161838e+00, -2.549732539343734e+00,
                             4.374664141464968e+00,  2.938163982698783e+00};
  static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                             2.445134137142996e+00, 3.754408661907416e+00};
  constexpr double p_low = 0.02425;

  if (p < p_low) {
    const double q = std::sqrt(-2.0 * std::log(p));
    return (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
           ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  if (p > 1.0 - p_low) {
    const double q = std::sqrt(-2.0 * std::log(1.0 - p));
    return -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
           ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  const double q = p - 0.5;
  const double r = q * q;
  return (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
         (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
}

}  // namespace

double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0))
    throw argument_error("normal_quantile: p must be in (0, 1)");
  double x = quantile_seed(p);
  // One Halley step against the erfc-based CDF.
  const double e = normal_cdf(x) - p;
  const double u = e * 2.5066282746310005024 * std::exp(0.5 * x * x);
  x -= u / (1.0 + 0.5 * x * u);
  return x;
}

VarSpec::VarSpec(double alpha_) : alpha(alpha_) {
  validate();
  z = normal_quantile(1.0 - alpha);
}

void VarSpec::validate() const {
  if (!(alpha > 0.0 && alpha < 0.5))
    throw argument_error("VarSpec: alpha must be in (0, 0.5)");
}

double exact_icdf(const Gmm& g, double p) {
  g.validate();
  if (!(p > 0.0 && p < 1.0))
    throw argument_error("exact_icdf: p must be in (0, 1)");
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < g.size(); ++k) {
    lo = std::min(lo, g.means[k] - 40.0 * g.stddevs[k]);
    hi = std::max(hi, g.means[k] + 40.0 * g.stddevs[k]);
  }
  double mid = 0.5 * (lo + hi);
  for (int iter = 0; iter < 400; ++iter) {
    mid = 0.5 * (lo + hi);
    const double f = cdf(g, mid);
    if (std::abs(f - p) < 1e-12) return mid;
    if (f < p)
      lo = mid;
    else
      hi = mid;
    if (hi - lo <= 4.0 * std::numeric_limits<double>::epsilon() *
                       std::max(1.0, std::max(std::abs(lo), std::abs(hi))))
      break;
  }
  return 0.5 * (lo + hi);
}

double approx_icdf(const Gmm& g, double p) {
  g.validate();
  if (!(p > 0.0 && p < 1.0))
    throw argument_error("approx_icdf: p must be in (0, 1)");
  const double z = normal_quantile(p);
  double acc = 0.0;
  for (std::size_t k = 0; k < g.size(); ++k)
    acc += g.weights[k] * (g.means[k] + g.stddevs[k] * z);
  return acc;
}

namespace {

struct Candidate {
  std::vector<double> row_weights;  // pi_hat, row sums of the coupling
  std::vector<double> means;
  std::vector<double> stddevs;
  std::vector<double> w;  // coupling, row-major K x L
  double objective = -std::numeric_limits<double>::infinity();
  std::vector<double> trace;
};

double coupling_cost(const Candidate& c, const Gmm& ref) {
  const std::size_t l_count = ref.size();
  double acc = 0.0;
  for (std::size_t k = 0; k < c.means.size(); ++k)
    for (std::size_t l = 0; l < l_count; ++l) {
      const double w = c.w[k * l_count + l];
      if (w > 0.0)
        acc += w * w2_gaussian(c.means[k], c.stddevs[k], ref.means[l],
                               ref.stddevs[l]);
    }
  return acc;
}

// Step A: with the coupling fixed, the budgeted maximization over component
// parameters has a closed form: every component shifts by the same s in mean
// and s*z in stddev from its barycenter, with s set by the active budget.
void component_step(Candidate& c, const Gmm& ref, double gamma, double z) {
  const std::size_t k_count = c.means.size();
  const std::size_t l_count = ref.size();
  double within = 0.0;
  std::vector<double> mbar(k_count), sbar(k_count);
  for (std::size_t k = 0; k < k_count; ++k) {
    double rw = 0.0, ms = 0.0, ss = 0.0;
    for (std::size_t l = 0; l < l_count; ++l) {
      const double w = c.w[k * l_count + l];
      rw += w;
      ms += w * ref.means[l];
      ss += w * ref.stddevs[l];
    }
    c.row_weights[k] = rw;
    if (rw <= 1e-15) {
      mbar[k] = c.means[k];
      sbar[k] = c.stddevs[k];
      continue;
    }
    mbar[k] = ms / rw;
    sbar[k] = ss / rw;
    for (std::size_t l = 0; l < l_count; ++l) {
      const double w = c.w[k * l_count + l];
      if (w > 0.0) {
        const double dm = ref.means[l] - mbar[k];
        const double ds = ref.stddevs[l] - sbar[k];
        within += w * (dm * dm + ds * ds);
      }
    }
  }
  const double budget = std::max(0.0, gamma - within);
  const double s = std::sqrt(budget / (1.0 + z * z));
  for (std::size_t k = 0; k < k_count; ++k) {
    c.means[k] = mbar[k] + s;
    c.stddevs[k] = std::max(sbar[k] + s * z, kSigmaFloor);
  }
  double obj = 0.0;
  for (std::size_t k = 0; k < k_count; ++k)
    obj += c.row_weights[k] * (c.means[k] + c.stddevs[k] * z);
  c.objective = obj;
}

// Step B: with the components fixed, re-optimize the coupling. Column sums
// are pinned to the reference weights; the transport cost up to gamma is one
// knapsack row. Solved exactly as a small LP.
void coupling_step(Candidate& c, const Gmm& ref, double gamma, double z) {
  const std::size_t k_count = c.means.size();
  const std::size_t l_count = ref.size();
  const std::size_t nv = k_count * l_count + 1;  // + budget slack

  std::vector<double> rate(k_count);
  double rate_scale = 0.0;
  for (std::size_t k = 0; k < k_count; ++k) {
    rate[k] = c.means[k] + c.stddevs[k] * z;
    rate_scale = std::max(rate_scale, std::abs(rate[k]));
  }
  if (rate_scale <= 0.0) rate_scale = 1.0;

  std::vector<double> costs(k_count * l_count);
  double cost_scale = 0.0;
  for (std::size_t k = 0; k < k_count; ++k)
    for (std::size_t l = 0; l < l_count; ++l) {
      costs[k * l_count + l] = w2_gaussian(c.means[k], c.stddevs[k],
                                           ref.means[l], ref.stddevs[l]);
      cost_scale = std::max(cost_scale, costs[k * l_count + l]);
    }
  if (cost_scale <= 0.0) cost_scale = 1.0;

  std::vector<double> obj(nv, 0.0);
  for (std::size_t k = 0; k < k_count; ++k)
    for (std::size_t l = 0; l < l_count; ++l)
      obj[k * l_count + l] = -rate[k] / rate_scale;  // maximize total rate

  std::vector<std::vector<double>> rows;
  std::vector<double> rhs;
  for (std::size_t l = 0; l < l_count; ++l) {
    std::vector<double> row(nv, 0.0);
    for (std::size_t k = 0; k < k_count; ++k) row[k * l_count + l] = 1.0;
    rows.push_back(std::move(row));
    rhs.push_back(ref.weights[l]);
  }
  std::vector<double> budget_row(nv, 0.0);
  for (std::size_t i = 0; i < costs.size(); ++i)
    budget_row[i] = costs[i] / cost_scale;
  budget_row[nv - 1] = 1.0;
  rows.push_back(std::move(budget_row));
  rhs.push_back(gamma / cost_scale);

  const detail::LpResult lp = detail::solve_lp_eq(obj, rows, rhs);
  if (lp.status != detail::LpStatus::optimal)
    throw solver_error("worst_case_margin: coupling LP failed");

  for (std::size_t i = 0; i < k_count * l_count; ++i) c.w[i] = lp.x[i];
  double objective = 0.0;
  for (std::size_t k = 0; k < k_count; ++k) {
    double rw = 0.0;
    for (std::size_t l = 0; l < l_count; ++l) rw += c.w[k * l_count + l];
    c.row_weights[k] = rw;
    objective += rw * rate[k];
  }
  c.objective = objective;
}

std::vector<std::vector<double>> starting_couplings(const Gmm& ref,
                                                    std::size_t k_budget) {
  const std::size_t l_count = ref.size();
  std::vector<std::vector<double>> starts;
  const std::size_t cap = 24;

  if (k_budget == l_count) {
    std::vector<std::size_t> perm(l_count);
    std::iota(perm.begin(), perm.end(), 0);
    do {
      std::vector<double> w(k_budget * l_count, 0.0);
      for (std::size_t l = 0; l < l_count; ++l)
        w[perm[l] * l_count + l] = ref.weights[l];
      starts.push_back(std::move(w));
    } while (starts.size() < cap && std::next_permutation(perm.begin(), perm.end()));
    return starts;
  }

  if (k_budget > l_count) {
    // Identity block, extra rows splitting the heaviest reference column.
    const std::size_t heavy = static_cast<std::size_t>(
        std::max_element(ref.weights.begin(), ref.weights.end()) -
        ref.weights.begin());
    std::vector<double> w(k_budget * l_count, 0.0);
    const std::size_t extra = k_budget - l_count + 1;
    for (std::size_t l = 0; l < l_count; ++l) {
      if (l == heavy) continue;
      w[l * l_count + l] = ref.weights[l];
    }
    const double share = ref.weights[heavy] / static_cast<double>(extra);
    w[heavy * l_count + heavy] = share;
    for (std::size_t e = 0; e < extra - 1; ++e)
      w[(l_count + e) * l_count + heavy] = share;
    starts.push_back(std::move(w));
    return starts;
  }

  // k_budget < l_count: contiguous groupings of components sorted by mean.
  std::vector<std::size_t> order(l_count);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return ref.means[a] < ref.means[b]; });
  // Enumerate splits of the sorted sequence into k_budget contiguous groups.
  std::vector<std::size_t> cuts(k_budget - 1);
  std::iota(cuts.begin(), cuts.end(), 1);  // first split positions 1..k-1
  while (true) {
    std::vector<double> w(k_budget * l_count, 0.0);
    std::size_t group = 0;
    for (std::size_t pos = 0; pos < l_count; ++pos) {
      while (group < cuts.size() && pos >= cuts[group]) ++group;
      w[group * l_count + order[pos]] = ref.weights[order[pos]];
    }
    starts.push_back(std::move(w));
    if (starts.size() >= cap) break;
    // Advance the cut positions (combinations of {1..l_count-1}).
    std::size_t i = cuts.size();
    while (i > 0) {
      --i;
      if (cuts[i] < l_count - (cuts.size() - i)) {
        ++cuts[i];
        for (std::size_t j = i + 1; j < cuts.size(); ++j) cuts[j] = cuts[j - 1] + 1;
        break;
      }
      if (i == 0) return starts;
    }
    if (k_budget == 1) break;  // single empty-cut configuration
  }
  return starts;
}

}  // namespace

WorstCaseResult worst_case_margin(const AmbiguitySet& set, const VarSpec& var) {
  set.validate();
  var.validate();
  const Gmm& ref = set.reference;
  const double gamma = set.radius;
  const double z = var.z;
  const std::size_t l_count = ref.size();
  const std::size_t k_budget = set.budget();

  WorstCaseResult out;
  if (gamma == 0.0) {
    out.worst = ref;
    out.zeta = approx_icdf(ref, 1.0 - var.alpha);
    out.coupling.rows = l_count;
    out.coupling.cols = l_count;
    out.coupling.w.assign(l_count * l_count, 0.0);
    for (std::size_t l = 0; l < l_count; ++l)
      out.coupling.w[l * l_count + l] = ref.weights[l];
    out.coupling.row_marginals = ref.weights;
    out.coupling.col_marginals = ref.weights;
    out.objective_trace = {out.zeta};
    out.active_distance_sq = 0.0;
    return out;
  }

  Candidate best;
  double best_cost = std::numeric_limits<double>::infinity();
  const auto starts = starting_couplings(ref, k_budget);
  for (const auto& w0 : starts) {
    Candidate c;
    c.w = w0;
    c.row_weights.assign(k_budget, 0.0);
    c.means.assign(k_budget, ref.means[0]);
    c.stddevs.assign(k_budget, ref.stddevs[0]);

    double prev = -std::numeric_limits<double>::infinity();
    for (std::size_t iter = 0; iter < 200; ++iter) {
      component_step(c, ref, gamma, z);
      coupling_step(c, ref, gamma, z);
      c.trace.push_back(c.objective);
      if (iter > 0 &&
          std::abs(c.objective - prev) <= 1e-10 * std::max(1.0, std::abs(c.objective)))
        break;
      prev = c.objective;
    }
    // Re-run the component step so the returned parameters are optimal for
    // the final coupling (this is what makes the budget constraint active).
    component_step(c, ref, gamma, z);
    c.trace.push_back(c.objective);

    const double cost = coupling_cost(c, ref);
    const bool better =
        c.objective > best.objective + 1e-15 ||
        (std::abs(c.objective - best.objective) <= 1e-15 && cost < best_cost);
    if (best.w.empty() || better) {
      best = c;
      best_cost = cost;
    }
  }

  // Assemble the result, dropping zero-weight rows.
  std::vector<std::size_t> keep;
  for (std::size_t k = 0; k < k_budget; ++k)
    if (best.row_weights[k] > 1e-15) keep.push_back(k);
  double wsum = 0.0;
  for (auto k : keep) wsum += best.row_weights[k];

  out.worst.weights.clear();
  for (auto k : keep) {
    out.worst.weights.push_back(best.row_weights[k] / wsum);
    out.worst.means.push_back(best.means[k]);
    out.worst.stddevs.push_back(best.stddevs[k]);
  }
  out.worst.validate();

  out.coupling.rows = keep.size();
  out.coupling.cols = l_count;
  out.coupling.w.assign(keep.size() * l_count, 0.0);
  for (std::size_t r = 0; r < keep.size(); ++r)
    for (std::size_t l = 0; l < l_count; ++l)
      out.coupling.w[r * l_count + l] = best.w[keep[r] * l_count + l];
  out.coupling.row_marginals.clear();
  for (auto k : keep) out.coupling.row_marginals.push_back(best.row_weights[k]);
  out.coupling.col_marginals = ref.weights;

  out.zeta = approx_icdf(out.worst, 1.0 - var.alpha);
  out.objective_trace = best.trace;
  out.active_distance_sq = mw2(out.worst, ref).distance_sq;

  const double reference_value = approx_icdf(ref, 1.0 - var.alpha);
  if (!(out.zeta > reference_value))
    throw solver_error(
        "worst_case_margin: no improvement over the reference at gamma > 0");
  return out;
}

}  // namespace drefc

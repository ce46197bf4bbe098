// Distributionally robust margin machinery: normal quantile, exact and
// approximate mixture quantiles, and the worst-case margin maximization over
// a mixture ambiguity ball (the lower subproblem of the decomposed min-max
// control program).
#pragma once

#include <vector>

#include "drefc/ambiguity.hpp"
#include "drefc/gmm.hpp"

namespace drefc {

struct VarSpec {
  double alpha = 0.05;  // significance level, in (0, 0.5)
  double z = 0.0;       // cached standard-normal quantile at 1 - alpha

  VarSpec() : VarSpec(0.05) {}
  explicit VarSpec(double alpha_);
  void validate() const;
};

// Inverse standard normal CDF: rational approximation refined by one Halley
// step on the erfc-based CDF; absolute error below 1e-12.
double normal_quantile(double p);

// Quantile of a scalar mixture by bisection on cdf(), bracketed at +-40
// standard deviations around the component means.
double exact_icdf(const Gmm& g, double p);

// Weight-averaged per-component quantile sum: sum_k pi_k (m_k + s_k z_p).
// Exact for a single component, approximate otherwise; linear in the means
// and stddevs for fixed weights.
double approx_icdf(const Gmm& g, double p);

struct WorstCaseResult {
  double zeta = 0.0;   // worst-case margin, the maximized objective
  Gmm worst;           // maximizing mixture (inside the ambiguity set)
  Coupling coupling;   // rows follow `worst`, columns follow the reference
  std::vector<double> objective_trace;
  double active_distance_sq = 0.0;  // mw2(worst, reference)
};

// Maximizes sum_k pi_k (m_k + s_k z) over mixtures within mw2 radius gamma of
// the reference, by alternating a closed-form component update (coupling
// fixed) with a transport LP (components fixed), multi-started over coupling
// permutations. With a component budget at least the reference size the
// optimum has the closed form approx_icdf(reference) + sqrt(gamma (1+z^2)).
WorstCaseResult worst_case_margin(const AmbiguitySet& set, const VarSpec& var);

}  // namespace drefc

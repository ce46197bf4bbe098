// Wasserstein-type geometry on scalar Gaussian mixtures: the Gaussian W2
// ground cost, the mixture distance MW2 solved as a transportation problem,
// and membership tests against a radius-gamma ambiguity ball.
#pragma once

#include <cstddef>
#include <vector>

#include "drefc/gmm.hpp"

namespace drefc {

// Non-negative matrix whose rows sum to `row_marginals` and columns to
// `col_marginals` (the transportation polytope element realizing a mixture
// coupling).
struct Coupling {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> w;  // row-major, rows * cols
  std::vector<double> row_marginals;
  std::vector<double> col_marginals;

  double operator()(std::size_t r, std::size_t c) const { return w[r * cols + c]; }
  double& at(std::size_t r, std::size_t c) { return w[r * cols + c]; }
  // Throws argument_error when a marginal deviates by more than `tol`.
  void validate(double tol = 1e-10) const;
};

// Squared 2-Wasserstein distance between scalar Gaussians:
// (m1-m2)^2 + (s1-s2)^2.
double w2_gaussian(double mean1, double stddev1, double mean2, double stddev2);

struct Mw2Result {
  double distance_sq = 0.0;
  Coupling coupling;  // rows follow `a`, columns follow `b`
};

// Mixture Wasserstein distance: the exact optimal-transport cost between the
// component weights with w2_gaussian as ground cost, solved by the
// transportation simplex. Zero-weight components are dropped (their rows or
// columns stay zero in the returned coupling).
Mw2Result mw2(const Gmm& a, const Gmm& b);

struct AmbiguitySet {
  Gmm reference;
  double radius = 0.0;              // gamma, squared per-unit frequency
  std::size_t component_budget = 0; // K for candidate mixtures; 0 means "match reference"

  void validate() const;
  std::size_t budget() const {
    return component_budget == 0 ? reference.size() : component_budget;
  }
};

struct MembershipResult {
  bool inside = false;
  double distance_sq = 0.0;
};

MembershipResult membership(const AmbiguitySet& set, const Gmm& candidate);

}  // namespace drefc

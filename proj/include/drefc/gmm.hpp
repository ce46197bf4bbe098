// Gaussian mixture machinery: density/CDF evaluation, EM fitting, sampling,
// marginals, and conditioning of a joint past/future error mixture.
#pragma once

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "drefc/errors.hpp"

namespace drefc {

// Lower bounds applied during fitting so EM cannot collapse a component.
inline constexpr double kSigmaFloor = 1e-6;
inline constexpr double kEigFloor = 1e-10;

// Scalar mixture: sum_k weights[k] * N(means[k], stddevs[k]^2).
struct Gmm {
  std::vector<double> weights;
  std::vector<double> means;
  std::vector<double> stddevs;

  std::size_t size() const { return weights.size(); }
  void validate() const;
};

// Mirror image of the mixture (density of -X). Used to move between the
// "measured minus predicted" error convention and the safety-margin
// convention ("predicted minus measured") expected by the margin solver.
Gmm negated(const Gmm& g);

struct FitReport {
  double log_likelihood = 0.0;
  std::size_t iterations = 0;
  bool converged = false;
  std::vector<double> iteration_log_likelihoods;
  bool degenerate_data = false;  // all samples identical
};

struct EmOptions {
  double tol = 1e-8;          // relative log-likelihood change
  std::size_t max_iter = 500;
  std::size_t restarts = 5;
};

double pdf(const Gmm& g, double x);

// Mixture CDF from the per-component normal CDF; clamps exactly beyond 40
// standard deviations. Monotone non-decreasing in x.
double cdf(const Gmm& g, double x);

// Maximum-likelihood fit by EM with k-means++ style seeding per restart.
// Returns the best restart by final log-likelihood (ties: lowest restart
// index). Throws argument_error when samples.size() < 2*K.
std::pair<Gmm, FitReport> fit_em(std::span<const double> samples,
                                 std::size_t components,
                                 const EmOptions& options, std::uint64_t seed);

std::vector<double> sample(const Gmm& g, std::size_t n, std::uint64_t seed);

// Joint mixture over the stacked vector [X_past; X_future].
struct JointGmm {
  std::vector<double> weights;
  std::vector<Eigen::VectorXd> means;
  std::vector<Eigen::MatrixXd> covariances;
  std::size_t past_len = 0;
  std::size_t future_len = 0;
  // Set by condition() when a past block needed eigenvalue regularization.
  bool regularized = false;

  std::size_t size() const { return weights.size(); }
  std::size_t dim() const { return past_len + future_len; }
  void validate() const;
};

enum class Block { past, future };

double pdf(const JointGmm& g, const Eigen::VectorXd& x);

std::pair<JointGmm, FitReport> fit_em(const std::vector<Eigen::VectorXd>& samples,
                                      std::size_t components,
                                      std::size_t past_len,
                                      const EmOptions& options,
                                      std::uint64_t seed);

std::vector<Eigen::VectorXd> sample(const JointGmm& g, std::size_t n,
                                    std::uint64_t seed);

// Restriction of the joint mixture to one block; weights are unchanged.
JointGmm marginal(const JointGmm& g, Block block);

// Conditional mixture of the future block given an observed past vector:
// weights are likelihood-reweighted and renormalized, means shifted by the
// cross-covariance regression, covariances replaced by Schur complements.
// A numerically singular past block is regularized at kEigFloor.
JointGmm condition(const JointGmm& g, const Eigen::VectorXd& x_past);

// Converts a one-dimensional joint mixture to a scalar one.
Gmm as_scalar(const JointGmm& g);

}  // namespace drefc

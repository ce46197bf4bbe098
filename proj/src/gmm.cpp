#include "drefc/gmm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "drefc/detail/rng.hpp"

namespace drefc {

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;
constexpr double kInvSqrt2Pi = 0.3989422804014326779;

double unit_draw(std::mt19937_64& rng) { return detail::to_unit(rng()); }

double normal_draw(std::mt19937_64& rng) {
  const double u1 = unit_draw(rng);
  const double u2 = unit_draw(rng);
  return std::sqrt(-2.0 * std::log(u1)) *
         std::cos(6.283185307179586477 * u2);
}

// Index draw proportional to `weights` (assumed normalized).
std::size_t categorical_draw(std::mt19937_64& rng,
                             std::span<const double> weights) {
  const double u = unit_draw(rng);
  double acc = 0.0;
  for (std::size_t k = 0; k + 1 < weights.size(); ++k) {
    acc += weights[k];
    if (u < acc) return k;
  }
  return weights.size() - 1;
}

double log_sum_exp(std::span<const double> v) {
  const double m = *std::max_element(v.begin(), v.end());
  if (!std::isfinite(m)) return m;
  double s = 0.0;
  for (double x : v) s += std::exp(x - m);
  return m + std::log(s);
}

double scalar_log_normal(double x, double mean, double stddev) {
  const double z = (x - mean) / stddev;
  return -0.5 * z * z - std::log(stddev) - 0.5 * kLog2Pi;
}

}  // namespace

void Gmm::validate() const {
  const std::size_t k = weights.size();
  if (k == 0 || means.size() != k || stddevs.size() != k)
    throw argument_error("Gmm: component arrays must be non-empty and equal length");
  double sum = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    if (weights[i] < 0.0) throw argument_error("Gmm: negative weight");
    if (!(stddevs[i] > 0.0)) throw argument_error("Gmm: stddev must be positive");
    if (!std::isfinite(means[i]) || !std::isfinite(stddevs[i]))
      throw argument_error("Gmm: non-finite parameter");
    sum += weights[i];
  }
  if (std::abs(sum - 1.0) > 1e-12)
    throw argument_error("Gmm: weights must sum to 1");
}

Gmm negated(const Gmm& g) {
  Gmm out = g;
  for (double& m : out.means) m = -m;
  return out;
}

double pdf(const Gmm& g, double x) {
  double acc = 0.0;
  for (std::size_t k = 0; k < g.size(); ++k) {
    const double z = (x - g.means[k]) / g.stddevs[k];
    acc += g.weights[k] * kInvSqrt2Pi / g.stddevs[k] * std::exp(-0.5 * z * z);
  }
  return acc;
}

double cdf(const Gmm& g, double x) {
  double acc = 0.0;
  for (std::size_t k = 0; k < g.size(); ++k) {
    const double z = (x - g.means[k]) / g.stddevs[k];
    if (z >= 40.0) {
      acc += g.weights[k];
    } else if (z > -40.0) {
      acc += g.weights[k] * 0.5 * std::erfc(-z * 0.7071067811865475244);
    }
  }
  return acc;
}

namespace {

// k-means++ seeding: first center uniform, then proportional to squared
// distance from the nearest chosen center.
std::vector<double> kmeanspp_centers(std::span<const double> samples,
                                     std::size_t k, std::mt19937_64& rng) {
  const std::size_t n = samples.size();
  std::vector<double> centers;
  centers.reserve(k);
  centers.push_back(samples[static_cast<std::size_t>(unit_draw(rng) * n) % n]);
  std::vector<double> d2(n);
  while (centers.size() < k) {
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double best = std::numeric_limits<double>::infinity();
      for (double c : centers) best = std::min(best, (samples[i] - c) * (samples[i] - c));
      d2[i] = best;
      total += best;
    }
    if (total <= 0.0) {
      centers.push_back(samples[static_cast<std::size_t>(unit_draw(rng) * n) % n]);
      continue;
    }
    double u = unit_draw(rng) * total;
    std::size_t pick = n - 1;
    for (std::size_t i = 0; i < n; ++i) {
      u -= d2[i];
      if (u <= 0.0) {
        pick = i;
        break;
      }
    }
    centers.push_back(samples[pick]);
  }
  return centers;
}

struct ScalarEmState {
  Gmm g;
  FitReport report;
};

ScalarEmState run_scalar_em(std::span<const double> samples, std::size_t k,
                            const EmOptions& options, std::uint64_t seed) {
  const std::size_t n = samples.size();
  std::mt19937_64 rng(seed);

  double mean0 = 0.0;
  for (double x : samples) mean0 += x;
  mean0 /= static_cast<double>(n);
  double var0 = 0.0;
  for (double x : samples) var0 += (x - mean0) * (x - mean0);
  var0 /= static_cast<double>(n);
  const double sigma0 = std::max(std::sqrt(var0), kSigmaFloor);

  ScalarEmState st;
  st.g.weights.assign(k, 1.0 / static_cast<double>(k));
  st.g.means = kmeanspp_centers(samples, k, rng);
  st.g.stddevs.assign(k, sigma0);

  std::vector<double> logp(k);
  std::vector<std::vector<double>> resp(k, std::vector<double>(n));
  double prev_ll = -std::numeric_limits<double>::infinity();

  for (std::size_t iter = 0; iter < options.max_iter; ++iter) {
    // E step.
    double ll = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t c = 0; c < k; ++c)
        logp[c] = std::log(st.g.weights[c]) +
                  scalar_log_normal(samples[i], st.g.means[c], st.g.stddevs[c]);
      const double lse = log_sum_exp(logp);
      ll += lse;
      for (std::size_t c = 0; c < k; ++c) resp[c][i] = std::exp(logp[c] - lse);
    }
    st.report.iteration_log_likelihoods.push_back(ll);
    st.report.iterations = iter + 1;
    st.report.log_likelihood = ll;
    if (iter > 0 && std::abs(ll - prev_ll) <= options.tol * std::max(1.0, std::abs(ll))) {
      st.report.converged = true;
      break;
    }
    prev_ll = ll;

    // M step.
    for (std::size_t c = 0; c < k; ++c) {
      double nk = 0.0;
      for (std::size_t i = 0; i < n; ++i) nk += resp[c][i];
      if (nk < 1e-10) {
        // Relocate a starved component to the worst-covered sample.
        std::size_t worst = 0;
        double worst_density = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < n; ++i) {
          const double d = pdf(st.g, samples[i]);
          if (d < worst_density) {
            worst_density = d;
            worst = i;
          }
        }
        st.g.means[c] = samples[worst];
        st.g.stddevs[c] = sigma0;
        st.g.weights[c] = 1.0 / static_cast<double>(n);
        continue;
      }
      double m = 0.0;
      for (std::size_t i = 0; i < n; ++i) m += resp[c][i] * samples[i];
      m /= nk;
      double v = 0.0;
      for (std::size_t i = 0; i < n; ++i)
        v += resp[c][i] * (samples[i] - m) * (samples[i] - m);
      v /= nk;
      st.g.weights[c] = nk / static_cast<double>(n);
      st.g.means[c] = m;
      st.g.stddevs[c] = std::max(std::sqrt(v), kSigmaFloor);
    }
    double wsum = std::accumulate(st.g.weights.begin(), st.g.weights.end(), 0.0);
    for (double& w : st.g.weights) w /= wsum;
  }
  return st;
}

}  // namespace

std::pair<Gmm, FitReport> fit_em(std::span<const double> samples,
                                 std::size_t components,
                                 const EmOptions& options, std::uint64_t seed) {
  if (components < 1) throw argument_error("fit_em: components must be >= 1");
  if (samples.size() < 2 * components)
    throw argument_error("fit_em: need at least 2*K samples");

  const auto [mn, mx] = std::minmax_element(samples.begin(), samples.end());
  if (*mn == *mx) {
    Gmm g;
    g.weights = {1.0};
    g.means = {*mn};
    g.stddevs = {kSigmaFloor};
    FitReport report;
    report.degenerate_data = true;
    report.converged = true;
    report.iterations = 0;
    double ll = 0.0;
    for (double x : samples) ll += scalar_log_normal(x, *mn, kSigmaFloor);
    report.log_likelihood = ll;
    report.iteration_log_likelihoods = {ll};
    return {g, report};
  }

  ScalarEmState best;
  bool have_best = false;
  for (std::size_t r = 0; r < std::max<std::size_t>(1, options.restarts); ++r) {
    ScalarEmState st =
        run_scalar_em(samples, components, options, detail::derive_seed(seed, r));
    if (!have_best || st.report.log_likelihood > best.report.log_likelihood) {
      best = std::move(st);
      have_best = true;
    }
  }
  best.g.validate();
  return {best.g, best.report};
}

std::vector<double> sample(const Gmm& g, std::size_t n, std::uint64_t seed) {
  if (n < 1) throw argument_error("sample: n must be >= 1");
  g.validate();
  std::mt19937_64 rng(seed);
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t c = categorical_draw(rng, g.weights);
    out[i] = g.means[c] + g.stddevs[c] * normal_draw(rng);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Joint mixtures.

void JointGmm::validate() const {
  const std::size_t k = weights.size();
  if (k == 0 || means.size() != k || covariances.size() != k)
    throw argument_error("JointGmm: component arrays must be equal length");
  const auto d = static_cast<Eigen::Index>(dim());
  if (d < 1) throw argument_error("JointGmm: dimension must be >= 1");
  double sum = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    if (weights[i] < 0.0) throw argument_error("JointGmm: negative weight");
    if (means[i].size() != d || covariances[i].rows() != d ||
        covariances[i].cols() != d)
      throw argument_error("JointGmm: dimension mismatch");
    const double scale = covariances[i].cwiseAbs().maxCoeff();
    if ((covariances[i] - covariances[i].transpose()).cwiseAbs().maxCoeff() >
        1e-9 * std::max(1.0, scale))
      throw argument_error("JointGmm: covariance not symmetric");
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(covariances[i]);
    if (es.eigenvalues().minCoeff() < kEigFloor * 0.5)
      throw argument_error("JointGmm: covariance below eigenvalue floor");
    sum += weights[i];
  }
  if (std::abs(sum - 1.0) > 1e-12)
    throw argument_error("JointGmm: weights must sum to 1");
}

namespace {

// Cached Cholesky of one Gaussian component; evaluation is allocation-free.
struct GaussianEvaluator {
  Eigen::MatrixXd chol_l;
  double log_norm = 0.0;  // -log det L - d/2 log(2 pi)
  mutable Eigen::VectorXd scratch;

  explicit GaussianEvaluator(const Eigen::MatrixXd& cov) {
    const Eigen::LLT<Eigen::MatrixXd> llt(cov);
    if (llt.info() != Eigen::Success)
      throw solver_error("GaussianEvaluator: covariance not positive definite");
    chol_l = llt.matrixL();
    log_norm = -0.5 * static_cast<double>(cov.rows()) * kLog2Pi;
    for (Eigen::Index i = 0; i < cov.rows(); ++i)
      log_norm -= std::log(chol_l(i, i));
    scratch.resize(cov.rows());
  }

  double log_pdf(const Eigen::VectorXd& x, const Eigen::VectorXd& mean) const {
    scratch = x - mean;
    chol_l.triangularView<Eigen::Lower>().solveInPlace(scratch);
    return -0.5 * scratch.squaredNorm() + log_norm;
  }
};

double mvn_log_pdf(const Eigen::VectorXd& x, const Eigen::VectorXd& mean,
                   const Eigen::MatrixXd& cov) {
  return GaussianEvaluator(cov).log_pdf(x, mean);
}

Eigen::MatrixXd floor_eigenvalues(const Eigen::MatrixXd& cov, double floor) {
  Eigen::MatrixXd sym = 0.5 * (cov + cov.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym);
  if (es.eigenvalues().minCoeff() >= floor) return sym;
  Eigen::VectorXd ev = es.eigenvalues().cwiseMax(floor);
  return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

}  // namespace

double pdf(const JointGmm& g, const Eigen::VectorXd& x) {
  if (x.size() != static_cast<Eigen::Index>(g.dim()))
    throw argument_error("pdf: point dimension mismatch");
  std::vector<double> logp(g.size());
  for (std::size_t k = 0; k < g.size(); ++k)
    logp[k] = std::log(g.weights[k]) + mvn_log_pdf(x, g.means[k], g.covariances[k]);
  return std::exp(log_sum_exp(logp));
}

namespace {

struct JointEmState {
  JointGmm g;
  FitReport report;
};

JointEmState run_joint_em(const std::vector<Eigen::VectorXd>& samples,
                          std::size_t k, std::size_t past_len,
                          const EmOptions& options, std::uint64_t seed) {
  const std::size_t n = samples.size();
  const auto d = samples.front().size();
  std::mt19937_64 rng(seed);

  Eigen::VectorXd mean0 = Eigen::VectorXd::Zero(d);
  for (const auto& x : samples) mean0 += x;
  mean0 /= static_cast<double>(n);
  Eigen::MatrixXd cov0 = Eigen::MatrixXd::Zero(d, d);
  for (const auto& x : samples) cov0 += (x - mean0) * (x - mean0).transpose();
  cov0 /= static_cast<double>(n);
  cov0 = floor_eigenvalues(cov0, std::max(kEigFloor, 1e-12 * cov0.trace()));

  JointEmState st;
  st.g.past_len = past_len;
  st.g.future_len = static_cast<std::size_t>(d) - past_len;
  st.g.weights.assign(k, 1.0 / static_cast<double>(k));
  st.g.covariances.assign(k, cov0);

  // k-means++ seeding on full vectors.
  st.g.means.push_back(samples[static_cast<std::size_t>(unit_draw(rng) * n) % n]);
  std::vector<double> d2(n);
  while (st.g.means.size() < k) {
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double best = std::numeric_limits<double>::infinity();
      for (const auto& c : st.g.means)
        best = std::min(best, (samples[i] - c).squaredNorm());
      d2[i] = best;
      total += best;
    }
    std::size_t pick = n - 1;
    if (total <= 0.0) {
      pick = static_cast<std::size_t>(unit_draw(rng) * n) % n;
    } else {
      double u = unit_draw(rng) * total;
      for (std::size_t i = 0; i < n; ++i) {
        u -= d2[i];
        if (u <= 0.0) {
          pick = i;
          break;
        }
      }
    }
    st.g.means.push_back(samples[pick]);
  }

  std::vector<double> logp(k);
  std::vector<std::vector<double>> resp(k, std::vector<double>(n));
  double prev_ll = -std::numeric_limits<double>::infinity();

  for (std::size_t iter = 0; iter < options.max_iter; ++iter) {
    std::vector<GaussianEvaluator> eval;
    eval.reserve(k);
    for (std::size_t c = 0; c < k; ++c) eval.emplace_back(st.g.covariances[c]);

    double ll = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t c = 0; c < k; ++c)
        logp[c] = std::log(st.g.weights[c]) +
                  eval[c].log_pdf(samples[i], st.g.means[c]);
      const double lse = log_sum_exp(logp);
      ll += lse;
      for (std::size_t c = 0; c < k; ++c) resp[c][i] = std::exp(logp[c] - lse);
    }
    st.report.iteration_log_likelihoods.push_back(ll);
    st.report.iterations = iter + 1;
    st.report.log_likelihood = ll;
    if (iter > 0 && std::abs(ll - prev_ll) <= options.tol * std::max(1.0, std::abs(ll))) {
      st.report.converged = true;
      break;
    }
    prev_ll = ll;

    for (std::size_t c = 0; c < k; ++c) {
      double nk = 0.0;
      for (std::size_t i = 0; i < n; ++i) nk += resp[c][i];
      if (nk < 1e-10) {
        std::size_t worst = 0;
        double worst_density = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < n; ++i) {
          const double dens = pdf(st.g, samples[i]);
          if (dens < worst_density) {
            worst_density = dens;
            worst = i;
          }
        }
        st.g.means[c] = samples[worst];
        st.g.covariances[c] = cov0;
        st.g.weights[c] = 1.0 / static_cast<double>(n);
        continue;
      }
      Eigen::VectorXd m = Eigen::VectorXd::Zero(d);
      for (std::size_t i = 0; i < n; ++i) m += resp[c][i] * samples[i];
      m /= nk;
      Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(d, d);
      for (std::size_t i = 0; i < n; ++i)
        cov += resp[c][i] * (samples[i] - m) * (samples[i] - m).transpose();
      cov /= nk;
      st.g.weights[c] = nk / static_cast<double>(n);
      st.g.means[c] = m;
      st.g.covariances[c] = floor_eigenvalues(cov, kEigFloor);
    }
    double wsum = std::accumulate(st.g.weights.begin(), st.g.weights.end(), 0.0);
    for (double& w : st.g.weights) w /= wsum;
  }
  return st;
}

}  // namespace

std::pair<JointGmm, FitReport> fit_em(const std::vector<Eigen::VectorXd>& samples,
                                      std::size_t components,
                                      std::size_t past_len,
                                      const EmOptions& options,
                                      std::uint64_t seed) {
  if (components < 1) throw argument_error("fit_em: components must be >= 1");
  if (samples.size() < 2 * components)
    throw argument_error("fit_em: need at least 2*K samples");
  const auto d = samples.front().size();
  if (past_len > static_cast<std::size_t>(d))
    throw argument_error("fit_em: past_len exceeds sample dimension");
  for (const auto& x : samples)
    if (x.size() != d) throw argument_error("fit_em: inconsistent sample dimension");

  bool all_equal = true;
  for (const auto& x : samples)
    if ((x - samples.front()).cwiseAbs().maxCoeff() != 0.0) {
      all_equal = false;
      break;
    }
  if (all_equal) {
    JointGmm g;
    g.past_len = past_len;
    g.future_len = static_cast<std::size_t>(d) - past_len;
    g.weights = {1.0};
    g.means = {samples.front()};
    g.covariances = {Eigen::MatrixXd::Identity(d, d) * kSigmaFloor * kSigmaFloor};
    FitReport report;
    report.degenerate_data = true;
    report.converged = true;
    double ll = 0.0;
    for (const auto& x : samples) ll += mvn_log_pdf(x, g.means[0], g.covariances[0]);
    report.log_likelihood = ll;
    report.iteration_log_likelihoods = {ll};
    return {g, report};
  }

  JointEmState best;
  bool have_best = false;
  for (std::size_t r = 0; r < std::max<std::size_t>(1, options.restarts); ++r) {
    JointEmState st = run_joint_em(samples, components, past_len, options,
                                   detail::derive_seed(seed, r));
    if (!have_best || st.report.log_likelihood > best.report.log_likelihood) {
      best = std::move(st);
      have_best = true;
    }
  }
  best.g.validate();
  return {best.g, best.report};
}

std::vector<Eigen::VectorXd> sample(const JointGmm& g, std::size_t n,
                                    std::uint64_t seed) {
  if (n < 1) throw argument_error("sample: n must be >= 1");
  g.validate();
  std::mt19937_64 rng(seed);
  std::vector<Eigen::LLT<Eigen::MatrixXd>> chol;
  chol.reserve(g.size());
  for (const auto& cov : g.covariances) chol.emplace_back(cov);

  const auto d = static_cast<Eigen::Index>(g.dim());
  std::vector<Eigen::VectorXd> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t c = categorical_draw(rng, g.weights);
    Eigen::VectorXd z(d);
    for (Eigen::Index j = 0; j < d; ++j) z[j] = normal_draw(rng);
    out.push_back(g.means[c] + Eigen::MatrixXd(chol[c].matrixL()) * z);
  }
  return out;
}

JointGmm marginal(const JointGmm& g, Block block) {
  g.validate();
  const auto m = static_cast<Eigen::Index>(g.past_len);
  const auto n = static_cast<Eigen::Index>(g.future_len);
  const Eigen::Index off = block == Block::past ? 0 : m;
  const Eigen::Index len = block == Block::past ? m : n;
  if (len < 1) throw argument_error("marginal: empty block");

  JointGmm out;
  out.past_len = block == Block::past ? g.past_len : 0;
  out.future_len = block == Block::future ? g.future_len : 0;
  out.weights = g.weights;
  for (std::size_t k = 0; k < g.size(); ++k) {
    out.means.push_back(g.means[k].segment(off, len));
    out.covariances.push_back(g.covariances[k].block(off, off, len, len));
  }
  return out;
}

JointGmm condition(const JointGmm& g, const Eigen::VectorXd& x_past) {
  g.validate();
  const auto m = static_cast<Eigen::Index>(g.past_len);
  const auto n = static_cast<Eigen::Index>(g.future_len);
  if (m < 1 || n < 1)
    throw argument_error("condition: joint mixture must have past and future blocks");
  if (x_past.size() != m)
    throw argument_error("condition: observed past has wrong length");

  JointGmm out;
  out.past_len = 0;
  out.future_len = g.future_len;
  std::vector<double> logw(g.size());
  for (std::size_t k = 0; k < g.size(); ++k) {
    const Eigen::VectorXd mu_p = g.means[k].head(m);
    const Eigen::VectorXd mu_f = g.means[k].tail(n);
    Eigen::MatrixXd s_pp = g.covariances[k].topLeftCorner(m, m);
    const Eigen::MatrixXd s_pf = g.covariances[k].topRightCorner(m, n);
    const Eigen::MatrixXd s_fp = g.covariances[k].bottomLeftCorner(n, m);
    const Eigen::MatrixXd s_ff = g.covariances[k].bottomRightCorner(n, n);

    Eigen::LLT<Eigen::MatrixXd> llt(s_pp);
    if (llt.info() != Eigen::Success) {
      s_pp += kEigFloor * Eigen::MatrixXd::Identity(m, m);
      llt.compute(s_pp);
      out.regularized = true;
      if (llt.info() != Eigen::Success)
        throw solver_error("condition: past covariance block is singular");
    }

    logw[k] = std::log(g.weights[k]) + mvn_log_pdf(x_past, mu_p, s_pp);
    const Eigen::MatrixXd gain = llt.solve(s_pf).transpose();  // s_fp * s_pp^-1
    out.means.push_back(mu_f + gain * (x_past - mu_p));
    out.covariances.push_back(floor_eigenvalues(s_ff - gain * s_pf, kEigFloor));
  }
  const double lse = log_sum_exp(logw);
  out.weights.resize(g.size());
  double sum = 0.0;
  for (std::size_t k = 0; k < g.size(); ++k) {
    out.weights[k] = std::exp(logw[k] - lse);
    sum += out.weights[k];
  }
  for (double& w : out.weights) w /= sum;
  return out;
}

Gmm as_scalar(const JointGmm& g) {
  if (g.dim() != 1) throw argument_error("as_scalar: mixture is not one-dimensional");
  Gmm out;
  out.weights = g.weights;
  for (std::size_t k = 0; k < g.size(); ++k) {
    out.means.push_back(g.means[k][0]);
    out.stddevs.push_back(std::sqrt(g.covariances[k](0, 0)));
  }
  return out;
}

}  // namespace drefc

#include "drefc/koopman.hpp"

#include <algorithm>
#include <cmath>

namespace drefc {

void DictionarySpec::validate() const {
  if (rbf_count > 0 && !(rbf_bandwidth > 0.0))
    throw argument_error("DictionarySpec: rbf_bandwidth must be > 0");
  if (rbf_centers.size() != rbf_count)
    throw argument_error("DictionarySpec: rbf_centers size must equal rbf_count");
}

DictionarySpec DictionarySpec::with_grid(std::size_t delays, std::size_t rbfs,
                                         double lo, double hi, bool constant) {
  DictionarySpec spec;
  spec.delay_count = delays;
  spec.rbf_count = rbfs;
  spec.include_constant = constant;
  if (rbfs > 0) {
    spec.rbf_centers.resize(rbfs);
    const double step = rbfs > 1 ? (hi - lo) / static_cast<double>(rbfs - 1) : 0.0;
    for (std::size_t i = 0; i < rbfs; ++i)
      spec.rbf_centers[i] = lo + step * static_cast<double>(i);
    spec.rbf_bandwidth = rbfs > 1 ? step : std::max(1e-3, hi - lo);
  }
  spec.validate();
  return spec;
}

Eigen::VectorXd lift(const DictionarySpec& dict, std::span<const double> window) {
  dict.validate();
  if (window.size() < dict.delay_count + 1)
    throw argument_error("lift: window shorter than delay_count + 1");

  Eigen::VectorXd g(dict.lift_dim());
  const std::size_t newest = window.size() - 1;
  const double omega = window[newest];
  std::size_t at = 0;
  g[at++] = omega;
  for (std::size_t d = 1; d <= dict.delay_count; ++d)
    g[at++] = window[newest - d];
  for (std::size_t r = 0; r < dict.rbf_count; ++r) {
    const double t = (omega - dict.rbf_centers[r]) / dict.rbf_bandwidth;
    g[at++] = std::exp(-0.5 * t * t);
  }
  if (dict.include_constant) g[at++] = 1.0;
  return g;
}

namespace {

// Uniformly subsampled copy of one trajectory channel.
std::vector<double> decimate(const std::vector<double>& x, std::size_t stride) {
  std::vector<double> out;
  out.reserve(x.size() / stride + 1);
  for (std::size_t i = 0; i < x.size(); i += stride) out.push_back(x[i]);
  return out;
}

}  // namespace

KoopmanModel train_edmd(const std::vector<Trajectory>& dataset,
                        const DictionarySpec& dict, double ridge,
                        std::size_t decimation, std::size_t train_steps) {
  dict.validate();
  if (ridge < 0.0) throw argument_error("train_edmd: ridge must be >= 0");
  if (decimation < 1) throw argument_error("train_edmd: decimation must be >= 1");

  const auto n_g = static_cast<Eigen::Index>(dict.lift_dim());
  const Eigen::Index n_u = 1;
  const Eigen::Index n_z = n_g + n_u;

  Eigen::MatrixXd zzt = Eigen::MatrixXd::Zero(n_z, n_z);
  Eigen::MatrixXd yzt = Eigen::MatrixXd::Zero(n_g, n_z);
  std::size_t pairs = 0;

  Eigen::VectorXd z(n_z);
  for (const auto& traj : dataset) {
    const std::vector<double> f = decimate(traj.freq_dev, decimation);
    const std::vector<double> u = decimate(traj.injected_power, decimation);
    if (f.size() < dict.delay_count + 2) continue;
    const std::size_t last =
        train_steps > 0 ? std::min(f.size(), train_steps + 1) : f.size();
    for (std::size_t k = dict.delay_count; k + 1 < last; ++k) {
      const std::span<const double> now(f.data(), k + 1);
      const std::span<const double> next(f.data(), k + 2);
      z.head(n_g) = lift(dict, now);
      z[n_g] = u[k];
      zzt.noalias() += z * z.transpose();
      yzt.noalias() += lift(dict, next) * z.transpose();
      ++pairs;
    }
  }
  if (pairs < static_cast<std::size_t>(n_z))
    throw argument_error("train_edmd: dataset yields too few snapshot pairs");

  Eigen::MatrixXd gram = zzt;
  gram.diagonal().array() += ridge;
  if (ridge == 0.0) {
    const Eigen::FullPivLU<Eigen::MatrixXd> lu(gram);
    if (!lu.isInvertible())
      throw singular_error(
          "train_edmd: rank-deficient regressor; use ridge > 0");
  }
  const Eigen::LDLT<Eigen::MatrixXd> ldlt(gram);
  // [A B] = Y Z^T (Z Z^T + ridge I)^{-1}, via the transposed solve.
  const Eigen::MatrixXd ab = ldlt.solve(yzt.transpose()).transpose();

  KoopmanModel model;
  model.dict = dict;
  model.A = ab.leftCols(n_g);
  model.B = ab.rightCols(n_u);
  model.C = Eigen::RowVectorXd::Zero(n_g);
  model.C[0] = 1.0;

  // Second pass for the RMS one-step lift residual.
  double sq = 0.0;
  for (const auto& traj : dataset) {
    const std::vector<double> f = decimate(traj.freq_dev, decimation);
    const std::vector<double> u = decimate(traj.injected_power, decimation);
    if (f.size() < dict.delay_count + 2) continue;
    const std::size_t last =
        train_steps > 0 ? std::min(f.size(), train_steps + 1) : f.size();
    for (std::size_t k = dict.delay_count; k + 1 < last; ++k) {
      const std::span<const double> now(f.data(), k + 1);
      const std::span<const double> next(f.data(), k + 2);
      const Eigen::VectorXd g = lift(dict, now);
      const Eigen::VectorXd r =
          lift(dict, next) - model.A * g - model.B * Eigen::VectorXd::Constant(1, u[k]);
      sq += r.squaredNorm();
    }
  }
  model.training_residual =
      std::sqrt(sq / (static_cast<double>(pairs) * static_cast<double>(n_g)));
  return model;
}

std::vector<double> predict(const KoopmanModel& model, const Eigen::VectorXd& g0,
                            std::span<const double> u, std::size_t horizon) {
  if (horizon < 1) throw argument_error("predict: horizon must be >= 1");
  if (g0.size() != static_cast<Eigen::Index>(model.lift_dim()))
    throw argument_error("predict: lifted state dimension mismatch");

  std::vector<double> out(horizon);
  Eigen::VectorXd g = g0;
  for (std::size_t t = 0; t < horizon; ++t) {
    const double ut = t < u.size() ? u[t] : 0.0;
    g = model.A * g + model.B * Eigen::VectorXd::Constant(1, ut);
    out[t] = model.C * g;
  }
  return out;
}

std::vector<PredictionErrorSample> collect_errors(
    const KoopmanModel& model, const std::vector<Trajectory>& dataset,
    ControlPolicy policy, std::size_t decimation, std::size_t max_horizon) {
  if (decimation < 1) throw argument_error("collect_errors: decimation must be >= 1");
  std::vector<PredictionErrorSample> out;

  for (std::size_t ti = 0; ti < dataset.size(); ++ti) {
    const std::vector<double> f = decimate(dataset[ti].freq_dev, decimation);
    const std::vector<double> u = decimate(dataset[ti].injected_power, decimation);
    const std::size_t anchor = model.dict.delay_count;
    if (f.size() < anchor + 2)
      throw argument_error("collect_errors: trajectory shorter than lift window");

    const Eigen::VectorXd g0 =
        lift(model.dict, std::span<const double>(f.data(), anchor + 1));
    std::size_t horizon = f.size() - anchor - 1;
    if (max_horizon > 0) horizon = std::min(horizon, max_horizon);
    std::vector<double> uu(horizon, 0.0);
    if (policy == ControlPolicy::recorded)
      for (std::size_t t = 0; t < horizon; ++t) uu[t] = u[anchor + t];

    const std::vector<double> pred = predict(model, g0, uu, horizon);
    double measured_nadir = f[anchor];
    double predicted_nadir = f[anchor];
    for (std::size_t t = 0; t < horizon; ++t) {
      measured_nadir = std::min(measured_nadir, f[anchor + 1 + t]);
      predicted_nadir = std::min(predicted_nadir, pred[t]);
    }
    const double nadir_error = measured_nadir - predicted_nadir;
    for (std::size_t t = 0; t < horizon; ++t)
      out.push_back({ti, t + 1, f[anchor + 1 + t] - pred[t], nadir_error});
  }
  return out;
}

std::vector<std::vector<double>> collect_onestep_errors(
    const KoopmanModel& model, const std::vector<Trajectory>& dataset,
    ControlPolicy policy, std::size_t decimation) {
  if (decimation < 1)
    throw argument_error("collect_onestep_errors: decimation must be >= 1");
  std::vector<std::vector<double>> out;
  out.reserve(dataset.size());
  for (const auto& traj : dataset) {
    const std::vector<double> f = decimate(traj.freq_dev, decimation);
    const std::vector<double> u = decimate(traj.injected_power, decimation);
    std::vector<double> errors;
    for (std::size_t k = model.dict.delay_count; k + 1 < f.size(); ++k) {
      const Eigen::VectorXd g =
          lift(model.dict, std::span<const double>(f.data(), k + 1));
      const double uk = policy == ControlPolicy::recorded ? u[k] : 0.0;
      const double pred =
          model.C * (model.A * g + model.B * Eigen::VectorXd::Constant(1, uk));
      errors.push_back(f[k + 1] - pred);
    }
    out.push_back(std::move(errors));
  }
  return out;
}

std::vector<double> collect_nadir_errors(const KoopmanModel& model,
                                         const std::vector<Trajectory>& dataset,
                                         ControlPolicy policy,
                                         std::size_t decimation,
                                         std::size_t max_horizon) {
  const auto samples =
      collect_errors(model, dataset, policy, decimation, max_horizon);
  std::vector<double> out;
  out.reserve(dataset.size());
  std::size_t current = static_cast<std::size_t>(-1);
  for (const auto& s : samples)
    if (s.trajectory != current) {
      current = s.trajectory;
      out.push_back(s.nadir_error);
    }
  return out;
}

}  // namespace drefc

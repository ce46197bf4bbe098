// EDMD training and evaluation of the lifted linear frequency predictor:
// f_t = C A^t g_0 + C sum_k A^{t-1-k} B u_k over a dictionary of time-delay
// coordinates, Gaussian RBFs of the current deviation, and an optional
// constant observable.
#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "drefc/sfr.hpp"

namespace drefc {

struct DictionarySpec {
  std::size_t delay_count = 10;     // delayed samples appended to the state
  std::size_t rbf_count = 0;        // Gaussian RBFs evaluated at the newest sample
  std::vector<double> rbf_centers;  // size rbf_count
  double rbf_bandwidth = 0.01;      // shared kernel width
  bool include_constant = true;

  std::size_t lift_dim() const {
    return 1 + delay_count + rbf_count + (include_constant ? 1 : 0);
  }
  void validate() const;

  // Centers on an equispaced grid over [lo, hi].
  static DictionarySpec with_grid(std::size_t delays, std::size_t rbfs,
                                  double lo, double hi, bool constant = true);
};

struct KoopmanModel {
  Eigen::MatrixXd A;  // lift_dim x lift_dim
  Eigen::MatrixXd B;  // lift_dim x input_dim
  Eigen::RowVectorXd C;  // selects the frequency observable (first coordinate)
  DictionarySpec dict;
  double training_residual = 0.0;  // RMS one-step lift residual

  std::size_t lift_dim() const { return static_cast<std::size_t>(A.rows()); }
  std::size_t input_dim() const { return static_cast<std::size_t>(B.cols()); }
};

// Lifts a measurement window (oldest to newest, length >= delay_count + 1)
// into the observable vector; g[0] is the newest sample.
Eigen::VectorXd lift(const DictionarySpec& dict, std::span<const double> window);

// Least-squares fit of (A, B) over one-step snapshot pairs in the dataset,
// ridge-regularized normal equations. `decimation` subsamples the
// trajectories to the model sampling interval (plant steps per model step);
// `train_steps` (model steps, 0 = all) limits pairs to each record's prefix
// so the transient regime is not swamped by settled samples. Throws
// singular_error when ridge == 0 and the regressor is rank-deficient.
KoopmanModel train_edmd(const std::vector<Trajectory>& dataset,
                        const DictionarySpec& dict, double ridge = 1e-8,
                        std::size_t decimation = 1, std::size_t train_steps = 0);

// Iterates g_{k+1} = A g_k + B u_k and returns f_1..f_T = C g_t. `u` holds
// one scalar input per step and is zero-padded to T.
std::vector<double> predict(const KoopmanModel& model, const Eigen::VectorXd& g0,
                            std::span<const double> u, std::size_t horizon);

struct PredictionErrorSample {
  std::size_t trajectory = 0;
  std::size_t horizon_index = 0;  // steps after the prediction anchor
  double error = 0.0;             // measured minus predicted, per-unit
  double nadir_error = 0.0;       // min(measured) - min(predicted) for the run
};

enum class ControlPolicy { none, recorded };

// Anchors a prediction at the first step with a full lift window, predicts to
// the end of each trajectory (or `max_horizon` model steps, 0 = to the end),
// and reports per-step and nadir errors.
std::vector<PredictionErrorSample> collect_errors(
    const KoopmanModel& model, const std::vector<Trajectory>& dataset,
    ControlPolicy policy, std::size_t decimation = 1,
    std::size_t max_horizon = 0);

// Per-trajectory nadir errors only (one value per trajectory).
std::vector<double> collect_nadir_errors(const KoopmanModel& model,
                                         const std::vector<Trajectory>& dataset,
                                         ControlPolicy policy,
                                         std::size_t decimation = 1,
                                         std::size_t max_horizon = 0);

// One-step-ahead prediction errors (measured minus predicted) at every model
// step; one sequence per trajectory. These feed the joint past/future error
// mixture used by the moving-horizon controller.
std::vector<std::vector<double>> collect_onestep_errors(
    const KoopmanModel& model, const std::vector<Trajectory>& dataset,
    ControlPolicy policy, std::size_t decimation = 1);

}  // namespace drefc

// Upper control subproblem: quadratic-cost input selection under
// margin-shifted frequency constraints, plus the two deployment modes
// (one-shot load shedding, moving-horizon DC regulation with online
// ambiguity updates).
#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "drefc/dro.hpp"
#include "drefc/gmm.hpp"
#include "drefc/koopman.hpp"
#include "drefc/sfr.hpp"

namespace drefc {

// Strictly convex QP: minimize u' R u subject to rows * u >= rhs. Solved by
// a primal active-set method (feasible start from candidate points or a
// max-min-slack LP, working-set steps through the Cholesky factor of R).
// Throws infeasible_error carrying the best achievable slack when the
// constraint system is empty.
struct QpResult {
  Eigen::VectorXd u;
  double cost = 0.0;
  std::vector<std::size_t> active_rows;  // rows with multiplier > 1e-8
  Eigen::VectorXd multipliers;           // full-length, zero off the active set
  double kkt_residual = 0.0;
};

QpResult solve_qp(const Eigen::MatrixXd& cost_matrix,
                  const Eigen::MatrixXd& rows, const Eigen::VectorXd& rhs,
                  std::optional<Eigen::VectorXd> feasible_start = std::nullopt);

struct ControlProblem {
  KoopmanModel model;
  Eigen::VectorXd g0;
  Eigen::MatrixXd cost_matrix;  // R, horizon x horizon, positive definite
  double f_min = -0.015;
  double zeta = 0.0;      // margin, >= 0
  std::size_t horizon = 1;  // prediction and control steps
  Interval u_bounds{0.0, 1.0};

  void validate() const;
};

struct ControlSolution {
  std::vector<double> u;
  double cost = 0.0;
  // Horizon indices t (1-based, as in f_t) whose frequency constraint is
  // tight with multiplier > 1e-8.
  std::vector<std::size_t> active_steps;
  double kkt_residual = 0.0;
};

// Uniform per-step cost matrix, weight * I.
Eigen::MatrixXd uniform_cost(std::size_t horizon, double weight);

ControlSolution solve_drefc_u(const ControlProblem& problem);

// One-shot load shedding: a single shed level decided at the event start and
// held over the horizon. Composes the worst-case margin (cacheable offline)
// with the scalar-decision QP.
ControlSolution one_shot_load_shed(const KoopmanModel& model,
                                   const Eigen::VectorXd& g0,
                                   const AmbiguitySet& set, const VarSpec& var,
                                   double f_min, double step_cost_weight,
                                   Interval u_bounds, std::size_t horizon,
                                   double* zeta_out = nullptr);

// Same decision with a precomputed margin (the offline-cached path).
ControlSolution one_shot_load_shed_with_margin(const KoopmanModel& model,
                                               const Eigen::VectorXd& g0,
                                               double zeta, double f_min,
                                               double step_cost_weight,
                                               Interval u_bounds,
                                               std::size_t horizon);

// Affine frequency response for a held scalar input: f_t = free_resp[t-1] +
// held_coeff[t-1] * u. Lets callers assemble their own constraint sets (the
// scenario-based baseline builds one row per sample from this).
struct OneShotTemplate {
  Eigen::VectorXd free_resp;   // C A^t g0, t = 1..horizon
  Eigen::VectorXd held_coeff;  // sum_{j<t} C A^j B
};

OneShotTemplate one_shot_template(const KoopmanModel& model,
                                  const Eigen::VectorXd& g0,
                                  std::size_t horizon);

struct ClosedLoopConfig {
  std::size_t past_len = 1;    // M, error-model conditioning window
  std::size_t future_len = 1;  // N, control horizon in model steps
  std::size_t decimation = 10; // plant steps per model step / control update
  std::size_t total_steps = 0; // plant steps to run
  double gamma = 0.0;
  std::size_t component_budget = 0;
  double alpha = 0.05;
  double f_min = -0.015;
  double step_cost_weight = 1.0;
  Interval u_bounds{0.0, 1.0};
  bool online_update = true;  // condition the reference on realized errors
};

struct LoopState {
  std::size_t window_index = 0;
  std::vector<double> past_errors;  // realized margin errors, length M
  Gmm reference;
  double zeta = 0.0;
  std::vector<double> applied_controls;  // control held over this window
  bool degraded = false;  // margin/QP failure; previous control held
};

struct ClosedLoopRun {
  std::vector<LoopState> states;
  Trajectory realized;                  // plant-resolution record
  std::vector<double> one_step_predictions;  // model grid, aligned with windows
  double realized_nadir = 0.0;          // min true frequency deviation
  double predicted_nadir = 0.0;         // min of one-step predictions
  double control_cost = 0.0;            // sum of weight * u^2 per model step
  std::size_t degraded_windows = 0;
};

// Moving-horizon DC regulation: each window conditions the joint error
// mixture on the last M realized errors (when online_update), re-solves the
// worst-case margin and the N-step QP, and applies the first input. Margin
// or QP failures hold the previous control and mark the window degraded.
ClosedLoopRun closed_loop_dc(const SfrParams& plant, const Disturbance& dist,
                             const KoopmanModel& model, const JointGmm& joint,
                             const ClosedLoopConfig& config, std::uint64_t seed);

}  // namespace drefc

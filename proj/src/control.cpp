#include "drefc/control.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>

#include "drefc/detail/simplex.hpp"

namespace drefc {

namespace {

double min_slack(const Eigen::MatrixXd& rows, const Eigen::VectorXd& rhs,
                 const Eigen::VectorXd& u) {
  if (rows.rows() == 0) return std::numeric_limits<double>::infinity();
  return (rows * u - rhs).minCoeff();
}

// Maximize the minimum slack of `rows * u >= rhs` (free u). Returns the best
// slack and a maximizing point. Used both as a phase-1 start and to report
// how infeasible an empty problem is.
struct SlackLp {
  double best_slack = 0.0;
  Eigen::VectorXd u;
  bool solved = false;
};

SlackLp max_min_slack(const Eigen::MatrixXd& rows, const Eigen::VectorXd& rhs) {
  const std::size_t m = static_cast<std::size_t>(rows.rows());
  const std::size_t n = static_cast<std::size_t>(rows.cols());
  if (m > 20000)
    throw solver_error("phase-1 LP too large; provide a feasible start");

  // Variables: u+ (n), u- (n), s+, s-, per-row surplus t (m), cap surplus (1).
  const std::size_t nv = 2 * n + 2 + m + 1;
  std::vector<double> c(nv, 0.0);
  c[2 * n] = -1.0;  // maximize s = s+ - s-
  c[2 * n + 1] = 1.0;

  std::vector<std::vector<double>> lp_rows;
  std::vector<double> lp_rhs;
  lp_rows.reserve(m + 1);
  for (std::size_t i = 0; i < m; ++i) {
    std::vector<double> row(nv, 0.0);
    for (std::size_t j = 0; j < n; ++j) {
      row[j] = rows(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
      row[n + j] = -row[j];
    }
    row[2 * n] = -1.0;
    row[2 * n + 1] = 1.0;
    row[2 * n + 2 + i] = -1.0;
    lp_rows.push_back(std::move(row));
    lp_rhs.push_back(rhs[static_cast<Eigen::Index>(i)]);
  }
  // Cap the slack so the LP stays bounded even for open polytopes.
  double scale = 1.0;
  for (std::size_t i = 0; i < m; ++i)
    scale = std::max(scale, std::abs(rhs[static_cast<Eigen::Index>(i)]));
  {
    std::vector<double> row(nv, 0.0);
    row[2 * n] = 1.0;
    row[2 * n + 1] = -1.0;
    row[nv - 1] = 1.0;
    lp_rows.push_back(std::move(row));
    lp_rhs.push_back(1e6 * scale);
  }

  const detail::LpResult lp = detail::solve_lp_eq(c, lp_rows, lp_rhs);
  SlackLp out;
  if (lp.status != detail::LpStatus::optimal) return out;
  out.solved = true;
  out.best_slack = lp.x[2 * n] - lp.x[2 * n + 1];
  out.u.resize(static_cast<Eigen::Index>(n));
  for (std::size_t j = 0; j < n; ++j)
    out.u[static_cast<Eigen::Index>(j)] = lp.x[j] - lp.x[n + j];
  return out;
}

}  // namespace

QpResult solve_qp(const Eigen::MatrixXd& cost_matrix, const Eigen::MatrixXd& rows,
                  const Eigen::VectorXd& rhs,
                  std::optional<Eigen::VectorXd> feasible_start) {
  const Eigen::Index n = cost_matrix.rows();
  const Eigen::Index m = rows.rows();
  if (cost_matrix.cols() != n || rows.cols() != n || rhs.size() != m)
    throw argument_error("solve_qp: dimension mismatch");

  const Eigen::MatrixXd g_mat = 2.0 * cost_matrix;
  const Eigen::LLT<Eigen::MatrixXd> g_llt(g_mat);
  if (g_llt.info() != Eigen::Success)
    throw argument_error("solve_qp: cost matrix must be positive definite");

  double rhs_scale = 1.0;
  for (Eigen::Index i = 0; i < m; ++i) rhs_scale = std::max(rhs_scale, std::abs(rhs[i]));
  const double feas_tol = 1e-9 * rhs_scale;

  // Feasible start: caller-provided, the origin, or a max-min-slack LP.
  Eigen::VectorXd u;
  if (feasible_start) {
    u = *feasible_start;
    if (min_slack(rows, rhs, u) < -feas_tol)
      throw argument_error("solve_qp: provided start is infeasible");
  } else if (m == 0 || min_slack(rows, rhs, Eigen::VectorXd::Zero(n)) >= -feas_tol) {
    u = Eigen::VectorXd::Zero(n);
  } else {
    const SlackLp lp = max_min_slack(rows, rhs);
    if (!lp.solved) throw solver_error("solve_qp: phase-1 LP failed");
    if (lp.best_slack < -feas_tol)
      throw infeasible_error("solve_qp: no feasible input", lp.best_slack);
    u = lp.u;
  }

  std::vector<std::size_t> working;  // active row indices
  Eigen::VectorXd lambda;            // multipliers on the working set
  const std::size_t max_iter = 50 * static_cast<std::size_t>(n) +
                               10 * static_cast<std::size_t>(m) + 200;

  for (std::size_t iter = 0; iter < max_iter; ++iter) {
    Eigen::VectorXd p;
    if (working.empty()) {
      lambda.resize(0);
      p = -u;
    } else {
      const auto w = static_cast<Eigen::Index>(working.size());
      Eigen::MatrixXd a_w(w, n);
      for (Eigen::Index i = 0; i < w; ++i)
        a_w.row(i) = rows.row(static_cast<Eigen::Index>(working[static_cast<std::size_t>(i)]));
      const Eigen::MatrixXd ginv_awt = g_llt.solve(a_w.transpose());
      const Eigen::MatrixXd schur = a_w * ginv_awt;
      const Eigen::LDLT<Eigen::MatrixXd> s_ldlt(schur);
      lambda = s_ldlt.solve(a_w * u);
      p = ginv_awt * lambda - u;
    }

    const double p_norm = p.size() > 0 ? p.cwiseAbs().maxCoeff() : 0.0;
    if (p_norm <= 1e-11 * (1.0 + u.cwiseAbs().maxCoeff())) {
      // Stationary on the working set; check multiplier signs.
      int drop = -1;
      double most_negative = -1e-10;
      for (Eigen::Index i = 0; i < lambda.size(); ++i)
        if (lambda[i] < most_negative) {
          most_negative = lambda[i];
          drop = static_cast<int>(i);
        }
      if (drop < 0) break;  // KKT point
      working.erase(working.begin() + drop);
      continue;
    }

    // Ratio test against rows outside the working set.
    double alpha = 1.0;
    long blocker = -1;
    for (Eigen::Index i = 0; i < m; ++i) {
      if (std::find(working.begin(), working.end(), static_cast<std::size_t>(i)) !=
          working.end())
        continue;
      const double d = rows.row(i).dot(p);
      if (d < -1e-13) {
        const double slack = rows.row(i).dot(u) - rhs[i];
        const double a = std::max(0.0, slack) / (-d);
        if (a < alpha) {
          alpha = a;
          blocker = i;
        }
      }
    }
    u += alpha * p;
    if (blocker >= 0) working.push_back(static_cast<std::size_t>(blocker));
  }

  QpResult out;
  out.u = u;
  out.cost = u.dot(cost_matrix * u);
  out.multipliers = Eigen::VectorXd::Zero(m);
  for (std::size_t i = 0; i < working.size(); ++i)
    out.multipliers[static_cast<Eigen::Index>(working[i])] =
        i < static_cast<std::size_t>(lambda.size())
            ? lambda[static_cast<Eigen::Index>(i)]
            : 0.0;
  for (Eigen::Index i = 0; i < m; ++i)
    if (out.multipliers[i] > 1e-8)
      out.active_rows.push_back(static_cast<std::size_t>(i));

  // KKT certificate: stationarity, feasibility, complementarity, dual signs.
  const Eigen::VectorXd stat = g_mat * u - rows.transpose() * out.multipliers;
  double residual = stat.cwiseAbs().maxCoeff();
  if (m > 0) {
    const Eigen::VectorXd slack = rows * u - rhs;
    residual = std::max(residual, std::max(0.0, -slack.minCoeff()));
    for (Eigen::Index i = 0; i < m; ++i)
      residual = std::max(residual, std::abs(out.multipliers[i] * slack[i]));
    residual = std::max(residual, std::max(0.0, -out.multipliers.minCoeff()));
  }
  out.kkt_residual = residual;
  return out;
}

void ControlProblem::validate() const {
  if (horizon < 1) throw argument_error("ControlProblem: horizon must be >= 1");
  if (zeta < 0.0) throw argument_error("ControlProblem: zeta must be >= 0");
  if (u_bounds.empty()) throw argument_error("ControlProblem: empty input bounds");
  if (cost_matrix.rows() != static_cast<Eigen::Index>(horizon) ||
      cost_matrix.cols() != static_cast<Eigen::Index>(horizon))
    throw argument_error("ControlProblem: cost matrix must be horizon x horizon");
  const Eigen::LLT<Eigen::MatrixXd> llt(cost_matrix);
  if (llt.info() != Eigen::Success)
    throw argument_error("ControlProblem: cost matrix must be positive definite");
  if (g0.size() != static_cast<Eigen::Index>(model.lift_dim()))
    throw argument_error("ControlProblem: lifted state dimension mismatch");
}

Eigen::MatrixXd uniform_cost(std::size_t horizon, double weight) {
  if (!(weight > 0.0)) throw argument_error("uniform_cost: weight must be > 0");
  return weight *
         Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(horizon),
                                   static_cast<Eigen::Index>(horizon));
}

namespace {

// Free response c_t = C A^t g0 (t = 1..T) and impulse response h_j = C A^j B.
void response_terms(const KoopmanModel& model, const Eigen::VectorXd& g0,
                    std::size_t horizon, Eigen::VectorXd& free_resp,
                    Eigen::VectorXd& impulse) {
  const auto t_count = static_cast<Eigen::Index>(horizon);
  free_resp.resize(t_count);
  impulse.resize(t_count);
  Eigen::VectorXd g = g0;
  Eigen::VectorXd v = model.B.col(0);
  for (Eigen::Index t = 0; t < t_count; ++t) {
    g = model.A * g;
    free_resp[t] = model.C * g;
    impulse[t] = model.C * v;
    v = model.A * v;
  }
}

struct BuiltRows {
  Eigen::MatrixXd rows;
  Eigen::VectorXd rhs;
  std::size_t freq_rows = 0;
};

// Stacked constraint system: frequency rows first, then lower/upper bounds.
BuiltRows build_drefc_rows(const Eigen::VectorXd& free_resp,
                           const Eigen::VectorXd& impulse, std::size_t horizon,
                           double f_min, double zeta, Interval u_bounds,
                           bool tie_steps) {
  const auto t_count = static_cast<Eigen::Index>(horizon);
  const Eigen::Index n = tie_steps ? 1 : t_count;

  BuiltRows out;
  out.freq_rows = horizon;
  out.rows = Eigen::MatrixXd::Zero(t_count + 2 * n, n);
  out.rhs.resize(t_count + 2 * n);
  for (Eigen::Index t = 0; t < t_count; ++t) {
    if (tie_steps) {
      double acc = 0.0;
      for (Eigen::Index j = 0; j <= t; ++j) acc += impulse[t - j];
      out.rows(t, 0) = acc;
    } else {
      // f_t depends on u_0..u_{t-1} with weight h_{t-1-k}.
      for (Eigen::Index k = 0; k < t + 1 && k < n; ++k)
        out.rows(t, k) = impulse[t - k];
    }
    out.rhs[t] = f_min + zeta - free_resp[t];
  }
  for (Eigen::Index j = 0; j < n; ++j) {
    out.rows(t_count + j, j) = 1.0;
    out.rhs[t_count + j] = u_bounds.lo;
    out.rows(t_count + n + j, j) = -1.0;
    out.rhs[t_count + n + j] = -u_bounds.hi;
  }
  return out;
}

Eigen::VectorXd pick_feasible_start(const BuiltRows& built, Interval bounds,
                                    Eigen::Index n, bool& found) {
  const double tol = 1e-12;
  const auto try_point = [&](double v) -> std::optional<Eigen::VectorXd> {
    if (v < bounds.lo || v > bounds.hi) return std::nullopt;
    Eigen::VectorXd u = Eigen::VectorXd::Constant(n, v);
    if (min_slack(built.rows, built.rhs, u) >= -tol) return u;
    return std::nullopt;
  };
  for (double v : {bounds.hi, 0.0, bounds.lo})
    if (auto u = try_point(v)) {
      found = true;
      return *u;
    }
  found = false;
  return Eigen::VectorXd::Zero(n);
}

ControlSolution finish_solution(const QpResult& qp, std::size_t freq_rows,
                                const Eigen::MatrixXd& cost_matrix) {
  ControlSolution out;
  out.u.assign(qp.u.data(), qp.u.data() + qp.u.size());
  out.cost = qp.u.dot(cost_matrix * qp.u);
  out.kkt_residual = qp.kkt_residual;
  for (std::size_t row : qp.active_rows)
    if (row < freq_rows) out.active_steps.push_back(row + 1);  // f_t is 1-based
  return out;
}

ControlSolution solve_margin_problem(const KoopmanModel& model,
                                     const Eigen::VectorXd& g0, double zeta,
                                     double f_min,
                                     const Eigen::MatrixXd& cost_matrix,
                                     Interval u_bounds, std::size_t horizon,
                                     bool tie_steps) {
  Eigen::VectorXd free_resp, impulse;
  response_terms(model, g0, horizon, free_resp, impulse);
  const BuiltRows built = build_drefc_rows(free_resp, impulse, horizon, f_min,
                                           zeta, u_bounds, tie_steps);
  const Eigen::Index n = built.rows.cols();

  bool found = false;
  Eigen::VectorXd start = pick_feasible_start(built, u_bounds, n, found);
  if (!found) {
    const SlackLp lp = max_min_slack(built.rows, built.rhs);
    if (!lp.solved) throw solver_error("solve_drefc_u: phase-1 LP failed");
    if (lp.best_slack < -1e-10)
      // Best achievable frequency margin over the admissible inputs.
      throw infeasible_error("solve_drefc_u: margin unattainable",
                             lp.best_slack + zeta);
    start = lp.u;
  }

  const QpResult qp = solve_qp(cost_matrix, built.rows, built.rhs, start);
  if (qp.kkt_residual > 1e-6)
    throw solver_error("solve_drefc_u: KKT residual above tolerance");
  return finish_solution(qp, built.freq_rows, cost_matrix);
}

}  // namespace

ControlSolution solve_drefc_u(const ControlProblem& problem) {
  problem.validate();
  return solve_margin_problem(problem.model, problem.g0, problem.zeta,
                              problem.f_min, problem.cost_matrix,
                              problem.u_bounds, problem.horizon,
                              /*tie_steps=*/false);
}

ControlSolution one_shot_load_shed_with_margin(const KoopmanModel& model,
                                               const Eigen::VectorXd& g0,
                                               double zeta, double f_min,
                                               double step_cost_weight,
                                               Interval u_bounds,
                                               std::size_t horizon) {
  if (horizon < 1) throw argument_error("one_shot: horizon must be >= 1");
  if (u_bounds.empty()) throw argument_error("one_shot: empty input bounds");
  // The shed level is one decision held over the horizon, so the effective
  // cost matrix is the scalar 1' R 1.
  Eigen::MatrixXd cost(1, 1);
  cost(0, 0) = step_cost_weight * static_cast<double>(horizon);
  return solve_margin_problem(model, g0, std::max(0.0, zeta), f_min, cost,
                              u_bounds, horizon, /*tie_steps=*/true);
}

OneShotTemplate one_shot_template(const KoopmanModel& model,
                                  const Eigen::VectorXd& g0,
                                  std::size_t horizon) {
  if (horizon < 1) throw argument_error("one_shot_template: horizon must be >= 1");
  OneShotTemplate out;
  Eigen::VectorXd impulse;
  response_terms(model, g0, horizon, out.free_resp, impulse);
  out.held_coeff.resize(static_cast<Eigen::Index>(horizon));
  double acc = 0.0;
  for (Eigen::Index t = 0; t < static_cast<Eigen::Index>(horizon); ++t) {
    acc += impulse[t];
    out.held_coeff[t] = acc;
  }
  return out;
}

ControlSolution one_shot_load_shed(const KoopmanModel& model,
                                   const Eigen::VectorXd& g0,
                                   const AmbiguitySet& set, const VarSpec& var,
                                   double f_min, double step_cost_weight,
                                   Interval u_bounds, std::size_t horizon,
                                   double* zeta_out) {
  const WorstCaseResult wc = worst_case_margin(set, var);
  if (zeta_out) *zeta_out = wc.zeta;
  return one_shot_load_shed_with_margin(model, g0, wc.zeta, f_min,
                                        step_cost_weight, u_bounds, horizon);
}

namespace {

Gmm scalar_slice(const JointGmm& g, Eigen::Index idx) {
  Gmm out;
  out.weights = g.weights;
  for (std::size_t k = 0; k < g.size(); ++k) {
    out.means.push_back(g.means[k][idx]);
    out.stddevs.push_back(std::sqrt(g.covariances[k](idx, idx)));
  }
  return out;
}

}  // namespace

ClosedLoopRun closed_loop_dc(const SfrParams& plant, const Disturbance& dist,
                             const KoopmanModel& model, const JointGmm& joint,
                             const ClosedLoopConfig& config, std::uint64_t seed) {
  if (joint.past_len != config.past_len || joint.future_len != config.future_len)
    throw argument_error("closed_loop_dc: joint mixture block sizes mismatch");
  if (config.decimation < 1 || config.total_steps < config.decimation)
    throw argument_error("closed_loop_dc: bad step configuration");

  const std::size_t model_steps = config.total_steps / config.decimation;
  const std::size_t tau = model.dict.delay_count;
  const VarSpec var(config.alpha);
  const Eigen::MatrixXd cost_matrix =
      uniform_cost(config.future_len, config.step_cost_weight);
  const Gmm static_reference = scalar_slice(marginal(joint, Block::future), 0);

  SfrSimulator sim(plant, dist, seed);
  ClosedLoopRun run;
  run.realized.noise_seed = seed;
  run.realized.times.push_back(0.0);
  run.realized.freq_dev.push_back(sim.measured_freq_dev());
  run.realized.injected_power.push_back(0.0);

  std::vector<double> meas = {sim.measured_freq_dev()};
  std::deque<double> margin_errors;  // realized (predicted - measured)
  std::optional<double> pending_prediction;
  double u_now = 0.0;
  double previous_zeta = 0.0;
  Gmm previous_reference = static_reference;
  run.realized_nadir = 0.0;
  run.predicted_nadir = 0.0;

  for (std::size_t k = 0; k < model_steps; ++k) {
    if (pending_prediction) {
      margin_errors.push_back(*pending_prediction - meas[k]);
      while (margin_errors.size() > config.past_len) margin_errors.pop_front();
    }

    const bool can_lift = k >= tau;
    Eigen::VectorXd g0;
    if (can_lift)
      g0 = lift(model.dict,
                std::span<const double>(meas.data() + (k - tau), tau + 1));

    if (can_lift && margin_errors.size() >= config.past_len) {
      LoopState state;
      state.window_index = k;
      state.past_errors.assign(margin_errors.begin(), margin_errors.end());

      try {
        if (config.online_update) {
          Eigen::VectorXd x_p(static_cast<Eigen::Index>(config.past_len));
          for (std::size_t i = 0; i < config.past_len; ++i)
            x_p[static_cast<Eigen::Index>(i)] = state.past_errors[i];
          state.reference = scalar_slice(condition(joint, x_p), 0);
        } else {
          state.reference = static_reference;
        }
        AmbiguitySet set{state.reference, config.gamma, config.component_budget};
        state.zeta = std::max(0.0, worst_case_margin(set, var).zeta);

        ControlProblem problem;
        problem.model = model;
        problem.g0 = g0;
        problem.cost_matrix = cost_matrix;
        problem.f_min = config.f_min;
        problem.zeta = state.zeta;
        problem.horizon = config.future_len;
        problem.u_bounds = config.u_bounds;
        const ControlSolution sol = solve_drefc_u(problem);
        u_now = sol.u.front();
        previous_zeta = state.zeta;
        previous_reference = state.reference;
      } catch (const infeasible_error&) {
        state.degraded = true;  // hold the previous control
        state.zeta = previous_zeta;
        state.reference = previous_reference;
        ++run.degraded_windows;
      } catch (const solver_error&) {
        state.degraded = true;
        state.zeta = previous_zeta;
        state.reference = previous_reference;
        ++run.degraded_windows;
      }
      state.applied_controls.assign(1, u_now);
      run.states.push_back(std::move(state));
    }

    if (can_lift) {
      const double u_arr[1] = {u_now};
      pending_prediction = predict(model, g0, std::span<const double>(u_arr, 1), 1)[0];
      run.one_step_predictions.push_back(*pending_prediction);
      run.predicted_nadir = std::min(run.predicted_nadir, *pending_prediction);
    } else {
      pending_prediction.reset();
    }

    for (std::size_t s = 0; s < config.decimation; ++s) {
      sim.step(u_now);
      if (!std::isfinite(sim.state_freq_dev()) ||
          std::abs(sim.state_freq_dev()) > 10.0)
        throw integration_error("closed_loop_dc: plant diverged", sim.step_index());
      run.realized.times.push_back(sim.time());
      run.realized.freq_dev.push_back(sim.measured_freq_dev());
      run.realized.injected_power.push_back(u_now);
      run.realized_nadir = std::min(run.realized_nadir, sim.state_freq_dev());
    }
    meas.push_back(sim.measured_freq_dev());
    run.control_cost += config.step_cost_weight * u_now * u_now;
  }
  return run;
}

}  // namespace drefc

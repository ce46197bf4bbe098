#include "drefc/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <random>

#include <json.hpp>

#include "drefc/ambiguity.hpp"
#include "drefc/detail/rng.hpp"
#include "drefc/io.hpp"

namespace drefc {

using nlohmann::json;

void ExperimentConfig::validate() const {
  plant.validate();
  if (n_trajectories < 1) throw argument_error("config: n_trajectories >= 1");
  if (deficit_range.empty() || event_deficit_range.empty())
    throw argument_error("config: empty deficit range");
  if (!(horizon_s > 0.0)) throw argument_error("config: horizon must be > 0");
  if (decimation < 1) throw argument_error("config: decimation >= 1");
  if (gmm_components < 1) throw argument_error("config: gmm_components >= 1");
  if (!(alpha > 0.0 && alpha < 0.5)) throw argument_error("config: alpha in (0, 0.5)");
  if (!(u_max > 0.0)) throw argument_error("config: u_max > 0");
  if (past_len < 1 || future_len < 1)
    throw argument_error("config: past_len and future_len >= 1");
}

namespace {

double percentile_nearest_rank(std::vector<double> values, double p) {
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  const auto rank = static_cast<std::size_t>(
      std::ceil(p * static_cast<double>(n)));
  return values[std::min(n - 1, rank == 0 ? 0 : rank - 1)];
}

double median(std::vector<double> values) {
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 == 1 ? values[n / 2]
                    : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

}  // namespace

Pipeline build_pipeline(const ExperimentConfig& config) {
  config.validate();

  Pipeline p;
  p.config = config;
  const std::uint64_t seed = config.seed;

  const std::vector<Trajectory> dataset =
      generate_dataset(config.plant, config.n_trajectories, config.deficit_range,
                       config.horizon_s, detail::derive_seed(seed, 1),
                       config.excitation, config.onset_s, config.aftershocks);

  const double model_dt =
      config.plant.step_dt * static_cast<double>(config.decimation);
  const auto train_steps =
      static_cast<std::size_t>(std::llround(config.train_window_s / model_dt));
  const auto horizon_steps = static_cast<std::size_t>(
      std::llround(config.prediction_horizon_s / model_dt));

  const DictionarySpec dict = DictionarySpec::with_grid(
      config.delay_count, config.rbf_count, config.rbf_lo, config.rbf_hi);
  p.model = train_edmd(dataset, dict, config.ridge, config.decimation, train_steps);

  const std::vector<double> nadir_errors =
      collect_nadir_errors(p.model, dataset, ControlPolicy::recorded,
                           config.decimation, horizon_steps);
  p.margin_samples.reserve(nadir_errors.size());
  for (double e : nadir_errors) p.margin_samples.push_back(-e);

  auto [reference, ref_report] =
      fit_em(p.margin_samples, config.gmm_components, config.em,
             detail::derive_seed(seed, 2));
  p.reference = std::move(reference);
  p.fit_reports.push_back(std::move(ref_report));

  if (config.gamma >= 0.0) {
    p.gamma = config.gamma;
  } else {
    // Bootstrap calibration: refit on resampled margins, take the requested
    // percentile of the mw2 distances to the reference fit.
    std::vector<double> distances;
    distances.reserve(config.bootstrap_refits);
    const std::size_t n = p.margin_samples.size();
    for (std::size_t b = 0; b < config.bootstrap_refits; ++b) {
      std::mt19937_64 rng(detail::derive_seed(seed, 100 + b));
      std::vector<double> resampled(n);
      for (std::size_t i = 0; i < n; ++i)
        resampled[i] = p.margin_samples[rng() % n];
      auto [refit, refit_report] =
          fit_em(resampled, config.gmm_components, config.em,
                 detail::derive_seed(seed, 500 + b));
      p.fit_reports.push_back(std::move(refit_report));
      distances.push_back(mw2(p.reference, refit).distance_sq);
    }
    p.gamma = percentile_nearest_rank(distances, config.bootstrap_percentile);
  }

  // Joint one-step error model (margin space) for the moving-horizon mode.
  const auto onestep = collect_onestep_errors(p.model, dataset,
                                              ControlPolicy::recorded,
                                              config.decimation);
  const std::size_t window = config.past_len + config.future_len;
  std::size_t total = 0;
  for (const auto& es : onestep)
    total += es.size() >= window ? es.size() - window + 1 : 0;
  const std::size_t stride = std::max<std::size_t>(1, total / 10000);

  std::vector<Eigen::VectorXd> joint_samples;
  for (const auto& es : onestep) {
    if (es.size() < window) continue;
    for (std::size_t k = 0; k + window <= es.size(); k += stride) {
      Eigen::VectorXd v(static_cast<Eigen::Index>(window));
      for (std::size_t j = 0; j < window; ++j)
        v[static_cast<Eigen::Index>(j)] = -es[k + j];
      joint_samples.push_back(std::move(v));
    }
  }
  auto [joint, joint_report] =
      fit_em(joint_samples, config.gmm_components, config.past_len, config.em,
             detail::derive_seed(seed, 3));
  p.joint = std::move(joint);
  p.fit_reports.push_back(std::move(joint_report));

  p.prediction_horizon = horizon_steps;
  return p;
}

std::vector<ScenarioInput> generate_scenarios(const Gmm& error_gmm, std::size_t n,
                                              Interval deficit_range,
                                              std::uint64_t seed,
                                              bool common_random_numbers) {
  if (n < 1) throw argument_error("generate_scenarios: n must be >= 1");
  error_gmm.validate();
  if (deficit_range.empty())
    throw argument_error("generate_scenarios: empty deficit range");

  std::vector<ScenarioInput> out(n);
  std::vector<double> plain;
  if (!common_random_numbers)
    plain = sample(error_gmm, n, detail::derive_seed(seed, 7));
  for (std::size_t i = 0; i < n; ++i) {
    out[i].id = i;
    if (common_random_numbers) {
      const double u = detail::uniform_from_seed(detail::derive_seed(seed, 7), i);
      out[i].error = exact_icdf(error_gmm, u);
    } else {
      out[i].error = plain[i];
    }
    out[i].deficit =
        deficit_range.lo +
        detail::uniform_from_seed(detail::derive_seed(seed, 8), i) *
            deficit_range.width();
  }
  return out;
}

double safety_indicator(std::span<const ScenarioRun> runs) {
  if (runs.empty()) throw argument_error("safety_indicator: no runs");
  std::size_t safe = 0;
  for (const auto& r : runs) safe += r.safe ? 1 : 0;
  return static_cast<double>(safe) / static_cast<double>(runs.size());
}

double economy_indicator(std::span<const ScenarioRun> runs, double threshold) {
  if (runs.empty()) throw argument_error("economy_indicator: no runs");
  std::size_t good = 0;
  for (const auto& r : runs) good += r.realized_nadir > threshold ? 1 : 0;
  return static_cast<double>(good) / static_cast<double>(runs.size());
}

namespace {

// Measurement window of an uncontrolled event up to the prediction anchor,
// sampled at the model grid.
std::vector<double> anchor_window(const SfrParams& plant, double deficit,
                                  double onset_s, std::size_t delay_count,
                                  std::size_t decimation,
                                  std::uint64_t noise_seed) {
  Disturbance dist{onset_s, deficit};
  const double anchor_time =
      static_cast<double>(delay_count * decimation) * plant.step_dt;
  const Trajectory t = simulate(plant, dist, {}, anchor_time, noise_seed);
  std::vector<double> window;
  window.reserve(delay_count + 1);
  for (std::size_t i = 0; i < t.size(); i += decimation) window.push_back(t.freq_dev[i]);
  return window;
}

}  // namespace

LoadShedOutcome run_load_shed_scenarios(const Pipeline& pipeline,
                                        const Gmm& scenario_margin_gmm,
                                        std::size_t n, std::uint64_t seed) {
  const ExperimentConfig& cfg = pipeline.config;
  const VarSpec var = pipeline.var();
  const WorstCaseResult wc = worst_case_margin(pipeline.ambiguity(), var);

  LoadShedOutcome out;
  out.zeta = std::max(0.0, wc.zeta);

  const std::vector<ScenarioInput> inputs =
      generate_scenarios(negated(scenario_margin_gmm), n,
                         cfg.event_deficit_range, seed);
  out.runs.reserve(n);

  for (const auto& input : inputs) {
    const std::vector<double> window =
        anchor_window(cfg.plant, input.deficit, cfg.onset_s, cfg.delay_count,
                      cfg.decimation, detail::derive_seed(seed, 1000 + input.id));
    const Eigen::VectorXd g0 = lift(pipeline.model.dict, window);

    double shed = 0.0;
    double cost = 0.0;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      const ControlSolution sol = one_shot_load_shed_with_margin(
          pipeline.model, g0, out.zeta, cfg.f_min, cfg.step_cost_weight,
          {0.0, cfg.u_max}, pipeline.prediction_horizon);
      shed = sol.u.front();
      cost = sol.cost;
    } catch (const infeasible_error&) {
      // Emergency fallback: shed everything available.
      shed = cfg.u_max;
      cost = cfg.step_cost_weight *
             static_cast<double>(pipeline.prediction_horizon) * shed * shed;
    }
    const auto t1 = std::chrono::steady_clock::now();

    const OneShotTemplate tpl =
        one_shot_template(pipeline.model, g0, pipeline.prediction_horizon);
    double predicted_nadir = window.back();
    for (Eigen::Index t = 0; t < tpl.free_resp.size(); ++t)
      predicted_nadir =
          std::min(predicted_nadir, tpl.free_resp[t] + tpl.held_coeff[t] * shed);

    ScenarioRun run;
    run.id = input.id;
    run.injected_error = input.error;
    run.predicted_nadir = predicted_nadir;
    run.realized_nadir = predicted_nadir + input.error;
    run.safe = run.realized_nadir >= cfg.f_min;
    run.economic = run.realized_nadir > cfg.economy_threshold;
    run.control_cost = cost;
    run.solve_time_s = std::chrono::duration<double>(t1 - t0).count();
    out.runs.push_back(run);
  }
  return out;
}

ControlSolution baseline_so(const KoopmanModel& model, const Eigen::VectorXd& g0,
                            std::span<const double> margin_samples, double f_min,
                            double step_cost_weight, Interval u_bounds,
                            std::size_t horizon) {
  if (margin_samples.empty())
    throw argument_error("baseline_so: need at least one sample");
  if (u_bounds.empty()) throw argument_error("baseline_so: empty input bounds");

  const OneShotTemplate tpl = one_shot_template(model, g0, horizon);
  const auto t_count = static_cast<Eigen::Index>(horizon);
  const auto s_count = static_cast<Eigen::Index>(margin_samples.size());

  // One frequency row per (sample, step), then the box rows.
  Eigen::MatrixXd rows(s_count * t_count + 2, 1);
  Eigen::VectorXd rhs(s_count * t_count + 2);
  Eigen::Index at = 0;
  for (Eigen::Index s = 0; s < s_count; ++s)
    for (Eigen::Index t = 0; t < t_count; ++t, ++at) {
      rows(at, 0) = tpl.held_coeff[t];
      rhs[at] = f_min + margin_samples[static_cast<std::size_t>(s)] -
                tpl.free_resp[t];
    }
  rows(at, 0) = 1.0;
  rhs[at] = u_bounds.lo;
  ++at;
  rows(at, 0) = -1.0;
  rhs[at] = -u_bounds.hi;

  Eigen::MatrixXd cost(1, 1);
  cost(0, 0) = step_cost_weight * static_cast<double>(horizon);

  Eigen::VectorXd start(1);
  start[0] = u_bounds.hi;
  const double worst_slack = (rows * start - rhs).minCoeff();
  std::optional<Eigen::VectorXd> warm;
  if (worst_slack >= -1e-12) warm = start;

  const QpResult qp = solve_qp(cost, rows, rhs, warm);
  ControlSolution out;
  out.u.assign(qp.u.data(), qp.u.data() + qp.u.size());
  out.cost = qp.cost;
  out.kkt_residual = qp.kkt_residual;
  for (std::size_t row : qp.active_rows)
    if (row < static_cast<std::size_t>(s_count * t_count))
      out.active_steps.push_back(row % horizon + 1);
  return out;
}

ControlSolution baseline_ro(const KoopmanModel& model, const Eigen::VectorXd& g0,
                            std::span<const double> margin_history, double f_min,
                            double step_cost_weight, Interval u_bounds,
                            std::size_t horizon) {
  if (margin_history.empty())
    throw argument_error("baseline_ro: need a non-empty history");
  const double zeta =
      std::max(0.0, *std::max_element(margin_history.begin(), margin_history.end()));
  return one_shot_load_shed_with_margin(model, g0, zeta, f_min, step_cost_weight,
                                        u_bounds, horizon);
}

namespace {

Gmm random_mixture(std::size_t components, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const auto unit = [&rng] { return detail::to_unit(rng()); };
  Gmm g;
  g.weights.resize(components);
  double sum = 0.0;
  for (auto& w : g.weights) {
    w = -std::log(unit());  // Dirichlet(1) via normalized exponentials
    sum += w;
  }
  for (auto& w : g.weights) w /= sum;
  for (std::size_t k = 0; k < components; ++k) {
    g.means.push_back(-1.0 + 2.0 * unit());
    g.stddevs.push_back(0.1 + 0.7 * unit());
  }
  return g;
}

}  // namespace

IcdfStudyReport icdf_study(std::size_t n_gmms, std::span<const double> alphas,
                           std::span<const std::size_t> component_counts,
                           std::uint64_t seed) {
  if (n_gmms < 2) throw argument_error("icdf_study: need at least two mixtures");

  IcdfStudyReport report;
  report.n_gmms = n_gmms;
  for (std::size_t ci = 0; ci < component_counts.size(); ++ci) {
    const std::size_t k = component_counts[ci];
    std::vector<Gmm> mixtures;
    mixtures.reserve(n_gmms);
    for (std::size_t i = 0; i < n_gmms; ++i)
      mixtures.push_back(random_mixture(k, detail::derive_seed(seed, ci * 100000 + i)));

    for (double alpha : alphas) {
      const double p = 1.0 - alpha;
      std::vector<double> exact(n_gmms), approx(n_gmms);
      for (std::size_t i = 0; i < n_gmms; ++i) {
        exact[i] = exact_icdf(mixtures[i], p);
        approx[i] = approx_icdf(mixtures[i], p);
      }

      double mean_e = 0.0, mean_a = 0.0;
      for (std::size_t i = 0; i < n_gmms; ++i) {
        mean_e += exact[i];
        mean_a += approx[i];
      }
      mean_e /= static_cast<double>(n_gmms);
      mean_a /= static_cast<double>(n_gmms);
      double cov = 0.0, var_e = 0.0, var_a = 0.0;
      for (std::size_t i = 0; i < n_gmms; ++i) {
        cov += (exact[i] - mean_e) * (approx[i] - mean_a);
        var_e += (exact[i] - mean_e) * (exact[i] - mean_e);
        var_a += (approx[i] - mean_a) * (approx[i] - mean_a);
      }

      std::size_t reversals = 0, pairs = 0;
      for (std::size_t i = 0; i < n_gmms; ++i)
        for (std::size_t j = i + 1; j < n_gmms; ++j) {
          ++pairs;
          const double de = exact[i] - exact[j];
          const double da = approx[i] - approx[j];
          if (de * da < 0.0) ++reversals;
        }

      IcdfCell cell;
      cell.components = k;
      cell.alpha = alpha;
      cell.pearson = cov / std::sqrt(var_e * var_a);
      cell.reversal_rate =
          static_cast<double>(reversals) / static_cast<double>(pairs);
      cell.pairs = pairs;
      report.cells.push_back(cell);
    }
  }
  return report;
}

TimingReport timing_study(const Pipeline& pipeline,
                          std::span<const std::size_t> counts,
                          std::size_t repeats, std::uint64_t seed) {
  if (counts.empty()) throw argument_error("timing_study: no counts");
  for (std::size_t i = 1; i < counts.size(); ++i)
    if (counts[i] <= counts[i - 1])
      throw argument_error("timing_study: counts must be ascending");
  repeats = std::max<std::size_t>(5, repeats);

  const ExperimentConfig& cfg = pipeline.config;
  const double deficit =
      0.5 * (cfg.event_deficit_range.lo + cfg.event_deficit_range.hi);
  const std::vector<double> window =
      anchor_window(cfg.plant, deficit, cfg.onset_s, cfg.delay_count,
                    cfg.decimation, detail::derive_seed(seed, 11));
  const Eigen::VectorXd g0 = lift(pipeline.model.dict, window);
  const VarSpec var = pipeline.var();

  TimingReport report;
  report.repeats = repeats;
  for (std::size_t count : counts) {
    const std::vector<double> samples =
        sample(pipeline.reference, count, detail::derive_seed(seed, 20 + count));

    std::vector<double> drefc_times, so_times;
    for (std::size_t r = 0; r <= repeats; ++r) {
      const auto t0 = std::chrono::steady_clock::now();
      const WorstCaseResult wc = worst_case_margin(pipeline.ambiguity(), var);
      const ControlSolution sol = one_shot_load_shed_with_margin(
          pipeline.model, g0, std::max(0.0, wc.zeta), cfg.f_min,
          cfg.step_cost_weight, {0.0, cfg.u_max}, pipeline.prediction_horizon);
      (void)sol;
      const auto t1 = std::chrono::steady_clock::now();
      const ControlSolution so =
          baseline_so(pipeline.model, g0, samples, cfg.f_min,
                      cfg.step_cost_weight, {0.0, cfg.u_max},
                      pipeline.prediction_horizon);
      (void)so;
      const auto t2 = std::chrono::steady_clock::now();
      if (r == 0) continue;  // warmup
      drefc_times.push_back(std::chrono::duration<double>(t1 - t0).count());
      so_times.push_back(std::chrono::duration<double>(t2 - t1).count());
    }
    report.points.push_back({count, median(drefc_times), median(so_times)});
  }
  return report;
}

std::vector<CostRatioPoint> cost_ratio_study(const Pipeline& pipeline,
                                             std::span<const double> confidences,
                                             std::uint64_t seed) {
  if (confidences.empty()) throw argument_error("cost_ratio_study: no confidences");
  const ExperimentConfig& cfg = pipeline.config;
  const double deficit =
      0.5 * (cfg.event_deficit_range.lo + cfg.event_deficit_range.hi);
  const std::vector<double> window =
      anchor_window(cfg.plant, deficit, cfg.onset_s, cfg.delay_count,
                    cfg.decimation, detail::derive_seed(seed, 21));
  const Eigen::VectorXd g0 = lift(pipeline.model.dict, window);

  const ControlSolution ro =
      baseline_ro(pipeline.model, g0, pipeline.margin_samples, cfg.f_min,
                  cfg.step_cost_weight, {0.0, cfg.u_max},
                  pipeline.prediction_horizon);

  std::vector<CostRatioPoint> out;
  for (double confidence : confidences) {
    const VarSpec var(1.0 - confidence);
    const WorstCaseResult wc = worst_case_margin(pipeline.ambiguity(), var);
    const ControlSolution sol = one_shot_load_shed_with_margin(
        pipeline.model, g0, std::max(0.0, wc.zeta), cfg.f_min,
        cfg.step_cost_weight, {0.0, cfg.u_max}, pipeline.prediction_horizon);
    CostRatioPoint pt;
    pt.confidence = confidence;
    pt.drefc_cost = sol.cost;
    pt.ro_cost = ro.cost;
    pt.ratio = ro.cost > 0.0 ? sol.cost / ro.cost
                             : std::numeric_limits<double>::quiet_NaN();
    out.push_back(pt);
  }
  return out;
}

DcComparison compare_dc_modes(const Pipeline& pipeline, std::size_t n_scenarios,
                              std::uint64_t seed) {
  const ExperimentConfig& cfg = pipeline.config;

  ClosedLoopConfig loop;
  loop.past_len = cfg.past_len;
  loop.future_len = cfg.future_len;
  loop.decimation = cfg.decimation;
  loop.total_steps = cfg.dc_total_steps;
  loop.gamma = pipeline.gamma;
  loop.component_budget = cfg.component_budget;
  loop.alpha = std::max(1e-6, cfg.alpha - cfg.alpha_guard);
  loop.f_min = cfg.f_min;
  loop.step_cost_weight = cfg.step_cost_weight;
  loop.u_bounds = {0.0, cfg.u_max};

  DcComparison out;
  for (std::size_t i = 0; i < n_scenarios; ++i) {
    const Disturbance dist =
        draw_disturbance(cfg.event_deficit_range, cfg.onset_s, cfg.aftershocks,
                         detail::derive_seed(seed, 31), i);
    const std::uint64_t run_seed = detail::derive_seed(seed, 4000 + i);

    for (bool online : {true, false}) {
      loop.online_update = online;
      const auto t0 = std::chrono::steady_clock::now();
      const ClosedLoopRun run = closed_loop_dc(cfg.plant, dist, pipeline.model,
                                               pipeline.joint, loop, run_seed);
      const auto t1 = std::chrono::steady_clock::now();

      ScenarioRun row;
      row.id = i;
      row.injected_error = 0.0;  // errors realize through the plant here
      row.predicted_nadir = run.predicted_nadir;
      row.realized_nadir = run.realized_nadir;
      row.safe = run.realized_nadir >= cfg.f_min;
      row.economic = run.realized_nadir > cfg.economy_threshold;
      row.control_cost = run.control_cost;
      row.solve_time_s = std::chrono::duration<double>(t1 - t0).count();
      (online ? out.online_runs : out.static_runs).push_back(row);
    }
  }
  out.safety_online = safety_indicator(out.online_runs);
  out.safety_static = safety_indicator(out.static_runs);
  out.economy_online = economy_indicator(out.online_runs, cfg.economy_threshold);
  out.economy_static = economy_indicator(out.static_runs, cfg.economy_threshold);
  return out;
}

namespace {

json scenario_to_json(const ScenarioRun& r) {
  return {{"id", r.id},
          {"injected_error", r.injected_error},
          {"predicted_nadir", r.predicted_nadir},
          {"realized_nadir", r.realized_nadir},
          {"safe", r.safe},
          {"economic", r.economic},
          {"control_cost", r.control_cost},
          {"solve_time_s", r.solve_time_s}};
}

ScenarioRun scenario_from_json(const json& j) {
  ScenarioRun r;
  r.id = j.at("id").get<std::size_t>();
  r.injected_error = j.at("injected_error").get<double>();
  r.predicted_nadir = j.at("predicted_nadir").get<double>();
  r.realized_nadir = j.at("realized_nadir").get<double>();
  r.safe = j.at("safe").get<bool>();
  r.economic = j.at("economic").get<bool>();
  r.control_cost = j.at("control_cost").get<double>();
  r.solve_time_s = j.at("solve_time_s").get<double>();
  return r;
}

}  // namespace

void emit_report(const ExperimentReport& report, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);

  json j;
  j["config_hash"] = report.config_hash;
  j["seed"] = report.seed;
  j["indicators"] = report.indicators;
  json scenarios = json::array();
  for (const auto& r : report.scenarios) scenarios.push_back(scenario_to_json(r));
  j["scenarios"] = std::move(scenarios);
  json timing = json::array();
  for (const auto& t : report.timing)
    timing.push_back({{"sample_count", t.sample_count},
                      {"drefc_median_s", t.drefc_median_s},
                      {"so_median_s", t.so_median_s}});
  j["timing"] = std::move(timing);
  json cells = json::array();
  for (const auto& c : report.icdf_cells)
    cells.push_back({{"components", c.components},
                     {"alpha", c.alpha},
                     {"pearson", c.pearson},
                     {"reversal_rate", c.reversal_rate},
                     {"pairs", c.pairs}});
  j["icdf_cells"] = std::move(cells);
  json ratios = json::array();
  for (const auto& c : report.cost_ratios)
    ratios.push_back({{"confidence", c.confidence},
                      {"drefc_cost", c.drefc_cost},
                      {"ro_cost", c.ro_cost},
                      {"ratio", c.ratio}});
  j["cost_ratios"] = std::move(ratios);
  io::write_json_file(dir / "report.json", j);

  // Plot-ready tables.
  {
    std::ofstream csv(dir / "scenarios.csv");
    csv << "id,injected_error,predicted_nadir,realized_nadir,safe,economic,"
           "control_cost,solve_time_s\n"
        << std::setprecision(17);
    for (const auto& r : report.scenarios)
      csv << r.id << ',' << r.injected_error << ',' << r.predicted_nadir << ','
          << r.realized_nadir << ',' << (r.safe ? 1 : 0) << ','
          << (r.economic ? 1 : 0) << ',' << r.control_cost << ','
          << r.solve_time_s << '\n';
  }
  if (!report.timing.empty()) {
    std::ofstream csv(dir / "timing.csv");
    csv << "sample_count,drefc_median_s,so_median_s\n" << std::setprecision(17);
    for (const auto& t : report.timing)
      csv << t.sample_count << ',' << t.drefc_median_s << ',' << t.so_median_s
          << '\n';
  }
  if (!report.cost_ratios.empty()) {
    std::ofstream csv(dir / "cost_ratios.csv");
    csv << "confidence,drefc_cost,ro_cost,ratio\n" << std::setprecision(17);
    for (const auto& c : report.cost_ratios)
      csv << c.confidence << ',' << c.drefc_cost << ',' << c.ro_cost << ','
          << c.ratio << '\n';
  }
  if (!report.icdf_cells.empty()) {
    std::ofstream csv(dir / "icdf_cells.csv");
    csv << "components,alpha,pearson,reversal_rate,pairs\n"
        << std::setprecision(17);
    for (const auto& c : report.icdf_cells)
      csv << c.components << ',' << c.alpha << ',' << c.pearson << ','
          << c.reversal_rate << ',' << c.pairs << '\n';
  }
}

ExperimentReport load_report(const std::filesystem::path& json_file) {
  const json j = io::read_json_file(json_file);
  ExperimentReport report;
  report.config_hash = j.value("config_hash", std::string());
  report.seed = j.value("seed", std::uint64_t{0});
  if (j.contains("indicators"))
    report.indicators = j.at("indicators").get<std::map<std::string, double>>();
  for (const auto& s : j.value("scenarios", json::array()))
    report.scenarios.push_back(scenario_from_json(s));
  for (const auto& t : j.value("timing", json::array()))
    report.timing.push_back({t.at("sample_count").get<std::size_t>(),
                             t.at("drefc_median_s").get<double>(),
                             t.at("so_median_s").get<double>()});
  for (const auto& c : j.value("icdf_cells", json::array())) {
    IcdfCell cell;
    cell.components = c.at("components").get<std::size_t>();
    cell.alpha = c.at("alpha").get<double>();
    cell.pearson = c.at("pearson").get<double>();
    cell.reversal_rate = c.at("reversal_rate").get<double>();
    cell.pairs = c.at("pairs").get<std::size_t>();
    report.icdf_cells.push_back(cell);
  }
  for (const auto& c : j.value("cost_ratios", json::array())) {
    CostRatioPoint pt;
    pt.confidence = c.at("confidence").get<double>();
    pt.drefc_cost = c.at("drefc_cost").get<double>();
    pt.ro_cost = c.at("ro_cost").get<double>();
    pt.ratio = c.at("ratio").get<double>();
    report.cost_ratios.push_back(pt);
  }
  return report;
}

std::map<std::string, double> recompute_indicators(const ExperimentReport& report,
                                                   double f_min,
                                                   double economy_threshold) {
  std::map<std::string, double> out;
  if (report.scenarios.empty()) return out;
  std::size_t safe = 0, economic = 0;
  double cost = 0.0;
  for (const auto& r : report.scenarios) {
    safe += r.realized_nadir >= f_min ? 1 : 0;
    economic += r.realized_nadir > economy_threshold ? 1 : 0;
    cost += r.control_cost;
  }
  const auto n = static_cast<double>(report.scenarios.size());
  out["safety"] = static_cast<double>(safe) / n;
  out["economy"] = static_cast<double>(economic) / n;
  out["mean_cost"] = cost / n;
  return out;
}

}  // namespace drefc

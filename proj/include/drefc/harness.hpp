// Experiment driver: scenario generation, safety and economic indicators,
// scenario-SO and RO baselines, the ICDF approximation study, timing and
// cost-ratio studies, and plot-ready report emission.
#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "drefc/control.hpp"
#include "drefc/dro.hpp"
#include "drefc/gmm.hpp"
#include "drefc/koopman.hpp"
#include "drefc/sfr.hpp"

namespace drefc {

// Everything one experiment needs, in one file-loadable bundle. Errors are
// kept in the safety-margin convention (predicted minus measured): a positive
// margin sample means the plant dipped below the prediction.
struct ExperimentConfig {
  SfrParams plant{.inertia_2h = 24.0,
                  .damping = 2.3,
                  .governor_gain = 12.0,
                  .governor_time_const = 0.5,
                  .deadband = 0.0,
                  .step_dt = 0.01,
                  .saturation = 0.055,
                  .noise_std = 1e-4};

  // Training dataset. The disturbance onsets inside each record so the
  // measurement window spans it; control engages onset_detect_s later.
  std::size_t n_trajectories = 300;
  double horizon_s = 60.0;
  double onset_s = 1.0;
  Interval deficit_range{0.105, 0.135};
  ExcitationSpec excitation{0.03, 50};
  // Rare cascaded losses: the heavy tail of the error population.
  AftershockSpec aftershocks{0.08, {0.010, 0.030}, {2.0, 8.0}};

  // Lifted model.
  std::size_t decimation = 10;  // plant steps per model step
  std::size_t delay_count = 20;
  std::size_t rbf_count = 6;
  double rbf_lo = -0.05;
  double rbf_hi = 0.01;
  double ridge = 1e-8;
  double train_window_s = 15.0;       // snapshot pairs from each record prefix
  double prediction_horizon_s = 20.0; // control and error horizon past anchor

  // Error mixtures.
  std::size_t gmm_components = 3;
  EmOptions em;
  std::size_t past_len = 1;
  std::size_t future_len = 1;

  // Ambiguity set. Negative gamma requests bootstrap calibration: the given
  // percentile of mw2 distances between the reference fit and refits on
  // resampled data.
  double gamma = -1.0;
  std::size_t bootstrap_refits = 50;
  double bootstrap_percentile = 0.90;
  std::size_t component_budget = 0;

  // Risk and control.
  double alpha = 0.05;
  double alpha_guard = 0.0;  // optional inflation of 1 - alpha in the margin
  double f_min = -0.015;
  double economy_threshold = -0.005;
  double step_cost_weight = 1.0;
  double u_max = 0.3;

  // Scenario experiments (events follow the training disturbance process).
  std::size_t n_scenarios = 700;
  Interval event_deficit_range{0.10, 0.14};
  std::uint64_t seed = 2397;

  // Moving-horizon DC mode.
  std::size_t dc_total_steps = 2500;

  void validate() const;
};

// Trained artifacts shared by the experiments.
struct Pipeline {
  ExperimentConfig config;
  KoopmanModel model;
  std::vector<double> margin_samples;  // per-trajectory nadir margins
  Gmm reference;                       // fitted on margin_samples
  double gamma = 0.0;                  // resolved ambiguity radius
  JointGmm joint;                      // one-step error model for DC mode
  std::vector<FitReport> fit_reports;  // every EM fit run by the pipeline
  std::size_t prediction_horizon = 0;  // model steps from anchor to run end

  VarSpec var() const {
    return VarSpec(std::max(1e-6, config.alpha - config.alpha_guard));
  }
  AmbiguitySet ambiguity() const {
    return {reference, gamma, config.component_budget};
  }
};

Pipeline build_pipeline(const ExperimentConfig& config);

struct ScenarioInput {
  std::size_t id = 0;
  double error = 0.0;    // additive error on the prediction (measured - predicted)
  double deficit = 0.0;  // event size
};

// Draws scenario errors from `error_gmm` (measured-minus-predicted space) and
// event deficits from `deficit_range`. With common_random_numbers the errors
// come from the mixture quantile applied to a seed-derived uniform stream, so
// two distributions compared under the same seed are coupled scenario by
// scenario.
std::vector<ScenarioInput> generate_scenarios(const Gmm& error_gmm, std::size_t n,
                                              Interval deficit_range,
                                              std::uint64_t seed,
                                              bool common_random_numbers = true);

struct ScenarioRun {
  std::size_t id = 0;
  double injected_error = 0.0;  // measured-minus-predicted sample
  double predicted_nadir = 0.0;
  double realized_nadir = 0.0;
  bool safe = false;      // realized_nadir >= f_min
  bool economic = false;  // realized_nadir > economy threshold
  double control_cost = 0.0;
  double solve_time_s = 0.0;
};

double safety_indicator(std::span<const ScenarioRun> runs);
double economy_indicator(std::span<const ScenarioRun> runs, double threshold);

struct LoadShedOutcome {
  std::vector<ScenarioRun> runs;
  double zeta = 0.0;  // margin used by the controller
};

// One-shot load-shedding experiment: the controller margin comes from the
// worst-case problem on the pipeline's ambiguity set; `scenario_margin_gmm`
// (margin space) generates the injected errors. Pass the reference for the
// nominal test and the worst-case mixture for the stress test.
LoadShedOutcome run_load_shed_scenarios(const Pipeline& pipeline,
                                        const Gmm& scenario_margin_gmm,
                                        std::size_t n, std::uint64_t seed);

// Scenario-based stochastic baseline: one frequency constraint per sampled
// margin error (per step), same QP engine. Cost grows with the sample count.
ControlSolution baseline_so(const KoopmanModel& model, const Eigen::VectorXd& g0,
                            std::span<const double> margin_samples, double f_min,
                            double step_cost_weight, Interval u_bounds,
                            std::size_t horizon);

// Robust baseline: margin = largest historical error, then the same QP.
ControlSolution baseline_ro(const KoopmanModel& model, const Eigen::VectorXd& g0,
                            std::span<const double> margin_history, double f_min,
                            double step_cost_weight, Interval u_bounds,
                            std::size_t horizon);

struct IcdfCell {
  std::size_t components = 0;
  double alpha = 0.0;
  double pearson = 0.0;        // exact vs approximate quantile over the draw
  double reversal_rate = 0.0;  // pairwise order disagreements
  std::size_t pairs = 0;
};

struct IcdfStudyReport {
  std::size_t n_gmms = 0;
  std::vector<IcdfCell> cells;
};

IcdfStudyReport icdf_study(std::size_t n_gmms, std::span<const double> alphas,
                           std::span<const std::size_t> component_counts,
                           std::uint64_t seed);

struct TimingPoint {
  std::size_t sample_count = 0;
  double drefc_median_s = 0.0;
  double so_median_s = 0.0;
};

struct TimingReport {
  std::vector<TimingPoint> points;
  std::size_t repeats = 0;
};

// Median optimization-only wall time per method per sample count, on a fixed
// representative event. The margin solve plus its QP is count-independent;
// the SO baseline constraint set grows with the count.
TimingReport timing_study(const Pipeline& pipeline,
                          std::span<const std::size_t> counts,
                          std::size_t repeats, std::uint64_t seed);

struct CostRatioPoint {
  double confidence = 0.0;
  double drefc_cost = 0.0;
  double ro_cost = 0.0;
  double ratio = 0.0;
};

std::vector<CostRatioPoint> cost_ratio_study(const Pipeline& pipeline,
                                             std::span<const double> confidences,
                                             std::uint64_t seed);

struct DcComparison {
  std::vector<ScenarioRun> online_runs;
  std::vector<ScenarioRun> static_runs;
  double safety_online = 0.0;
  double safety_static = 0.0;
  double economy_online = 0.0;
  double economy_static = 0.0;
};

// Paired closed-loop experiment: the same seeded events run once with online
// conditional updates and once with the static reference.
DcComparison compare_dc_modes(const Pipeline& pipeline, std::size_t n_scenarios,
                              std::uint64_t seed);

struct ExperimentReport {
  std::string config_hash;
  std::uint64_t seed = 0;
  std::map<std::string, double> indicators;
  std::vector<ScenarioRun> scenarios;
  std::vector<TimingPoint> timing;
  std::vector<IcdfCell> icdf_cells;
  std::vector<CostRatioPoint> cost_ratios;
};

// report.json plus plot-ready CSV tables under `dir`.
void emit_report(const ExperimentReport& report, const std::filesystem::path& dir);
ExperimentReport load_report(const std::filesystem::path& json_file);

// Indicator recomputation from the per-scenario table (audit path).
std::map<std::string, double> recompute_indicators(const ExperimentReport& report,
                                                   double f_min,
                                                   double economy_threshold);

}  // namespace drefc

// Aggregated system-frequency-response simulator: swing equation plus a
// first-order governor with a smooth output limiter. Serves as the ground
// truth plant for training and evaluating the lifted linear predictor.
#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "drefc/errors.hpp"

namespace drefc {

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
  bool empty() const { return !(lo <= hi); }
  double width() const { return hi - lo; }
};

struct SfrParams {
  double inertia_2h = 8.0;          // 2H [s]
  double damping = 1.0;             // D [pu power / pu freq]
  double governor_gain = 25.0;      // K_g [pu power / pu freq]
  double governor_time_const = 1.5; // T_g [s]
  double deadband = 0.0;            // governor deadband [pu freq]; 0 = off
  double step_dt = 0.01;            // integration step [s]
  double saturation = 0.03;         // governor output limit [pu power]; 0 = off
  double noise_std = 1e-4;          // measurement noise on reported freq_dev [pu]

  void validate() const;
};

struct Disturbance {
  double onset_time = 0.0;     // [s], snapped to the step grid
  double power_deficit = 0.0;  // generation loss [pu power], >= 0
  // Optional secondary loss (cascaded trip) later in the event; zero deficit
  // disables it. Hidden from the predictor like the primary loss.
  double aftershock_time = 0.0;
  double aftershock_deficit = 0.0;

  void validate() const;
};

// Uniformly sampled record of one simulated event. `freq_dev` is the measured
// frequency deviation (state plus measurement noise); `injected_power` is the
// control power applied over [t_i, t_{i+1}).
struct Trajectory {
  std::vector<double> times;
  std::vector<double> freq_dev;
  std::vector<double> injected_power;
  std::uint64_t noise_seed = 0;

  std::size_t size() const { return times.size(); }
  void validate() const;
};

// Incremental stepper for the two-state model (frequency deviation, governor
// power). Used directly by the closed-loop controller; `simulate` wraps it.
class SfrSimulator {
 public:
  SfrSimulator(const SfrParams& params, const Disturbance& dist,
               std::uint64_t noise_seed);

  // Advances one step of `step_dt` holding control power `u` constant.
  void step(double u);

  double time() const { return static_cast<double>(step_index_) * params_.step_dt; }
  std::size_t step_index() const { return step_index_; }
  double state_freq_dev() const { return omega_; }
  double governor_power() const { return p_gov_; }
  // State plus the measurement-noise draw for the current step index.
  double measured_freq_dev() const;

 private:
  SfrParams params_;
  Disturbance dist_;
  std::size_t onset_step_ = 0;
  std::size_t aftershock_step_ = 0;
  std::uint64_t noise_seed_ = 0;
  std::size_t step_index_ = 0;
  double omega_ = 0.0;
  double p_gov_ = 0.0;
};

// Integrates the model with fixed-step RK4. `control` is applied stepwise and
// zero-padded to the horizon. Throws integration_error on non-finite states.
Trajectory simulate(const SfrParams& params, const Disturbance& dist,
                    const std::vector<double>& control, double horizon,
                    std::uint64_t seed);

// Piecewise-constant random control excitation mixed into generated datasets
// so the control channel of the lifted model is identifiable.
struct ExcitationSpec {
  double max_power = 0.0;      // amplitude drawn uniformly from [0, max_power]
  std::size_t hold_steps = 50; // resample interval in plant steps
};

// Rare secondary losses in generated events; these put the heavy right tail
// into the prediction-error population.
struct AftershockSpec {
  double probability = 0.0;
  Interval deficit_range{0.0, 0.0};
  Interval delay_range{2.0, 8.0};  // seconds after the primary onset
};

// Draws `n_traj` disturbances uniformly from `deficit_range` and simulates
// each one. Per-trajectory noise and excitation seeds derive from `seed`, so
// the result is independent of evaluation order. `onset_time` places the
// disturbance inside the record so measurement windows can span it.
std::vector<Trajectory> generate_dataset(
    const SfrParams& params, std::size_t n_traj, Interval deficit_range,
    double horizon, std::uint64_t seed,
    std::optional<ExcitationSpec> excitation = std::nullopt,
    double onset_time = 0.0,
    std::optional<AftershockSpec> aftershocks = std::nullopt);

// The disturbance draw used for trajectory `index` of a dataset (scenario
// generators reuse it so events follow the training process).
Disturbance draw_disturbance(Interval deficit_range, double onset_time,
                             const std::optional<AftershockSpec>& aftershocks,
                             std::uint64_t seed, std::size_t index);

}  // namespace drefc

#include "drefc/sfr.hpp"

#include <cmath>

#include "drefc/detail/rng.hpp"

namespace drefc {

namespace {

double apply_deadband(double omega, double deadband) {
  if (deadband <= 0.0) return omega;
  if (omega > deadband) return omega - deadband;
  if (omega < -deadband) return omega + deadband;
  return 0.0;
}

// Smooth limiter so the right-hand side stays C^infinity and RK4 keeps its
// order; hard clamping would cap step-halving convergence near crossings.
double limit(double x, double level) {
  if (level <= 0.0) return x;
  return level * std::tanh(x / level);
}

}  // namespace

void SfrParams::validate() const {
  if (!(inertia_2h > 0.0)) throw argument_error("inertia_2h must be > 0");
  if (!(step_dt > 0.0)) throw argument_error("step_dt must be > 0");
  if (!(governor_time_const > 0.0))
    throw argument_error("governor_time_const must be > 0");
  if (saturation < 0.0) throw argument_error("saturation level must be >= 0");
  if (deadband < 0.0) throw argument_error("deadband must be >= 0");
  if (noise_std < 0.0) throw argument_error("noise_std must be >= 0");
}

void Disturbance::validate() const {
  if (onset_time < 0.0) throw argument_error("onset_time must be >= 0");
  if (power_deficit < 0.0) throw argument_error("power_deficit must be >= 0");
  if (aftershock_deficit < 0.0)
    throw argument_error("aftershock_deficit must be >= 0");
  if (aftershock_deficit > 0.0 && aftershock_time < onset_time)
    throw argument_error("aftershock must not precede the primary onset");
}

void Trajectory::validate() const {
  if (times.size() != freq_dev.size() || times.size() != injected_power.size())
    throw argument_error("trajectory channels must have equal length");
  if (times.size() < 2) return;
  const double dt = times[1] - times[0];
  for (std::size_t i = 1; i < times.size(); ++i) {
    const double step = times[i] - times[i - 1];
    if (!(step > 0.0) || std::abs(step - dt) > 1e-9 * (1.0 + std::abs(dt)))
      throw argument_error("trajectory times must increase with uniform spacing");
  }
}

SfrSimulator::SfrSimulator(const SfrParams& params, const Disturbance& dist,
                           std::uint64_t noise_seed)
    : params_(params), dist_(dist), noise_seed_(noise_seed) {
  params_.validate();
  dist_.validate();
  onset_step_ = static_cast<std::size_t>(
      std::llround(dist_.onset_time / params_.step_dt));
  aftershock_step_ = static_cast<std::size_t>(
      std::llround(dist_.aftershock_time / params_.step_dt));
}

double SfrSimulator::measured_freq_dev() const {
  if (step_index_ == 0 || params_.noise_std <= 0.0) return omega_;
  return omega_ + params_.noise_std *
                      detail::gaussian_from_seed(noise_seed_, step_index_);
}

void SfrSimulator::step(double u) {
  double deficit = step_index_ >= onset_step_ ? dist_.power_deficit : 0.0;
  if (dist_.aftershock_deficit > 0.0 && step_index_ >= aftershock_step_)
    deficit += dist_.aftershock_deficit;
  const double h = params_.step_dt;

  const auto deriv = [&](double omega, double p_gov, double& d_omega,
                         double& d_pgov) {
    d_omega = (p_gov + u - deficit - params_.damping * omega) /
              params_.inertia_2h;
    const double command =
        limit(-params_.governor_gain * apply_deadband(omega, params_.deadband),
              params_.saturation);
    d_pgov = (command - p_gov) / params_.governor_time_const;
  };

  double k1w, k1p, k2w, k2p, k3w, k3p, k4w, k4p;
  deriv(omega_, p_gov_, k1w, k1p);
  deriv(omega_ + 0.5 * h * k1w, p_gov_ + 0.5 * h * k1p, k2w, k2p);
  deriv(omega_ + 0.5 * h * k2w, p_gov_ + 0.5 * h * k2p, k3w, k3p);
  deriv(omega_ + h * k3w, p_gov_ + h * k3p, k4w, k4p);

  omega_ += h / 6.0 * (k1w + 2.0 * k2w + 2.0 * k3w + k4w);
  p_gov_ += h / 6.0 * (k1p + 2.0 * k2p + 2.0 * k3p + k4p);
  ++step_index_;
}

Trajectory simulate(const SfrParams& params, const Disturbance& dist,
                    const std::vector<double>& control, double horizon,
                    std::uint64_t seed) {
  params.validate();
  dist.validate();
  if (!(horizon > dist.onset_time))
    throw argument_error("horizon must exceed the disturbance onset");
  const auto n_steps =
      static_cast<std::size_t>(std::llround(horizon / params.step_dt));
  if (control.size() > n_steps)
    throw argument_error("control sequence longer than the step count");

  SfrSimulator sim(params, dist, seed);
  Trajectory traj;
  traj.noise_seed = seed;
  traj.times.reserve(n_steps + 1);
  traj.freq_dev.reserve(n_steps + 1);
  traj.injected_power.reserve(n_steps + 1);

  traj.times.push_back(0.0);
  traj.freq_dev.push_back(sim.measured_freq_dev());
  traj.injected_power.push_back(control.empty() ? 0.0 : control[0]);

  for (std::size_t i = 0; i < n_steps; ++i) {
    const double u = i < control.size() ? control[i] : 0.0;
    sim.step(u);
    const double omega = sim.state_freq_dev();
    if (!std::isfinite(omega) || std::abs(omega) > 10.0)
      throw integration_error("SFR integration diverged", i + 1);
    traj.times.push_back(sim.time());
    traj.freq_dev.push_back(sim.measured_freq_dev());
    const std::size_t next = i + 1;
    traj.injected_power.push_back(next < control.size() ? control[next] : 0.0);
  }
  return traj;
}

Disturbance draw_disturbance(Interval deficit_range, double onset_time,
                             const std::optional<AftershockSpec>& aftershocks,
                             std::uint64_t seed, std::size_t index) {
  const std::uint64_t s = detail::derive_seed(seed, 3 * index + 1);
  Disturbance dist;
  dist.onset_time = onset_time;
  dist.power_deficit =
      deficit_range.lo +
      detail::uniform_from_seed(s, 0) * deficit_range.width();
  if (aftershocks && aftershocks->probability > 0.0 &&
      detail::uniform_from_seed(s, 1) < aftershocks->probability) {
    dist.aftershock_deficit =
        aftershocks->deficit_range.lo +
        detail::uniform_from_seed(s, 2) * aftershocks->deficit_range.width();
    dist.aftershock_time =
        onset_time + aftershocks->delay_range.lo +
        detail::uniform_from_seed(s, 3) * aftershocks->delay_range.width();
  }
  return dist;
}

std::vector<Trajectory> generate_dataset(
    const SfrParams& params, std::size_t n_traj, Interval deficit_range,
    double horizon, std::uint64_t seed,
    std::optional<ExcitationSpec> excitation, double onset_time,
    std::optional<AftershockSpec> aftershocks) {
  params.validate();
  if (n_traj < 1) throw argument_error("n_traj must be >= 1");
  if (deficit_range.empty())
    throw argument_error("deficit_range must be non-empty");

  const auto n_steps =
      static_cast<std::size_t>(std::llround(horizon / params.step_dt));

  std::vector<Trajectory> out;
  out.reserve(n_traj);
  for (std::size_t i = 0; i < n_traj; ++i) {
    const std::uint64_t noise_seed = detail::derive_seed(seed, 3 * i);
    const Disturbance dist =
        draw_disturbance(deficit_range, onset_time, aftershocks, seed, i);

    std::vector<double> control;
    if (excitation && excitation->max_power > 0.0) {
      const std::uint64_t exc_seed = detail::derive_seed(seed, 3 * i + 2);
      const std::size_t hold = std::max<std::size_t>(1, excitation->hold_steps);
      control.resize(n_steps);
      for (std::size_t k = 0; k < n_steps; ++k) {
        control[k] = excitation->max_power *
                     detail::uniform_from_seed(exc_seed, k / hold);
      }
    }
    out.push_back(simulate(params, dist, control, horizon, noise_seed));
  }
  return out;
}

}  // namespace drefc

#include "vtauv/sim.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <random>
#include <sstream>

#include "textio.hpp"
#include "vtauv/errors.hpp"

namespace vtauv {
namespace {

using textio::ParseDouble;
using textio::WriteDouble;

const char* const kStateColumns[17] = {
    "qw[-]",     "qx[-]",     "qy[-]",     "qz[-]",    "x[m]",     "y[m]",
    "z[m]",      "psi[rad]",  "phi[rad]",  "wx[rad/s]", "wy[rad/s]", "wz[rad/s]",
    "u[m/s]",    "v[m/s]",    "w[m/s]",    "psi_rate[rad/s]", "phi_rate[rad/s]"};
const char* const kInputColumns[3] = {"f[N]", "tau_psi[N*m]", "tau_phi[N*m]"};
const char* const kErrorColumns[16] = {
    "e_qx[-]",    "e_qy[-]",    "e_qz[-]",    "e_x[m]",     "e_y[m]",     "e_z[m]",
    "e_psi[rad]", "e_phi[rad]", "e_wx[rad/s]", "e_wy[rad/s]", "e_wz[rad/s]", "e_u[m/s]",
    "e_v[m/s]",   "e_w[m/s]",   "e_psi_rate[rad/s]", "e_phi_rate[rad/s]"};
constexpr size_t kLogColumns = 1 + 17 + 3 + 17 + 3 + 16 + 1;

bool ClampInto(const Interval& limits, double& value) {
  const double c = limits.clamp(value);
  const bool hit = c != value;
  value = c;
  return hit;
}

// Angle stops (rate zeroed when a stop is hit) and rate limits.
bool ApplyStops(const VehicleParams& p, FullState& x) {
  bool hit = false;
  if (ClampInto(p.psi_limits, x.s[idx::kPsi])) {
    x.v[6] = 0.0;
    hit = true;
  }
  if (ClampInto(p.phi_limits, x.s[idx::kPhi])) {
    x.v[7] = 0.0;
    hit = true;
  }
  hit = ClampInto(p.psi_rate_limits, x.v[6]) || hit;
  hit = ClampInto(p.phi_rate_limits, x.v[7]) || hit;
  return hit;
}

VehicleParams ScaledPlant(const VehicleParams& p, const ParameterScaling& s) {
  VehicleParams out = p;
  out.linear_damping *= s.damping;
  out.quadratic_damping *= s.damping;
  out.added_mass_matrix *= s.added_mass;
  return out;
}

SimLog Rollout(const VehicleParams& params, const Trajectory& traj, const GainSchedule* schedule,
               const SimConfig& config) {
  const double d = traj.duration();
  config.validate(d);
  const VehicleModel plant(ScaledPlant(params, config.scaling));
  const double duration = config.effective_duration(d);
  const int substeps =
      static_cast<int>(std::lround(config.control_period / config.integrator_step));
  const double dt = config.control_period / substeps;
  const int samples =
      std::max(0, static_cast<int>(std::ceil(duration / config.control_period - 1e-9)));

  SimLog log;
  log.metadata["mode"] = schedule ? "closed_loop" : "open_loop";
  FullState x = perturbed_initial_state(traj, params, config);
  for (int i = 0; i <= samples; ++i) {
    const double t = i * config.control_period;
    const FullState ref = traj.state_at(t);
    const ControlInput u_ref = traj.input_at(t);
    ControlInput u;
    Vector16d error;
    bool saturated = false;
    if (schedule) {
      const ControlOutput out = control(*schedule, traj, params, x, t, config.attitude_error);
      u = out.input;
      error = out.error;
      saturated = out.saturated;
    } else {
      u = u_ref;
      saturated = ClampInto(params.force_limits, u.force);
      error = reduced_error(x, ref, config.attitude_error);
    }
    const FullState x_sample = x;
    if (i < samples) {
      for (int j = 0; j < substeps; ++j) {
        ControlInput applied = u;
        if (!schedule) {
          applied = traj.input_at(t + j * dt);
          saturated = ClampInto(params.force_limits, applied.force) || saturated;
        }
        bool clamped = false;
        x = step(plant, x, applied, dt, config.bias_force, &clamped);
        saturated = saturated || clamped;
      }
    }
    log.times.push_back(t);
    log.states.push_back(x_sample.vector());
    log.inputs.push_back(u.vector());
    log.reference_states.push_back(ref.vector());
    log.reference_inputs.push_back(u_ref.vector());
    log.errors.push_back(error);
    log.saturated.push_back(saturated ? 1 : 0);
  }
  return log;
}

}  // namespace

void SimConfig::validate(double trajectory_duration) const {
  auto require = [](bool ok, const std::string& what) {
    if (!ok) throw Error(ErrorCode::kInvalidSpec, "simulation config: " + what);
  };
  require(integrator_step > 0.0 && std::isfinite(integrator_step), "integrator step must be > 0");
  require(control_period >= integrator_step, "control period must be >= integrator step");
  const double ratio = control_period / integrator_step;
  require(std::abs(ratio - std::round(ratio)) <= 1e-9 * ratio,
          "control period must be a whole multiple of the integrator step");
  require(duration == 0.0 || duration >= trajectory_duration,
          "duration must cover the trajectory");
  require(std::isfinite(duration) && duration >= 0.0, "duration must be finite");
  require(random_perturbation >= 0.0 && std::isfinite(random_perturbation),
          "random perturbation must be >= 0");
  require(bias_force.allFinite() && initial_perturbation.allFinite(),
          "disturbances must be finite");
  require(scaling.damping >= 0.0 && scaling.added_mass >= 0.0, "scaling must be >= 0");
}

Vector16d state_envelope(const Trajectory& reference, const VehicleParams& params) {
  Vector16d lo = Vector16d::Constant(std::numeric_limits<double>::infinity());
  Vector16d hi = -lo;
  const FullState x0 = FullState::FromVector(reference.states.front());
  for (const Vector17d& xv : reference.states) {
    const Vector16d e = reduced_error(FullState::FromVector(xv), x0);
    lo = lo.cwiseMin(e);
    hi = hi.cwiseMax(e);
  }
  Vector16d env = hi - lo;
  for (int i = 0; i < 3; ++i) env[i] = std::max(env[i], 0.1);
  for (int i = 3; i < 6; ++i) env[i] = std::max(env[i], 1.0);
  env[6] = params.psi_limits.max - params.psi_limits.min;
  env[7] = params.phi_limits.max - params.phi_limits.min;
  for (int i = 8; i < 16; ++i) env[i] = std::max(env[i], 0.5);
  return env;
}

FullState perturbed_initial_state(const Trajectory& reference, const VehicleParams& params,
                                  const SimConfig& config) {
  Vector16d delta = config.initial_perturbation;
  if (config.random_perturbation > 0.0) {
    std::mt19937_64 rng(config.seed);
    std::uniform_real_distribution<double> uniform(-1.0, 1.0);
    const Vector16d env = state_envelope(reference, params);
    for (int i = 0; i < kReducedSize; ++i) {
      delta[i] += config.random_perturbation * env[i] * uniform(rng);
    }
  }
  FullState x = apply_reduced(FullState::FromVector(reference.states.front()), delta);
  ApplyStops(params, x);
  return x;
}

FullState step(const VehicleModel& model, const FullState& x, const ControlInput& u, double dt,
               const Vector8d& external, bool* clamped) {
  if (!(dt > 0.0)) throw Error(ErrorCode::kInvalidSpec, "step size must be > 0");
  const Eigen::Vector3d uv = u.vector();
  auto f = [&](const Vector17d& s) { return state_derivative(model, s, uv, external); };
  const Vector17d x0 = x.vector();
  const Vector17d k1 = f(x0);
  const Vector17d k2 = f(x0 + 0.5 * dt * k1);
  const Vector17d k3 = f(x0 + 0.5 * dt * k2);
  const Vector17d k4 = f(x0 + dt * k3);
  const Vector17d next = x0 + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  if (!next.allFinite()) {
    std::ostringstream msg;
    msg << "non-finite state after a step of " << dt << " s from x = " << x0.transpose();
    throw Error(ErrorCode::kNonFinite, msg.str());
  }
  FullState out = FullState::FromVector(next);
  out.s.head<4>().normalize();
  const bool hit = ApplyStops(model.params(), out);
  if (clamped) *clamped = hit;
  return out;
}

SimLog rollout_open_loop(const VehicleParams& params, const Trajectory& traj,
                         const SimConfig& config) {
  return Rollout(params, traj, nullptr, config);
}

SimLog rollout_closed_loop(const VehicleParams& params, const Trajectory& traj,
                           const GainSchedule& schedule, const SimConfig& config) {
  return Rollout(params, traj, &schedule, config);
}

TrackingMetrics tracking_metrics(const SimLog& log) {
  if (log.size() == 0) throw Error(ErrorCode::kInvalidSpec, "tracking metrics of an empty log");
  TrackingMetrics m;
  m.samples = log.size();
  double sum_sq = 0.0;
  size_t clamped = 0;
  for (size_t i = 0; i < log.size(); ++i) {
    const FullState x = FullState::FromVector(log.states[i]);
    const FullState r = FullState::FromVector(log.reference_states[i]);
    const double e = (x.position() - r.position()).norm();
    sum_sq += e * e;
    m.final_position_error = e;
    m.max_attitude_error =
        std::max(m.max_attitude_error, geodesic_angle(x.quaternion(), r.quaternion()));
    if (log.saturated[i]) ++clamped;
  }
  m.final_error_norm = log.errors.empty() ? 0.0 : log.errors.back().norm();
  m.rms_position_error = std::sqrt(sum_sq / static_cast<double>(log.size()));
  m.saturation_fraction = static_cast<double>(clamped) / static_cast<double>(log.size());
  return m;
}

nlohmann::json metrics_json(const TrackingMetrics& m) {
  return {{"rms_position_error_m", m.rms_position_error},
          {"final_position_error_m", m.final_position_error},
          {"max_attitude_error_rad", m.max_attitude_error},
          {"final_error_norm", m.final_error_norm},
          {"saturation_fraction", m.saturation_fraction},
          {"samples", m.samples}};
}

void write_sim_log(std::ostream& os, const SimLog& log) {
  const size_t n = log.size();
  if (log.states.size() != n || log.inputs.size() != n || log.reference_states.size() != n ||
      log.reference_inputs.size() != n || log.errors.size() != n || log.saturated.size() != n) {
    throw Error(ErrorCode::kDimensionMismatch, "simulation log columns differ in length");
  }
  os << "# vtauv simulation log\n# format_version 1\n# samples " << n << '\n';
  for (const auto& [key, value] : log.metadata) os << "# meta " << key << ' ' << value << '\n';
  os << "time[s]";
  for (const char* c : kStateColumns) os << ' ' << c;
  for (const char* c : kInputColumns) os << ' ' << c;
  for (const char* c : kStateColumns) os << " ref_" << c;
  for (const char* c : kInputColumns) os << " ref_" << c;
  for (const char* c : kErrorColumns) os << ' ' << c;
  os << " saturated[-]\n";
  auto put = [&os](const auto& v) {
    for (int i = 0; i < v.size(); ++i) {
      os << ' ';
      WriteDouble(os, v[i]);
    }
  };
  for (size_t i = 0; i < n; ++i) {
    WriteDouble(os, log.times[i]);
    put(log.states[i]);
    put(log.inputs[i]);
    put(log.reference_states[i]);
    put(log.reference_inputs[i]);
    put(log.errors[i]);
    os << ' ' << log.saturated[i] << '\n';
  }
}

SimLog read_sim_log(std::istream& is) {
  SimLog log;
  long samples = -1;
  bool have_header = false;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      std::istringstream in(line.substr(1));
      std::string key;
      in >> key;
      if (key == "samples") {
        in >> samples;
      } else if (key == "meta") {
        std::string name, value;
        in >> name;
        std::getline(in >> std::ws, value);
        log.metadata[name] = value;
      }
      continue;
    }
    if (!have_header) {
      have_header = true;
      continue;
    }
    std::istringstream in(line);
    std::vector<double> row;
    for (std::string tok; in >> tok;) row.push_back(ParseDouble(tok));
    if (row.size() != kLogColumns) {
      throw Error(ErrorCode::kIo, "simulation log row has " + std::to_string(row.size()) +
                                      " columns, expected " + std::to_string(kLogColumns));
    }
    size_t c = 0;
    auto take = [&](auto& v) {
      for (int i = 0; i < v.size(); ++i) v[i] = row[c++];
    };
    log.times.push_back(row[c++]);
    Vector17d x, xr;
    Eigen::Vector3d u, ur;
    Vector16d e;
    take(x);
    take(u);
    take(xr);
    take(ur);
    take(e);
    log.states.push_back(x);
    log.inputs.push_back(u);
    log.reference_states.push_back(xr);
    log.reference_inputs.push_back(ur);
    log.errors.push_back(e);
    log.saturated.push_back(static_cast<int>(row[c]));
  }
  if (samples < 0 || log.size() != static_cast<size_t>(samples)) {
    throw Error(ErrorCode::kIo, "simulation log is incomplete or inconsistent");
  }
  return log;
}

void save_sim_log(const std::string& path, const SimLog& log) {
  std::ofstream os(path);
  if (!os) throw Error(ErrorCode::kIo, "cannot open " + path + " for writing");
  write_sim_log(os, log);
  if (!os) throw Error(ErrorCode::kIo, "failed writing " + path);
}

SimLog load_sim_log(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw Error(ErrorCode::kIo, "cannot open " + path);
  return read_sim_log(is);
}

}  // namespace vtauv

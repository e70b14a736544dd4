#include "vtauv/pipeline.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <numbers>
#include <ostream>
#include <sstream>

#include "textio.hpp"
#include "vtauv/config.hpp"
#include "vtauv/errors.hpp"

namespace vtauv {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr double kRadToDeg = 180.0 / std::numbers::pi;

std::string Short(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

std::string Join(const std::string& dir, const std::string& file) {
  return (fs::path(dir) / file).string();
}

void WriteJsonFile(const std::string& path, const json& j) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path);
  out << j.dump(2) << '\n';
  if (!out) throw Error(ErrorCode::kIo, "write failed for " + path);
}

void RequireWritable(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) {
    throw Error(ErrorCode::kIo, "cannot create output directory " + dir);
  }
  const std::string probe = Join(dir, ".write_probe");
  {
    std::ofstream out(probe);
    if (!out || !(out << "probe")) {
      throw Error(ErrorCode::kIo, "output directory " + dir + " is not writable");
    }
  }
  fs::remove(probe, ec);
}

double WrapDegrees(double a) {
  a = std::remainder(a, 360.0);
  return a == -180.0 ? 180.0 : a;
}

// Geometric summary of a trajectory used to judge the maneuver.
json ManeuverSummary(const Trajectory& traj, const TranscriptionSpec& spec) {
  const int t = traj.knots();
  const Eigen::Vector3d ypr0 = yaw_pitch_roll(FullState::FromVector(traj.states[0]).quaternion());
  const Eigen::Vector3d yprT = yaw_pitch_roll(FullState::FromVector(traj.states[t]).quaternion());
  double min_dz = std::numeric_limits<double>::infinity(), lateral = 0.0, force = 0.0;
  double norm_lo = std::numeric_limits<double>::infinity(), norm_hi = 0.0;
  for (int k = 0; k < t; ++k) {
    min_dz = std::min(min_dz, traj.states[k + 1][idx::kPos + 2] - traj.states[k][idx::kPos + 2]);
  }
  for (int k = 0; k <= t; ++k) {
    lateral = std::max({lateral, std::abs(traj.states[k][idx::kPos]),
                        std::abs(traj.states[k][idx::kPos + 1])});
    force = std::max(force, std::abs(traj.inputs[k][0]));
  }
  for (const Vector17d& x : traj.states) {
    norm_lo = std::min(norm_lo, x.head<4>().norm());
    norm_hi = std::max(norm_hi, x.head<4>().norm());
  }
  // Largest geodesic distance to the target attitude over the hold segment.
  const UnitQuaternion qf = spec.target.quaternion();
  double hold = 0.0;
  for (int k = std::max(0, t - spec.hold_knots); k <= t; ++k) {
    const UnitQuaternion q = FullState::FromVector(traj.states[k]).quaternion().normalized();
    hold = std::max(hold, 2.0 * std::acos(std::min(1.0, std::abs(q.coeffs.dot(qf.coeffs)))));
  }
  return {{"yaw_change_deg", WrapDegrees((yprT[0] - ypr0[0]) * kRadToDeg)},
          {"final_pitch_deg", yprT[1] * kRadToDeg},
          {"hold_attitude_error_deg", hold * kRadToDeg},
          {"min_knot_climb", t > 0 ? min_dz : 0.0},
          {"max_lateral_excursion", lateral},
          {"max_abs_force", force},
          {"quaternion_norm_range", json::array({norm_lo, norm_hi})},
          {"duration", traj.duration()},
          {"time_step", traj.time_step}};
}

json SolveJson(const TrajectoryResult& r, const Interval& force_limits) {
  json families = json::object();
  for (const auto& [name, value] : r.validation.families) families[name] = value;
  return {{"status", nlp::to_string(r.report.status)},
          {"converged", r.converged},
          {"objective", r.report.objective},
          {"max_violation", r.report.max_violation},
          {"stationarity", r.report.stationarity},
          {"outer_iterations", r.report.outer_iterations},
          {"inner_iterations", r.report.inner_iterations},
          {"penalty", r.report.penalty},
          {"force_limits", config_detail::interval_json(force_limits)},
          {"validation", families}};
}

SimConfig NominalConfig(const ScenarioSpec& spec) {
  SimConfig c = spec.sim;
  c.random_perturbation = 0.0;
  return c;
}

SimConfig PerturbedConfig(const ScenarioSpec& spec, std::optional<std::uint64_t> seed) {
  SimConfig c = spec.sim;
  c.random_perturbation = spec.perturbation;
  if (seed) c.seed = *seed;
  return c;
}

// The scenario's force-limit override stands for a different thruster, so
// the controller and the plant get it too.
VehicleParams ScenarioVehicle(const VehicleParams& base, const ScenarioSpec& spec) {
  VehicleParams p = base;
  p.force_limits = spec.transcription.effective_force_limits(base);
  return p;
}

class Runner {
 public:
  Runner(const RunConfig& config, ScenarioSpec spec, std::string dir, RunManifest manifest,
         const PipelineOptions& options)
      : config_(config),
        spec_(std::move(spec)),
        params_(ScenarioVehicle(config.vehicle, spec_)),
        dir_(std::move(dir)),
        manifest_(std::move(manifest)),
        options_(options) {}

  RunManifest run(size_t first, size_t last) {
    using Fn = void (Runner::*)(StageRecord&);
    static const Fn kStages[] = {&Runner::optimize, &Runner::validate, &Runner::gains,
                                 &Runner::open_loop, &Runner::closed_loop};
    for (size_t i = first; i <= last; ++i) {
      StageRecord record;
      record.name = PipelineStages()[i];
      log("stage " + record.name + " ...");
      const auto t0 = std::chrono::steady_clock::now();
      try {
        (this->*kStages[i])(record);
      } catch (const Error& e) {
        record.status = "failed";
        record.detail = e.what();
        finish(record, t0);
        log("stage " + record.name + " failed: " + e.what());
        throw;
      }
      finish(record, t0);
      log("stage " + record.name + " " + record.status +
          (record.detail.empty() ? "" : " (" + record.detail + ")"));
    }
    return manifest_;
  }

 private:
  void log(const std::string& line) const {
    if (options_.log) *options_.log << line << std::endl;
  }

  void finish(StageRecord& record, std::chrono::steady_clock::time_point t0) {
    record.wall_time =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    for (const std::string& f : record.files) {
      const std::string path = Join(dir_, f);
      if (fs::exists(path)) manifest_.digests[f] = sha256_file(path);
    }
    manifest_.stages.push_back(record);
    save_manifest(dir_, manifest_);
  }

  std::string path(const std::string& file) const { return Join(dir_, file); }

  void optimize(StageRecord& record) {
    TrajoptOptions o = config_.solver;
    o.solver.log = options_.log;
    const TrajectoryResult r = solve_trajectory(spec_.transcription, params_, o);
    Trajectory traj = r.trajectory;
    traj.metadata["scenario"] = spec_.name;
    save_trajectory(path("trajectory.txt"), traj);
    WriteJsonFile(path("solve.json"), SolveJson(r, params_.force_limits));
    record.files = {"trajectory.txt", "solve.json"};
    record.detail = nlp::to_string(r.report.status) + ", D = " + Short(traj.duration()) +
                    " s, violation " + Short(r.validation.max());
    if (!r.converged) {
      throw Error(ErrorCode::kNotConverged,
                  "trajectory optimization did not converge: " + record.detail);
    }
    record.status = "converged";
  }

  void validate(StageRecord& record) {
    const Trajectory traj = load_trajectory(path("trajectory.txt"));
    const ViolationReport v = validate_trajectory(traj, params_, &spec_.transcription);
    json families = json::object();
    for (const auto& [name, value] : v.families) families[name] = value;
    const double tol = config_.solver.solver.feasibility_tolerance;
    WriteJsonFile(path("validation.json"), {{"tolerance", tol},
                                            {"max_violation", v.max()},
                                            {"families", families},
                                            {"maneuver", ManeuverSummary(traj, spec_.transcription)}});
    record.files = {"validation.json"};
    record.detail = "max violation " + Short(v.max());
    if (v.max() > tol) {
      throw Error(ErrorCode::kNotConverged, "trajectory violates its constraints: " + record.detail);
    }
    record.status = "ok";
  }

  void gains(StageRecord& record) {
    const Trajectory traj = load_trajectory(path("trajectory.txt"));
    const GainSchedule g = synthesize_gains(VehicleModel(params_), traj, spec_.tvlqr);
    save_gain_schedule(path("gains.txt"), g);
    record.files = {"gains.txt"};
    const auto it = g.metadata.find("terminal");
    record.detail = "terminal " + (it == g.metadata.end() ? std::string("?") : it->second);
    record.status = "ok";
  }

  void open_loop(StageRecord& record) {
    const Trajectory traj = load_trajectory(path("trajectory.txt"));
    const SimLog nominal = rollout_open_loop(params_, traj, NominalConfig(spec_));
    save_sim_log(path("open_loop.txt"), nominal);
    record.files = {"open_loop.txt"};
    if (spec_.perturbation > 0.0) {
      const SimLog perturbed =
          rollout_open_loop(params_, traj, PerturbedConfig(spec_, options_.seed));
      save_sim_log(path("open_loop_perturbed.txt"), perturbed);
      record.files.push_back("open_loop_perturbed.txt");
    }
    record.status = "ok";
  }

  void closed_loop(StageRecord& record) {
    const Trajectory traj = load_trajectory(path("trajectory.txt"));
    const GainSchedule g = load_gain_schedule(path("gains.txt"));
    const SimLog nominal = rollout_closed_loop(params_, traj, g, NominalConfig(spec_));
    save_sim_log(path("closed_loop.txt"), nominal);
    record.files = {"closed_loop.txt"};

    auto pair = [&](const TrackingMetrics& open, const TrackingMetrics& closed) {
      return json{{"open_loop", metrics_json(open)},
                  {"closed_loop", metrics_json(closed)},
                  {"final_position_error_ratio",
                   open.final_position_error > 0.0
                       ? json(closed.final_position_error / open.final_position_error)
                       : json(nullptr)}};
    };
    json metrics;
    metrics["scenario"] = spec_.name;
    metrics["nominal"] =
        pair(tracking_metrics(load_sim_log(path("open_loop.txt"))), tracking_metrics(nominal));
    if (spec_.perturbation > 0.0) {
      const SimConfig c = PerturbedConfig(spec_, options_.seed);
      const SimLog perturbed = rollout_closed_loop(params_, traj, g, c);
      save_sim_log(path("closed_loop_perturbed.txt"), perturbed);
      record.files.push_back("closed_loop_perturbed.txt");
      metrics["perturbed"] = pair(tracking_metrics(load_sim_log(path("open_loop_perturbed.txt"))),
                                  tracking_metrics(perturbed));
      metrics["perturbed"]["fraction"] = c.random_perturbation;
      metrics["perturbed"]["seed"] = c.seed;
    }
    WriteJsonFile(path("metrics.json"), metrics);
    record.files.push_back("metrics.json");
    record.status = "ok";
  }

  const RunConfig& config_;
  ScenarioSpec spec_;
  VehicleParams params_;
  std::string dir_;
  RunManifest manifest_;
  const PipelineOptions& options_;
};

size_t StageIndex(const std::string& name) {
  const auto& stages = PipelineStages();
  const auto it = std::find(stages.begin(), stages.end(), name);
  if (it == stages.end()) throw Error(ErrorCode::kInvalidSpec, "unknown stage " + name);
  return static_cast<size_t>(it - stages.begin());
}

void WriteColumns(const std::string& path, const std::string& title,
                  const std::vector<std::string>& header,
                  const std::vector<std::vector<double>>& rows) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path);
  out << "# vtauv export " << title << "\n# rows " << rows.size() << '\n';
  for (size_t c = 0; c < header.size(); ++c) out << (c ? " " : "") << header[c];
  out << '\n';
  for (const auto& row : rows) {
    for (size_t c = 0; c < row.size(); ++c) {
      if (c) out << ' ';
      textio::WriteDouble(out, row[c]);
    }
    out << '\n';
  }
  if (!out) throw Error(ErrorCode::kIo, "write failed for " + path);
}

}  // namespace

// Digests -------------------------------------------------------------------

std::string sha256_hex(const std::string& bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw Error(ErrorCode::kIo, "SHA-256 failed");
  }
  static const char* kHex = "0123456789abcdef";
  std::string out;
  out.reserve(2 * len);
  for (unsigned int i = 0; i < len; ++i) {
    out += kHex[digest[i] >> 4];
    out += kHex[digest[i] & 15];
  }
  return out;
}

std::string sha256_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path);
  std::stringstream buffer;
  buffer << in.rdbuf();
  return sha256_hex(buffer.str());
}

// Manifest ------------------------------------------------------------------

const StageRecord* RunManifest::stage(const std::string& name) const {
  for (const StageRecord& s : stages) {
    if (s.name == name) return &s;
  }
  return nullptr;
}

json RunManifest::to_json() const {
  json j;
  j["schema_version"] = 1;
  j["tool_version"] = tool_version;
  j["scenario"] = scenario;
  j["config_digest"] = config_digest;
  j["stages"] = json::array();
  for (const StageRecord& s : stages) {
    j["stages"].push_back({{"name", s.name},
                           {"status", s.status},
                           {"wall_time_s", s.wall_time},
                           {"files", s.files},
                           {"detail", s.detail}});
  }
  j["digests"] = digests;
  return j;
}

RunManifest RunManifest::FromJson(const json& j) {
  try {
    RunManifest m;
    m.tool_version = j.at("tool_version").get<std::string>();
    m.scenario = j.at("scenario").get<std::string>();
    m.config_digest = j.at("config_digest").get<std::string>();
    for (const json& s : j.at("stages")) {
      StageRecord r;
      r.name = s.at("name").get<std::string>();
      r.status = s.at("status").get<std::string>();
      r.wall_time = s.at("wall_time_s").get<double>();
      r.files = s.at("files").get<std::vector<std::string>>();
      r.detail = s.at("detail").get<std::string>();
      m.stages.push_back(std::move(r));
    }
    m.digests = j.at("digests").get<std::map<std::string, std::string>>();
    return m;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kIo, std::string("malformed manifest: ") + e.what());
  }
}

RunManifest load_manifest(const std::string& run_dir) {
  const std::string path = Join(run_dir, kManifestFile);
  if (!fs::exists(path)) throw Error(ErrorCode::kMissingStage, "no manifest in " + run_dir);
  json j;
  try {
    j = read_json_file(path);
  } catch (const Error& e) {
    throw Error(ErrorCode::kIo, e.what());
  }
  return RunManifest::FromJson(j);
}

void save_manifest(const std::string& run_dir, const RunManifest& manifest) {
  WriteJsonFile(Join(run_dir, kManifestFile), manifest.to_json());
}

// Pipeline ------------------------------------------------------------------

RunManifest run_pipeline(const RunConfig& config, const std::string& scenario,
                         const std::string& out_dir, const PipelineOptions& options) {
  const size_t first = StageIndex(options.first_stage), last = StageIndex(options.last_stage);
  if (first > last) throw Error(ErrorCode::kInvalidSpec, "first stage comes after last stage");
  RequireWritable(out_dir);

  ScenarioSpec spec;
  try {
    spec = config.resolve(scenario);
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kUnknownScenario && first == 0) {
      RunManifest empty;
      empty.scenario = scenario;
      save_manifest(out_dir, empty);
    }
    throw;
  }
  if (options.seed) spec.sim.seed = *options.seed;

  RunManifest manifest;
  if (first > 0) {
    manifest = load_manifest(out_dir);
    if (manifest.scenario != scenario) {
      throw Error(ErrorCode::kMissingStage, "run directory holds scenario '" +
                                                manifest.scenario + "', not '" + scenario + "'");
    }
    // Keep the stages this run builds on, drop the ones it replaces.
    std::vector<StageRecord> kept;
    for (size_t i = 0; i < first; ++i) {
      const StageRecord* s = manifest.stage(PipelineStages()[i]);
      if (!s || !s->succeeded()) {
        throw Error(ErrorCode::kMissingStage,
                    "stage " + PipelineStages()[i] + " has not completed in " + out_dir);
      }
      for (const std::string& f : s->files) {
        const auto it = manifest.digests.find(f);
        if (it == manifest.digests.end() || sha256_file(Join(out_dir, f)) != it->second) {
          throw Error(ErrorCode::kDigestMismatch, f + " does not match the manifest");
        }
      }
      kept.push_back(*s);
    }
    std::map<std::string, std::string> digests;
    for (const StageRecord& s : kept) {
      for (const std::string& f : s.files) digests[f] = manifest.digests.at(f);
    }
    manifest.stages = std::move(kept);
    manifest.digests = std::move(digests);
  }
  manifest.tool_version = kToolVersion;
  manifest.scenario = scenario;
  const json resolved = {{"vehicle", vehicle_params_to_json(config.vehicle)},
                         {"solver", solver_options_to_json(config.solver)},
                         {"scenario", scenario_to_json(spec)}};
  manifest.config_digest = sha256_hex(resolved.dump());
  save_manifest(out_dir, manifest);

  Runner runner(config, std::move(spec), out_dir, std::move(manifest), options);
  return runner.run(first, last);
}

VerifyResult verify_run(const std::string& run_dir) {
  const RunManifest m = load_manifest(run_dir);
  VerifyResult r;
  for (const auto& [file, digest] : m.digests) {
    const std::string path = Join(run_dir, file);
    if (!fs::exists(path)) {
      r.missing.push_back(file);
    } else if (sha256_file(path) != digest) {
      r.mismatched.push_back(file);
    }
  }
  return r;
}

std::vector<std::string> export_plots(const std::string& run_dir, const std::string& dest_dir) {
  const RunManifest m = load_manifest(run_dir);
  const StageRecord* s = m.stage("closed_loop");
  if (!s || !s->succeeded()) {
    throw Error(ErrorCode::kMissingStage, "closed-loop stage has not completed in " + run_dir);
  }
  const std::string log_path = Join(run_dir, "closed_loop.txt");
  if (!fs::exists(log_path)) throw Error(ErrorCode::kMissingStage, "missing " + log_path);
  const SimLog log = load_sim_log(log_path);
  RequireWritable(dest_dir);

  std::vector<std::vector<double>> pos, ori, ang, force;
  for (size_t i = 0; i < log.size(); ++i) {
    const FullState x = FullState::FromVector(log.states[i]);
    const FullState r = FullState::FromVector(log.reference_states[i]);
    const double t = log.times[i];
    const Eigen::Vector3d p = x.position(), pr = r.position();
    pos.push_back({t, p[0], p[1], p[2], pr[0], pr[1], pr[2]});
    const Eigen::Vector3d e = yaw_pitch_roll(x.quaternion().normalized()) * kRadToDeg;
    const Eigen::Vector3d er = yaw_pitch_roll(r.quaternion().normalized()) * kRadToDeg;
    ori.push_back({t, e[0], e[1], e[2], er[0], er[1], er[2]});
    ang.push_back({t, x.psi() * kRadToDeg, x.phi() * kRadToDeg, r.psi() * kRadToDeg,
                   r.phi() * kRadToDeg});
    force.push_back({t, log.inputs[i][0], log.reference_inputs[i][0]});
  }
  std::vector<std::string> written;
  auto emit = [&](const std::string& name, const std::string& title,
                  const std::vector<std::string>& header,
                  const std::vector<std::vector<double>>& rows) {
    const std::string path = Join(dest_dir, name);
    WriteColumns(path, title, header, rows);
    written.push_back(path);
  };
  emit("position.txt", "position [m]", {"time", "x", "y", "z", "x_ref", "y_ref", "z_ref"}, pos);
  emit("orientation.txt", "orientation, intrinsic Z-Y-X [deg]",
       {"time", "yaw", "pitch", "roll", "yaw_ref", "pitch_ref", "roll_ref"}, ori);
  emit("thruster_angles.txt", "thruster angles [deg]",
       {"time", "psi", "phi", "psi_ref", "phi_ref"}, ang);
  emit("force.txt", "thruster force [N]", {"time", "force", "force_ref"}, force);
  return written;
}

}  // namespace vtauv

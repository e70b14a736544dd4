#pragma once

// Stage orchestration for one scenario: optimize → validate → gains →
// open-loop and closed-loop rollouts. Every stage reads its inputs back from
// the run directory and records its outputs in manifest.json with SHA-256
// digests. Output files carry no timing information, so identical inputs
// give identical digests; wall times live in the manifest only.

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "vtauv/scenario.hpp"

namespace vtauv {

inline constexpr const char* kToolVersion = "1.0.0";

/// Stage names in execution order.
inline const std::vector<std::string>& PipelineStages() {
  static const std::vector<std::string> stages{"optimize", "validate", "gains", "open_loop",
                                               "closed_loop"};
  return stages;
}

std::string sha256_hex(const std::string& bytes);
/// Throws Error(kIo).
std::string sha256_file(const std::string& path);

struct StageRecord {
  std::string name;
  std::string status;  // "ok", "converged" or "failed"
  double wall_time = 0.0;  // [s]
  std::vector<std::string> files;  // relative to the run directory
  std::string detail;

  bool succeeded() const { return status == "ok" || status == "converged"; }
};

struct RunManifest {
  std::string tool_version = kToolVersion;
  std::string scenario;
  std::string config_digest;
  std::vector<StageRecord> stages;
  std::map<std::string, std::string> digests;  // file → SHA-256

  const StageRecord* stage(const std::string& name) const;
  nlohmann::json to_json() const;
  /// Throws Error(kIo) on a malformed manifest.
  static RunManifest FromJson(const nlohmann::json& j);
};

inline constexpr const char* kManifestFile = "manifest.json";

RunManifest load_manifest(const std::string& run_dir);
void save_manifest(const std::string& run_dir, const RunManifest& manifest);

struct PipelineOptions {
  std::string first_stage = "optimize";
  std::string last_stage = "closed_loop";
  std::optional<std::uint64_t> seed;  // replaces the scenario's sim seed
  std::ostream* log = nullptr;        // progress and solver iterations
};

/// Runs stages first_stage … last_stage of `scenario` in `out_dir`, which is
/// created if needed and must be writable (checked before any compute).
/// Stages that start after "optimize" take their inputs from the existing
/// manifest. A failing stage is recorded, the manifest written, and the
/// error rethrown: Error(kNotConverged) for a non-converged solve or a
/// violated validation, otherwise the stage's own error. An unknown
/// scenario leaves an empty manifest.
RunManifest run_pipeline(const RunConfig& config, const std::string& scenario,
                         const std::string& out_dir, const PipelineOptions& options = {});

struct VerifyResult {
  std::vector<std::string> mismatched;  // digest differs
  std::vector<std::string> missing;     // listed but absent
  bool ok() const { return mismatched.empty() && missing.empty(); }
};

/// Recomputes every digest listed in the manifest of `run_dir`.
VerifyResult verify_run(const std::string& run_dir);

/// Writes position.txt, orientation.txt, thruster_angles.txt and force.txt
/// to `dest_dir` from the closed-loop log, each with the reference alongside
/// and a shared time column. Orientation is intrinsic Z-Y-X (yaw, pitch,
/// roll) in degrees. Throws Error(kMissingStage) unless the closed-loop
/// stage succeeded. Returns the written paths.
std::vector<std::string> export_plots(const std::string& run_dir, const std::string& dest_dir);

}  // namespace vtauv

#pragma once

// JSON ingestion of vehicle parameters.
//
// Schema (schema_version 1, SI units, matrices as arrays of rows):
//   rigid_mass_matrix, added_mass_matrix, linear_damping   8×8
//   quadratic_damping                                      8
//   center_of_gravity, center_of_buoyancy, thruster_offset 3
//   weight_force                                           scalar [N]
//   force_limits, psi_limits, phi_limits,
//   psi_rate_limits, phi_rate_limits                       [min, max]
//   linkage { hull_anchors, housing_anchors (2×3), stroke [min, max] }
//   wrench_map { force, tau_psi, tau_phi }                 slot indices
//   quaternion_stabilization                               scalar [1/s]
// Keys absent from a file keep the value of the base parameter set.

#include <json.hpp>

#include <string>

#include "vtauv/vehicle.hpp"

namespace vtauv {

inline constexpr int kConfigSchemaVersion = 1;

nlohmann::json vehicle_params_to_json(const VehicleParams& params);

/// Applies the keys of `j` on top of `base`. Throws Error(kConfig) on unknown
/// keys or malformed values and Error(kInvalidSpec) if the result is invalid.
VehicleParams vehicle_params_from_json(const nlohmann::json& j,
                                       const VehicleParams& base = DefaultVehicleParams());

/// Reads a whole file as JSON. Throws Error(kIo) or Error(kConfig).
nlohmann::json read_json_file(const std::string& path);

/// File with a mandatory top-level schema_version; the parameters sit either
/// at the top level or under "vehicle".
VehicleParams load_vehicle_params(const std::string& path);
void save_vehicle_params(const std::string& path, const VehicleParams& params);

namespace config_detail {
/// Throws Error(kConfig) unless j["schema_version"] matches.
void require_schema_version(const nlohmann::json& j);
double get_double(const nlohmann::json& j, const std::string& what);
int get_int(const nlohmann::json& j, const std::string& what);
Interval get_interval(const nlohmann::json& j, const std::string& what);
nlohmann::json interval_json(const Interval& i);
Eigen::MatrixXd get_dynamic_matrix(const nlohmann::json& j, int rows, int cols,
                                   const std::string& what);
template <int N>
Eigen::Matrix<double, N, 1> get_vector(const nlohmann::json& j, const std::string& what) {
  return get_dynamic_matrix(j, N, 1, what);
}
template <int R, int C>
Eigen::Matrix<double, R, C> get_matrix(const nlohmann::json& j, const std::string& what) {
  return get_dynamic_matrix(j, R, C, what);
}
template <typename Derived>
nlohmann::json vector_json(const Eigen::MatrixBase<Derived>& v) {
  nlohmann::json out = nlohmann::json::array();
  for (int i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}
template <typename Derived>
nlohmann::json matrix_json(const Eigen::MatrixBase<Derived>& m) {
  nlohmann::json out = nlohmann::json::array();
  for (int r = 0; r < m.rows(); ++r) out.push_back(vector_json(m.row(r).transpose()));
  return out;
}
}  // namespace config_detail

}  // namespace vtauv

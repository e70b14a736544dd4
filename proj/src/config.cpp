#include "vtauv/config.hpp"

#include <fstream>
#include <sstream>

#include "vtauv/errors.hpp"

namespace vtauv {

using nlohmann::json;

namespace config_detail {

namespace {
[[noreturn]] void Bad(const std::string& what, const std::string& detail) {
  throw Error(ErrorCode::kConfig, what + ": " + detail);
}
}  // namespace

void require_schema_version(const json& j) {
  if (!j.is_object() || !j.contains("schema_version")) {
    Bad("config", "missing schema_version");
  }
  const json& v = j.at("schema_version");
  if (!v.is_number_integer() || v.get<int>() != kConfigSchemaVersion) {
    Bad("config", "unsupported schema_version " + v.dump() + " (expected " +
                      std::to_string(kConfigSchemaVersion) + ")");
  }
}

double get_double(const json& j, const std::string& what) {
  if (!j.is_number()) Bad(what, "expected a number, got " + j.dump());
  return j.get<double>();
}

int get_int(const json& j, const std::string& what) {
  if (!j.is_number_integer()) Bad(what, "expected an integer, got " + j.dump());
  return j.get<int>();
}

Interval get_interval(const json& j, const std::string& what) {
  if (!j.is_array() || j.size() != 2) Bad(what, "expected [min, max]");
  return {get_double(j[0], what), get_double(j[1], what)};
}

json interval_json(const Interval& i) { return json::array({i.min, i.max}); }

Eigen::MatrixXd get_dynamic_matrix(const json& j, int rows, int cols, const std::string& what) {
  Eigen::MatrixXd out(rows, cols);
  if (cols == 1) {
    if (!j.is_array() || static_cast<int>(j.size()) != rows) {
      Bad(what, "expected an array of " + std::to_string(rows) + " numbers");
    }
    for (int i = 0; i < rows; ++i) out(i, 0) = get_double(j[i], what);
    return out;
  }
  if (!j.is_array() || static_cast<int>(j.size()) != rows) {
    Bad(what, "expected " + std::to_string(rows) + " rows");
  }
  for (int r = 0; r < rows; ++r) {
    if (!j[r].is_array() || static_cast<int>(j[r].size()) != cols) {
      Bad(what, "row " + std::to_string(r) + " must have " + std::to_string(cols) + " entries");
    }
    for (int c = 0; c < cols; ++c) out(r, c) = get_double(j[r][c], what);
  }
  return out;
}

}  // namespace config_detail

using namespace config_detail;

json vehicle_params_to_json(const VehicleParams& p) {
  json j;
  j["rigid_mass_matrix"] = matrix_json(p.rigid_mass_matrix);
  j["added_mass_matrix"] = matrix_json(p.added_mass_matrix);
  j["linear_damping"] = matrix_json(p.linear_damping);
  j["quadratic_damping"] = vector_json(p.quadratic_damping);
  j["center_of_gravity"] = vector_json(p.center_of_gravity);
  j["center_of_buoyancy"] = vector_json(p.center_of_buoyancy);
  j["weight_force"] = p.weight_force;
  j["thruster_offset"] = vector_json(p.thruster_offset);
  j["force_limits"] = interval_json(p.force_limits);
  j["psi_limits"] = interval_json(p.psi_limits);
  j["phi_limits"] = interval_json(p.phi_limits);
  j["psi_rate_limits"] = interval_json(p.psi_rate_limits);
  j["phi_rate_limits"] = interval_json(p.phi_rate_limits);
  json linkage;
  linkage["hull_anchors"] = json::array(
      {vector_json(p.linkage.hull_anchor[0]), vector_json(p.linkage.hull_anchor[1])});
  linkage["housing_anchors"] = json::array(
      {vector_json(p.linkage.housing_anchor[0]), vector_json(p.linkage.housing_anchor[1])});
  linkage["stroke"] = interval_json(p.linkage.stroke);
  j["linkage"] = linkage;
  j["wrench_map"] = {{"force", p.wrench_map.force},
                     {"tau_psi", p.wrench_map.tau_psi},
                     {"tau_phi", p.wrench_map.tau_phi}};
  j["quaternion_stabilization"] = p.quaternion_stabilization;
  return j;
}

VehicleParams vehicle_params_from_json(const json& j, const VehicleParams& base) {
  if (!j.is_object()) throw Error(ErrorCode::kConfig, "vehicle: expected an object");
  VehicleParams p = base;
  for (const auto& [key, value] : j.items()) {
    const std::string what = "vehicle." + key;
    if (key == "schema_version" || key == "description") {
      continue;
    } else if (key == "rigid_mass_matrix") {
      p.rigid_mass_matrix = get_matrix<8, 8>(value, what);
    } else if (key == "added_mass_matrix") {
      p.added_mass_matrix = get_matrix<8, 8>(value, what);
    } else if (key == "linear_damping") {
      p.linear_damping = get_matrix<8, 8>(value, what);
    } else if (key == "quadratic_damping") {
      p.quadratic_damping = get_vector<8>(value, what);
    } else if (key == "center_of_gravity") {
      p.center_of_gravity = get_vector<3>(value, what);
    } else if (key == "center_of_buoyancy") {
      p.center_of_buoyancy = get_vector<3>(value, what);
    } else if (key == "weight_force") {
      p.weight_force = get_double(value, what);
    } else if (key == "thruster_offset") {
      p.thruster_offset = get_vector<3>(value, what);
    } else if (key == "force_limits") {
      p.force_limits = get_interval(value, what);
    } else if (key == "psi_limits") {
      p.psi_limits = get_interval(value, what);
    } else if (key == "phi_limits") {
      p.phi_limits = get_interval(value, what);
    } else if (key == "psi_rate_limits") {
      p.psi_rate_limits = get_interval(value, what);
    } else if (key == "phi_rate_limits") {
      p.phi_rate_limits = get_interval(value, what);
    } else if (key == "quaternion_stabilization") {
      p.quaternion_stabilization = get_double(value, what);
    } else if (key == "linkage") {
      if (!value.is_object()) throw Error(ErrorCode::kConfig, what + ": expected an object");
      for (const auto& [lk, lv] : value.items()) {
        const std::string lwhat = what + "." + lk;
        if (lk == "hull_anchors" || lk == "housing_anchors") {
          const Eigen::Matrix<double, 2, 3> m = get_matrix<2, 3>(lv, lwhat);
          auto& anchors = lk == "hull_anchors" ? p.linkage.hull_anchor : p.linkage.housing_anchor;
          anchors[0] = m.row(0).transpose();
          anchors[1] = m.row(1).transpose();
        } else if (lk == "stroke") {
          p.linkage.stroke = get_interval(lv, lwhat);
        } else {
          throw Error(ErrorCode::kConfig, "unknown key " + lwhat);
        }
      }
    } else if (key == "wrench_map") {
      if (!value.is_object()) throw Error(ErrorCode::kConfig, what + ": expected an object");
      for (const auto& [wk, wv] : value.items()) {
        const std::string wwhat = what + "." + wk;
        if (wk == "force") {
          p.wrench_map.force = get_int(wv, wwhat);
        } else if (wk == "tau_psi") {
          p.wrench_map.tau_psi = get_int(wv, wwhat);
        } else if (wk == "tau_phi") {
          p.wrench_map.tau_phi = get_int(wv, wwhat);
        } else {
          throw Error(ErrorCode::kConfig, "unknown key " + wwhat);
        }
      }
    } else {
      throw Error(ErrorCode::kConfig, "unknown key " + what);
    }
  }
  p.validate();
  return p;
}

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path);
  std::stringstream buffer;
  buffer << in.rdbuf();
  try {
    return json::parse(buffer.str());
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::kConfig, path + ": " + e.what());
  }
}

VehicleParams load_vehicle_params(const std::string& path) {
  const json j = read_json_file(path);
  require_schema_version(j);
  if (j.contains("vehicle")) return vehicle_params_from_json(j.at("vehicle"));
  return vehicle_params_from_json(j);
}

void save_vehicle_params(const std::string& path, const VehicleParams& params) {
  json j;
  j["schema_version"] = kConfigSchemaVersion;
  j["vehicle"] = vehicle_params_to_json(params);
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path);
  out << j.dump(2) << "\n";
  if (!out) throw Error(ErrorCode::kIo, "write failed for " + path);
}

}  // namespace vtauv

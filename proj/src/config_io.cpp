#include "apid/config_io.hpp"

#include <fstream>
#include <sstream>

#include "apid/errors.hpp"

namespace apid::io {
namespace {

std::string join(const std::string& path, const std::string& key) {
  return path.empty() ? key : path + "." + key;
}

std::string index(const std::string& path, std::size_t i) { return path + "[" + std::to_string(i) + "]"; }

const json& require(const json& j, const std::string& path, const std::string& key) {
  if (!j.is_object()) throw ConfigError(path, "expected an object");
  const auto it = j.find(key);
  if (it == j.end()) throw ConfigError(join(path, key), "missing required key");
  return *it;
}

double as_number(const json& j, const std::string& path) {
  if (!j.is_number()) throw ConfigError(path, "expected a number");
  return j.get<double>();
}

double number(const json& j, const std::string& path, const std::string& key) {
  return as_number(require(j, path, key), join(path, key));
}

double number_or(const json& j, const std::string& path, const std::string& key, double fallback) {
  if (!j.is_object()) throw ConfigError(path, "expected an object");
  const auto it = j.find(key);
  return it == j.end() ? fallback : as_number(*it, join(path, key));
}

std::vector<double> numbers(const json& j, const std::string& path) {
  if (!j.is_array()) throw ConfigError(path, "expected an array of numbers");
  std::vector<double> out;
  out.reserve(j.size());
  for (std::size_t i = 0; i < j.size(); ++i) out.push_back(as_number(j[i], index(path, i)));
  return out;
}

// Scalar broadcast to n entries, or an array of exactly n.
std::vector<double> per_joint(const json& j, const std::string& path, const std::string& key,
                              std::size_t n, double fallback) {
  const auto it = j.find(key);
  if (it == j.end()) return std::vector<double>(n, fallback);
  if (it->is_number()) return std::vector<double>(n, it->get<double>());
  std::vector<double> v = numbers(*it, join(path, key));
  if (v.size() != n) {
    throw ConfigError(join(path, key), "expected " + std::to_string(n) + " entries, got " + std::to_string(v.size()));
  }
  return v;
}

Eigen::Vector2d vec2(const json& j, const std::string& path) {
  const std::vector<double> v = numbers(j, path);
  if (v.size() != 2) throw ConfigError(path, "expected 2 entries");
  return {v[0], v[1]};
}

dynamics::Vec vec_n(const json& j, const std::string& path, std::size_t n) {
  const std::vector<double> v = numbers(j, path);
  if (v.size() != n) throw ConfigError(path, "expected " + std::to_string(n) + " entries, got " + std::to_string(v.size()));
  return Eigen::Map<const dynamics::Vec>(v.data(), static_cast<Eigen::Index>(n));
}

template <typename F>
auto checked(const std::string& path, F&& f) {
  try {
    return f();
  } catch (const ConfigError&) {
    throw;
  } catch (const std::invalid_argument& e) {
    throw ConfigError(path, e.what());
  }
}

json to_array(const dynamics::Vec& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

}  // namespace

json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("", "cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("", path.string() + ": malformed JSON: " + e.what());
  }
}

void write_json_file(const std::filesystem::path& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

// ---------------------------------------------------------------------------

dynamics::ArmModel arm_from_json(const json& j, const std::string& path) {
  if (!j.is_object()) throw ConfigError(path, "expected an object");
  dynamics::ArmModel arm;
  arm.link_lengths = numbers(require(j, path, "link_lengths"), join(path, "link_lengths"));
  const std::size_t n = arm.link_lengths.size();
  if (n == 0) throw ConfigError(join(path, "link_lengths"), "needs at least one link");
  arm.link_masses = per_joint(j, path, "link_masses", n, 0.0);
  if (!j.contains("link_masses")) throw ConfigError(join(path, "link_masses"), "missing required key");
  arm.payload_mass = number_or(j, path, "payload_mass", 0.0);
  arm.joint_viscous_friction = per_joint(j, path, "joint_viscous_friction", n, 0.5);
  arm.joint_stiffness = per_joint(j, path, "joint_stiffness", n, 100.0);
  arm.gravity = number_or(j, path, "gravity", 9.81);
  arm.torque_limit = number_or(j, path, "torque_limit", 150.0);
  checked(path, [&] { arm.validate(); return 0; });
  return arm;
}

json arm_to_json(const dynamics::ArmModel& arm) {
  return json{{"link_lengths", arm.link_lengths},
              {"link_masses", arm.link_masses},
              {"payload_mass", arm.payload_mass},
              {"joint_viscous_friction", arm.joint_viscous_friction},
              {"joint_stiffness", arm.joint_stiffness},
              {"gravity", arm.gravity},
              {"torque_limit", arm.torque_limit}};
}

dynamics::BaseMotionProfile base_from_json(const json& j, const std::string& path) {
  if (!j.is_object()) throw ConfigError(path, "expected an object");
  dynamics::BaseMotionProfile b;
  if (j.contains("initial_velocity")) b.initial_velocity = vec2(j["initial_velocity"], join(path, "initial_velocity"));
  b.initial_yaw_rate = number_or(j, path, "initial_yaw_rate", 0.0);
  const std::string seg_path = join(path, "segments");
  const json& segs = require(j, path, "segments");
  if (!segs.is_array()) throw ConfigError(seg_path, "expected an array");
  for (std::size_t i = 0; i < segs.size(); ++i) {
    const std::string p = index(seg_path, i);
    dynamics::BaseMotionProfile::Segment s;
    s.duration = number(segs[i], p, "duration");
    if (!(s.duration > 0.0)) throw ConfigError(join(p, "duration"), "must be > 0");
    if (segs[i].contains("linear_accel")) s.linear_accel = vec2(segs[i]["linear_accel"], join(p, "linear_accel"));
    s.yaw_accel = number_or(segs[i], p, "yaw_accel", 0.0);
    b.segments.push_back(s);
  }
  checked(path, [&] { b.validate(); return 0; });
  return b;
}

json base_to_json(const dynamics::BaseMotionProfile& base) {
  json segs = json::array();
  for (const auto& s : base.segments) {
    segs.push_back({{"duration", s.duration},
                    {"linear_accel", {s.linear_accel.x(), s.linear_accel.y()}},
                    {"yaw_accel", s.yaw_accel}});
  }
  return json{{"initial_velocity", {base.initial_velocity.x(), base.initial_velocity.y()}},
              {"initial_yaw_rate", base.initial_yaw_rate},
              {"segments", segs}};
}

harness::Scenario scenario_from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("", "scenario must be a JSON object");
  harness::Scenario s;
  s.arm = arm_from_json(require(j, "", "arm"), "arm");
  const std::size_t n = s.arm.n_links();
  s.duration = number_or(j, "", "duration", 25.0);
  if (!(s.duration > 0.0)) throw ConfigError("duration", "must be > 0");
  s.dt = number_or(j, "", "dt", 1e-3);
  if (!(s.dt > 0.0)) throw ConfigError("dt", "must be > 0");
  s.base = j.contains("base") ? base_from_json(j["base"], "base")
                              : dynamics::BaseMotionProfile::at_rest(s.duration);

  s.initial_state.q = dynamics::Vec::Zero(static_cast<Eigen::Index>(n));
  s.initial_state.qdot = dynamics::Vec::Zero(static_cast<Eigen::Index>(n));
  if (j.contains("initial_state")) {
    const json& is = j["initial_state"];
    if (!is.is_object()) throw ConfigError("initial_state", "expected an object");
    if (is.contains("q")) s.initial_state.q = vec_n(is["q"], "initial_state.q", n);
    if (is.contains("qdot")) s.initial_state.qdot = vec_n(is["qdot"], "initial_state.qdot", n);
  }

  s.joint_references.assign(n, {});
  if (j.contains("references")) {
    const json& refs = j["references"];
    if (!refs.is_array() || refs.size() != n) {
      throw ConfigError("references", "expected one schedule per joint (" + std::to_string(n) + ")");
    }
    for (std::size_t k = 0; k < n; ++k) {
      const std::string p = index("references", k);
      if (!refs[k].is_array()) throw ConfigError(p, "expected an array of {time, value}");
      for (std::size_t i = 0; i < refs[k].size(); ++i) {
        const std::string sp = index(p, i);
        s.joint_references[k].push_back({number(refs[k][i], sp, "time"), number(refs[k][i], sp, "value")});
      }
    }
  }
  checked("scenario", [&] { s.validate(); return 0; });
  return s;
}

json scenario_to_json(const harness::Scenario& s) {
  json refs = json::array();
  for (const auto& sched : s.joint_references) {
    json a = json::array();
    for (const auto& sp : sched) a.push_back({{"time", sp.time}, {"value", sp.value}});
    refs.push_back(a);
  }
  return json{{"arm", arm_to_json(s.arm)},
              {"base", base_to_json(s.base)},
              {"references", refs},
              {"duration", s.duration},
              {"dt", s.dt},
              {"initial_state", {{"q", to_array(s.initial_state.q)}, {"qdot", to_array(s.initial_state.qdot)}}}};
}

harness::Scenario load_scenario(const std::filesystem::path& path) {
  return scenario_from_json(read_json_file(path));
}

// ---------------------------------------------------------------------------

control::PidGains pid_from_json(const json& j, const std::string& path) {
  control::PidGains g{number(j, path, "kp"), number(j, path, "ki"), number(j, path, "kd")};
  checked(path, [&] { g.validate(); return 0; });
  return g;
}

control::NonlinearPidParams adaptive_from_json(const json& j, const std::string& path) {
  control::NonlinearPidParams p;
  p.kp_min = number(j, path, "kp_min");
  p.kp_max = number(j, path, "kp_max");
  p.tau_p = number(j, path, "tau_p");
  p.kd_max = number(j, path, "kd_max");
  p.tau_d = number(j, path, "tau_d");
  p.ki = number(j, path, "ki");
  checked(path, [&] { p.validate(); return 0; });
  return p;
}

json controller_to_json(const harness::JointController& c) {
  return std::visit(
      [](const auto& g) -> json {
        using G = std::decay_t<decltype(g)>;
        if constexpr (std::is_same_v<G, control::PidGains>) {
          return {{"type", "pid"}, {"kp", g.kp}, {"ki", g.ki}, {"kd", g.kd}};
        } else {
          return {{"type", "adaptive"}, {"kp_min", g.kp_min}, {"kp_max", g.kp_max}, {"tau_p", g.tau_p},
                  {"kd_max", g.kd_max},   {"tau_d", g.tau_d},   {"ki", g.ki}};
        }
      },
      c);
}

harness::ControllerAssignment controllers_from_json(const json& j, std::size_t n_joints) {
  const json& joints = require(j, "", "joints");
  if (!joints.is_array() || joints.size() != n_joints) {
    throw ConfigError("joints", "expected one controller per joint (" + std::to_string(n_joints) + ")");
  }
  harness::ControllerAssignment a;
  for (std::size_t i = 0; i < joints.size(); ++i) {
    const std::string p = index("joints", i);
    const json& t = require(joints[i], p, "type");
    if (!t.is_string()) throw ConfigError(join(p, "type"), "expected \"pid\" or \"adaptive\"");
    const std::string type = t.get<std::string>();
    if (type == "pid") {
      a.emplace_back(pid_from_json(joints[i], p));
    } else if (type == "adaptive") {
      a.emplace_back(adaptive_from_json(joints[i], p));
    } else {
      throw ConfigError(join(p, "type"), "unknown controller type '" + type + "'");
    }
  }
  return a;
}

json controllers_to_json(const harness::ControllerAssignment& a) {
  json joints = json::array();
  for (const auto& c : a) joints.push_back(controller_to_json(c));
  return json{{"joints", joints}};
}

harness::ControllerAssignment load_controllers(const std::filesystem::path& path, std::size_t n_joints) {
  return controllers_from_json(read_json_file(path), n_joints);
}

}  // namespace apid::io

#pragma once
// JSON schemas for scenarios and controller sets.
//
// Scenario:
//   {
//     "arm": {"link_lengths": [..], "link_masses": [..], "payload_mass": 3.5,
//             "joint_viscous_friction": [..] | scalar, "joint_stiffness": [..] | scalar,
//             "gravity": 0.0, "torque_limit": 150.0},
//     "base": {"initial_velocity": [vx, vy], "initial_yaw_rate": 0.0,
//              "segments": [{"duration": 1.0, "linear_accel": [ax, ay], "yaw_accel": 0.0}, ..]},
//     "references": [[{"time": 2.0, "value": 0.8}, ..], ..],   one schedule per joint
//     "duration": 25.0, "dt": 0.001,
//     "initial_state": {"q": [..], "qdot": [..]}
//   }
//
// Controllers:
//   {"joints": [{"type": "pid", "kp": .., "ki": .., "kd": ..},
//               {"type": "adaptive", "kp_min": .., "kp_max": .., "tau_p": ..,
//                "kd_max": .., "tau_d": .., "ki": ..}]}
//
// Every parse failure is reported as ConfigError naming the JSON path.

#include <filesystem>
#include <string>

#include <json.hpp>

#include "apid/harness.hpp"

namespace apid::io {

using nlohmann::json;

json read_json_file(const std::filesystem::path& path);
void write_json_file(const std::filesystem::path& path, const json& j);

dynamics::ArmModel arm_from_json(const json& j, const std::string& path = "arm");
json arm_to_json(const dynamics::ArmModel& arm);

dynamics::BaseMotionProfile base_from_json(const json& j, const std::string& path = "base");
json base_to_json(const dynamics::BaseMotionProfile& base);

harness::Scenario scenario_from_json(const json& j);
json scenario_to_json(const harness::Scenario& s);
harness::Scenario load_scenario(const std::filesystem::path& path);

control::PidGains pid_from_json(const json& j, const std::string& path);
control::NonlinearPidParams adaptive_from_json(const json& j, const std::string& path);
json controller_to_json(const harness::JointController& c);

harness::ControllerAssignment controllers_from_json(const json& j, std::size_t n_joints);
json controllers_to_json(const harness::ControllerAssignment& a);
harness::ControllerAssignment load_controllers(const std::filesystem::path& path, std::size_t n_joints);

}  // namespace apid::io

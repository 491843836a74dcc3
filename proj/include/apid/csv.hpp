#pragma once
// CSV writers. Every file has a header row; floats use "%.9g".

#include <filesystem>
#include <ostream>
#include <string>
#include <vector>

#include "apid/bayesopt.hpp"
#include "apid/dynamics.hpp"
#include "apid/gp.hpp"
#include "apid/harness.hpp"

namespace apid::io {

std::string format_double(double x);

/// t,joint,theta,theta_ref,u,kp,kd with 1-based joints, one row per step and joint.
void write_rollout_csv(std::ostream& out, const harness::RolloutTrace& trace);

/// iteration,<dimension names>,cost,best_so_far
void write_bo_trace_csv(std::ostream& out, const bayesopt::BoTrace& trace, const bayesopt::SearchBox& box);

/// q1..qn,singular,axis_major,axis_minor,dir_major_x,dir_major_y,dir_minor_x,dir_minor_y
void write_compliance_csv(std::ostream& out, const std::vector<dynamics::Vec>& configurations,
                          const std::vector<dynamics::ComplianceSample>& samples);

/// sample,x1..xd,y for the data a GP was trained on.
void write_gp_training_csv(std::ostream& out, const gp::GpModel& model);

void write_rollout_csv(const std::filesystem::path& path, const harness::RolloutTrace& trace);
void write_bo_trace_csv(const std::filesystem::path& path, const bayesopt::BoTrace& trace,
                        const bayesopt::SearchBox& box);
void write_compliance_csv(const std::filesystem::path& path, const std::vector<dynamics::Vec>& configurations,
                          const std::vector<dynamics::ComplianceSample>& samples);

}  // namespace apid::io

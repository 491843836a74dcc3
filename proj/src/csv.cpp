#include "apid/csv.hpp"

#include <cstdio>
#include <fstream>
#include <stdexcept>

#include "apid/errors.hpp"

namespace apid::io {
namespace {

std::ofstream open(const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  return out;
}

}  // namespace

std::string format_double(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", x);
  return buf;
}

void write_rollout_csv(std::ostream& out, const harness::RolloutTrace& tr) {
  out << "t,joint,theta,theta_ref,u,kp,kd\n";
  for (std::size_t k = 0; k < tr.n_steps; ++k) {
    for (std::size_t j = 0; j < tr.n_joints; ++j) {
      const std::size_t i = tr.index(k, j);
      out << format_double(tr.t[k]) << ',' << j + 1 << ',' << format_double(tr.theta[i]) << ','
          << format_double(tr.theta_ref[i]) << ',' << format_double(tr.u[i]) << ',' << format_double(tr.kp[i])
          << ',' << format_double(tr.kd[i]) << '\n';
    }
  }
}

void write_bo_trace_csv(std::ostream& out, const bayesopt::BoTrace& trace, const bayesopt::SearchBox& box) {
  out << "iteration";
  for (const auto& d : box.dims) out << ',' << d.name;
  out << ",cost,best_so_far\n";
  for (const auto& r : trace.records) {
    if (static_cast<std::size_t>(r.parameters.size()) != box.dim()) {
      throw DimensionMismatch("write_bo_trace_csv", box.dim(), static_cast<std::size_t>(r.parameters.size()));
    }
    out << r.iteration;
    for (Eigen::Index i = 0; i < r.parameters.size(); ++i) out << ',' << format_double(r.parameters[i]);
    out << ',' << format_double(r.cost) << ',' << format_double(r.best_so_far) << '\n';
  }
}

void write_compliance_csv(std::ostream& out, const std::vector<dynamics::Vec>& configurations,
                          const std::vector<dynamics::ComplianceSample>& samples) {
  if (configurations.size() != samples.size()) {
    throw DimensionMismatch("write_compliance_csv", configurations.size(), samples.size());
  }
  const std::size_t n = configurations.empty() ? 0 : static_cast<std::size_t>(configurations[0].size());
  for (std::size_t i = 0; i < n; ++i) out << 'q' << i + 1 << ',';
  out << "singular,axis_major,axis_minor,dir_major_x,dir_major_y,dir_minor_x,dir_minor_y\n";
  for (std::size_t s = 0; s < samples.size(); ++s) {
    for (Eigen::Index i = 0; i < configurations[s].size(); ++i) out << format_double(configurations[s][i]) << ',';
    const auto& e = samples[s].ellipsoid;
    if (samples[s].singular) {
      out << "1,nan,nan,nan,nan,nan,nan\n";
      continue;
    }
    out << "0," << format_double(e.semi_axes[0]) << ',' << format_double(e.semi_axes[1]) << ','
        << format_double(e.directions(0, 0)) << ',' << format_double(e.directions(1, 0)) << ','
        << format_double(e.directions(0, 1)) << ',' << format_double(e.directions(1, 1)) << '\n';
  }
}

void write_gp_training_csv(std::ostream& out, const gp::GpModel& model) {
  out << "sample";
  for (std::size_t i = 0; i < model.dim(); ++i) out << ",x" << i + 1;
  out << ",y\n";
  for (std::size_t s = 0; s < model.size(); ++s) {
    out << s + 1;
    for (Eigen::Index i = 0; i < model.inputs()[s].size(); ++i) out << ',' << format_double(model.inputs()[s][i]);
    out << ',' << format_double(model.targets()[s]) << '\n';
  }
}

void write_rollout_csv(const std::filesystem::path& path, const harness::RolloutTrace& trace) {
  auto out = open(path);
  write_rollout_csv(out, trace);
}

void write_bo_trace_csv(const std::filesystem::path& path, const bayesopt::BoTrace& trace,
                        const bayesopt::SearchBox& box) {
  auto out = open(path);
  write_bo_trace_csv(out, trace, box);
}

void write_compliance_csv(const std::filesystem::path& path, const std::vector<dynamics::Vec>& configurations,
                          const std::vector<dynamics::ComplianceSample>& samples) {
  auto out = open(path);
  write_compliance_csv(out, configurations, samples);
}

}  // namespace apid::io

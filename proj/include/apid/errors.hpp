#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace apid {

/// Vector/matrix argument has the wrong size for the model it is used with.
class DimensionMismatch : public std::invalid_argument {
 public:
  DimensionMismatch(const std::string& what, std::size_t expected, std::size_t got)
      : std::invalid_argument(what + ": expected dimension " + std::to_string(expected) +
                              ", got " + std::to_string(got)) {}
};

/// J K J^T is (numerically) singular at the requested configuration.
class SingularConfiguration : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// State left the finite / bounded region during integration.
class SimulationDiverged : public std::runtime_error {
 public:
  explicit SimulationDiverged(double t)
      : std::runtime_error("simulation diverged at t = " + std::to_string(t) + " s"), time_(t) {}
  double time() const noexcept { return time_; }

 private:
  double time_;
};

/// Time argument outside the prescribed base-motion horizon.
class OutsideHorizon : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

/// Ziegler-Nichols probe reached its gain cap (or went unstable) without a sustained oscillation.
class NoOscillationFound : public std::runtime_error {
 public:
  NoOscillationFound(const std::string& what, double gain_reached)
      : std::runtime_error(what), gain_(gain_reached) {}
  double gain_reached() const noexcept { return gain_; }

 private:
  double gain_;
};

/// Ziegler-Nichols probe diverged before any oscillation analysis was possible.
class UnstableProbe : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Gram matrix could not be factorized even after the jitter schedule.
class NotPositiveDefinite : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed configuration file. `key()` names the offending JSON path.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(const std::string& key, const std::string& what)
      : std::runtime_error(key.empty() ? what : key + ": " + what), key_(key) {}
  const std::string& key() const noexcept { return key_; }

 private:
  std::string key_;
};

}  // namespace apid

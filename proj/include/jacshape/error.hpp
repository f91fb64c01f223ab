#pragma once

#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace jacshape {

/// Error classes. Each maps to a distinct process exit code in the CLI.
enum class ErrorKind {
  invalid_argument,
  io,
  shape_mismatch,
  degenerate_domain,
  underresolved,
  connectivity,
  collar_too_thick,
  exhaustion_failure,
  unsupported_order,
  inconsistent_datum,
  precondition,
  positivity,
  support_distance,
  solver_stall,
  contraction_failure,
  nonzero_period,
  unsupported_topology,
  out_of_range,
  inversion_failure,
  orientation_loss,
  bracket_failure,
  flow_accuracy,
  change_of_variables_drift,
};

inline std::string_view to_string(ErrorKind k) {
  switch (k) {
    case ErrorKind::invalid_argument: return "invalid-argument";
    case ErrorKind::io: return "io";
    case ErrorKind::shape_mismatch: return "shape-mismatch";
    case ErrorKind::degenerate_domain: return "degenerate-domain";
    case ErrorKind::underresolved: return "underresolved";
    case ErrorKind::connectivity: return "connectivity";
    case ErrorKind::collar_too_thick: return "collar-too-thick";
    case ErrorKind::exhaustion_failure: return "exhaustion-failure";
    case ErrorKind::unsupported_order: return "unsupported-order";
    case ErrorKind::inconsistent_datum: return "inconsistent-datum";
    case ErrorKind::precondition: return "precondition";
    case ErrorKind::positivity: return "positivity";
    case ErrorKind::support_distance: return "support-distance";
    case ErrorKind::solver_stall: return "solver-stall";
    case ErrorKind::contraction_failure: return "contraction-failure";
    case ErrorKind::nonzero_period: return "nonzero-period";
    case ErrorKind::unsupported_topology: return "unsupported-topology";
    case ErrorKind::out_of_range: return "out-of-range";
    case ErrorKind::inversion_failure: return "inversion-failure";
    case ErrorKind::orientation_loss: return "orientation-loss";
    case ErrorKind::bracket_failure: return "bracket-failure";
    case ErrorKind::flow_accuracy: return "flow-accuracy";
    case ErrorKind::change_of_variables_drift: return "change-of-variables-drift";
  }
  return "unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what, std::string stage = {})
      : std::runtime_error(what), kind_(kind), stage_(std::move(stage)) {}

  ErrorKind kind() const noexcept { return kind_; }

  /// Pipeline stage that raised the error ("" when raised directly).
  const std::string& stage() const noexcept { return stage_; }

  /// Offending node indices, when the error is localized.
  std::vector<std::size_t> nodes;
  /// Residual history, for iterative-solver failures.
  std::vector<double> history;

  Error with_stage(std::string stage) const {
    Error e(kind_, what(), std::move(stage));
    e.nodes = nodes;
    e.history = history;
    return e;
  }

 private:
  ErrorKind kind_;
  std::string stage_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) {
  throw Error(kind, what);
}

}  // namespace jacshape

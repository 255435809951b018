#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "boxseg/gradcheck.hpp"

namespace boxseg {

// Finite-difference audit of every loss path: the MIL loss and the pixel loss
// through a sigmoid, and the full batch loss through backbone + heads +
// transfer MLP (with reduced channel widths so the probe stays fast).
struct GradSuiteConfig {
  uint64_t seed = 1;
  int seeds = 20;      // independent random restarts per target
  int patch = 16;      // patch side for every target
  double eps = 1e-5;   // central-difference step
  double tol = 1e-4;   // max relative error allowed
  bool composite = true;  // include the backbone+heads+transfer target
  // Measurability guard for the composite only: a parameter whose gradient is
  // below this is held to |a - n| < tol * floor instead of a relative bound,
  // keeping double-precision finite-difference noise out of the verdict.
  double composite_floor = 2e-5;
};

struct GradTargetResult {
  std::string name;
  GradCheckResult worst;  // worst per-element result across all seeds
  int params_checked = 0;
};

struct GradSuiteReport {
  std::vector<GradTargetResult> targets;
  double max_rel_err = 0.0;
  bool pass = false;
};

GradSuiteReport run_grad_suite(const GradSuiteConfig& cfg);

}  // namespace boxseg

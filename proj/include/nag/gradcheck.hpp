#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "nag/tensor.hpp"

namespace nag {

struct GradCheckOptions {
  double step = 1e-5;        // central-difference half width
  double tolerance = 1e-4;   // max relative error
  // Relative error is |a - n| / max(|a|, |n|, denom_floor); the floor keeps
  // entries whose true gradient is ~0 from being judged on rounding noise.
  double denom_floor = 1e-6;
  std::size_t max_entries_per_leaf = 0;  // 0 checks every entry
  std::uint64_t seed = 0;                // entry subsampling
};

struct LeafCheck {
  std::string name;
  std::size_t checked = 0;
  std::size_t worst_index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  double worst_error = 0.0;
  bool passed = true;
};

struct GradCheckReport {
  std::vector<LeafCheck> leaves;
  double tolerance = 0.0;

  bool passed() const;
  const LeafCheck* worst() const;
  // One line per leaf plus a verdict line.
  std::string format() const;
};

// `loss` evaluates the scalar objective from current parameter values.
// `loss_and_grad` evaluates it and accumulates analytic gradients into each
// leaf's grad (the harness zeroes grads beforehand).
GradCheckReport grad_check(const std::function<double()>& loss,
                           const std::function<void()>& loss_and_grad,
                           std::span<ParamLeaf* const> leaves, const GradCheckOptions& options = {});

}  // namespace nag

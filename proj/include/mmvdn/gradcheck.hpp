#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "mmvdn/tensor.hpp"

namespace mmvdn {

// Builds the checked function from leaf variables on a fresh tape. The
// output may have any shape; it is projected onto fixed random weights to
// form a scalar.
using GradcheckFn = std::function<Var(Tape& tape, const std::vector<Var>& leaves)>;

struct GradcheckResult {
  double max_rel_error = 0.0;  // max |analytic - numeric| / max(1, |analytic|)
  std::size_t coordinates = 0;
};

// Central differences with step `eps` over every coordinate of every leaf.
GradcheckResult check_gradients(const GradcheckFn& fn, const std::vector<Tensor>& leaves, std::uint64_t seed,
                                double eps = 1e-3);

struct GradcheckReport {
  std::string op;
  int instances = 0;
  double max_rel_error = 0.0;
  bool passed = false;
};

inline constexpr double kGradcheckTolerance = 1e-3;

// Names accepted by run_gradcheck_suite, in report order.
std::vector<std::string> gradcheck_ops();

// `which` is "all", a group ("conv", "mil", "lstm") or a single op name.
// Inputs are drawn in [-1, 1]; max-style ops get values on a grid spaced
// well above eps so no perturbation flips a winner.
std::vector<GradcheckReport> run_gradcheck_suite(const std::string& which, std::uint64_t seed = 7,
                                                 int instances = 5);

}  // namespace mmvdn

#pragma once

#include <functional>
#include <string>
#include <vector>

namespace ssf {

inline constexpr double kLayerGradTolerance = 1e-5;
inline constexpr double kEndToEndGradTolerance = 1e-3;

/// One f64 finite-difference check. `run` returns the max relative error.
struct GradCase {
  std::string name;
  double threshold = kLayerGradTolerance;
  std::function<double()> run;
};

struct GradCaseResult {
  std::string name;
  double max_error = 0.0;
  double threshold = 0.0;
  bool passed = false;
  std::string error;  // set when the case threw
};

/// Every layer and loss, plus the end-to-end tiny model.
std::vector<GradCase> gradcheck_cases();

/// Replaces the case with the same name, or appends.
void replace_case(std::vector<GradCase>& cases, GradCase replacement);

std::vector<GradCaseResult> run_grad_suite(const std::vector<GradCase>& cases,
                                           const std::function<void(const GradCaseResult&)>& on_result = {});

}  // namespace ssf

#pragma once

#include <optional>

#include "censelect/types.hpp"

namespace censelect {

/// Which variance goes in the denominator of a score-type test.
enum class VarianceFlavor { model, robust };

/// Product-limit estimator. If `treatment_arm` is set, only rows with that
/// treatment value contribute. Returns a right-continuous step function with
/// S(0) = 1 and knots at the observed event times.
StepFunction kaplan_meier(const Dataset& data, std::optional<int> treatment_arm = std::nullopt);

/// Two-sample logrank test of treatment effect (score test of a Cox model
/// containing only the treatment indicator, evaluated at coefficient zero).
TestResult logrank_test(const Dataset& data, VarianceFlavor flavor = VarianceFlavor::robust);

/// Swaps the roles of event and censoring: status flips to 1 - status. Used
/// to model the censoring distribution with the same machinery.
Dataset censoring_dataset(const Dataset& data);

}  // namespace censelect

#pragma once

#include <string>

#include "rebal/types.hpp"

namespace rebal::detail {

// Assembles an AllocationResult from a value matrix: derives proportions and
// records the achieved marginal residuals.
AllocationResult make_result(const RebalanceProblem& problem, Matrix values,
                             std::string tag, double tolerance,
                             bool allow_negative);

}  // namespace rebal::detail

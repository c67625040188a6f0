#pragma once

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "cueing/tensor.hpp"

namespace cueing::nn {

struct GradCheckReport {
    std::string name;
    double max_rel_err = 0.0;
    double tol = 0.0;
    size_t checked = 0;
    bool passed() const { return max_rel_err <= tol; }
};

// Central finite differences against an analytic gradient, double precision.
// `loss` re-evaluates the scalar objective from the current tensor contents;
// `value` is perturbed in place; `analytic` holds dLoss/dvalue. Checks the
// coordinates listed in `coords` (all coordinates when empty). The step is
// 1e-5 scaled by coordinate magnitude.
GradCheckReport grad_check(const std::string& name, const std::function<double()>& loss,
                           DTensor& value, const DTensor& analytic, double tol,
                           const std::vector<size_t>& coords = {});

// Relative error convention: |a - f| / max(1, |a|, |f|), so near-zero
// gradients are compared absolutely.
double grad_rel_err(double analytic, double numeric);

}  // namespace cueing::nn

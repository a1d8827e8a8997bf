#pragma once

#include <functional>
#include <string>
#include <vector>

#include "injector/autodiff.hpp"

namespace injector {

struct GradCheckEntry {
    std::string param;
    int64_t worst_index = -1;
    double analytic = 0.0;
    double numeric = 0.0;
    double max_rel_error = 0.0;
};

struct GradCheckReport {
    double max_rel_error = 0.0;
    std::vector<GradCheckEntry> entries;
    bool pass(double tolerance) const { return max_rel_error < tolerance; }
    std::string summary() const;
};

// Compares reverse-mode gradients of a scalar computation against central
// finite differences for every entry of every parameter. The computation must
// rebuild its forward pass from the current parameter values on each call.
// Error metric: |a - n| / max(1, |a|, |n|).
GradCheckReport grad_check(const std::function<Var(Tape&)>& computation,
                           const std::vector<Var>& params, double step = 1e-5);

}  // namespace injector

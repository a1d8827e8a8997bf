#include "injector/grad_check.hpp"

#include <cmath>
#include <sstream>

#include "injector/errors.hpp"

namespace injector {

std::string GradCheckReport::summary() const {
    std::ostringstream out;
    out << "grad_check: max relative error " << max_rel_error;
    for (const auto& e : entries) {
        out << "\n  " << (e.param.empty() ? "<unnamed>" : e.param) << ": err " << e.max_rel_error
            << " at index " << e.worst_index << " (analytic " << e.analytic << ", numeric "
            << e.numeric << ")";
    }
    return out.str();
}

GradCheckReport grad_check(const std::function<Var(Tape&)>& computation,
                           const std::vector<Var>& params, double step) {
    // Analytic pass.
    for (const Var& p : params) p->zero_grad();
    Tape tape;
    Var out = computation(tape);
    if (out->value.numel() != 1) {
        throw ContractError("grad_check requires a scalar-valued computation, got " +
                            shape_str(out->value.shape()));
    }
    tape.backward(out);
    std::vector<Tensor> analytic;
    analytic.reserve(params.size());
    for (const Var& p : params) {
        analytic.push_back(p->has_grad() ? p->grad : Tensor::zeros(p->value.shape()));
    }
    tape.clear();

    auto eval = [&computation]() {
        Tape t;
        Var o = computation(t);
        return o->value[0];
    };

    GradCheckReport report;
    for (size_t pi = 0; pi < params.size(); ++pi) {
        const Var& p = params[pi];
        GradCheckEntry entry;
        entry.param = p->name;
        for (int64_t i = 0; i < p->value.numel(); ++i) {
            const double saved = p->value[i];
            p->value[i] = saved + step;
            const double up = eval();
            p->value[i] = saved - step;
            const double down = eval();
            p->value[i] = saved;
            const double numeric = (up - down) / (2.0 * step);
            const double a = analytic[pi][i];
            const double denom = std::max({1.0, std::abs(a), std::abs(numeric)});
            const double err = std::abs(a - numeric) / denom;
            if (err > entry.max_rel_error) {
                entry.max_rel_error = err;
                entry.worst_index = i;
                entry.analytic = a;
                entry.numeric = numeric;
            }
        }
        report.max_rel_error = std::max(report.max_rel_error, entry.max_rel_error);
        report.entries.push_back(std::move(entry));
    }
    for (const Var& p : params) p->zero_grad();
    return report;
}

}  // namespace injector

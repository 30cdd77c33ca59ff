#include "remtrack/gradient_check.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace remtrack::ad {

namespace {

double evaluate(const LossFn& loss_fn) {
    Tape tape(false);
    const double f = tape.scalar(loss_fn(tape));
    if (!std::isfinite(f)) {
        throw std::runtime_error("gradient_check: loss is not finite");
    }
    return f;
}

}  // namespace

GradientCheckReport gradient_check(const LossFn& loss_fn, ParameterStore& store, double epsilon) {
    if (!(epsilon >= 1e-7 && epsilon <= 1e-3)) {
        throw std::invalid_argument("gradient_check: epsilon must lie in [1e-7, 1e-3]");
    }
    Gradients analytic = store.make_gradients();
    {
        Tape tape(true);
        const Var loss = loss_fn(tape);
        if (!std::isfinite(tape.scalar(loss))) {
            throw std::runtime_error("gradient_check: loss is not finite");
        }
        tape.backward(loss, &analytic);
    }

    GradientCheckReport report;
    for (std::size_t s = 0; s < store.size(); ++s) {
        Tensor& t = store.tensor(s);
        for (std::size_t k = 0; k < t.size(); ++k) {
            const double saved = t.data[k];
            t.data[k] = saved + epsilon;
            const double f_plus = evaluate(loss_fn);
            t.data[k] = saved - epsilon;
            const double f_minus = evaluate(loss_fn);
            t.data[k] = saved;

            const double numeric = (f_plus - f_minus) / (2.0 * epsilon);
            const double a = analytic[s][k];
            const double denom = std::max({std::abs(a), std::abs(numeric), kGradCheckFloor});
            const double rel = std::abs(a - numeric) / denom;
            ++report.entries_checked;
            if (report.worst_parameter.empty() || rel > report.max_relative_error) {
                report.max_relative_error = rel;
                report.worst_parameter = store.name(s);
                report.worst_index = k;
                report.analytic = a;
                report.numeric = numeric;
            }
        }
    }
    return report;
}

}  // namespace remtrack::ad

#include "czsl/gradcheck.hpp"

#include <cmath>

#include "czsl/error.hpp"

namespace czsl {

namespace {

double eval_loss(const LossFn& f, ParamStore& params) {
    Tape tape;
    Var loss = f(tape, params);
    return tape.scalar(loss);
}

}  // namespace

double grad_check(const LossFn& f, ParamStore& params, double eps) {
    if (eps <= 0.0) throw DomainError("grad_check: eps must be positive");

    Tape tape;
    Var loss = f(tape, params);
    GradMap analytic = tape.backward(loss, &params);

    // Near-zero entries are compared against the overall gradient scale, not
    // themselves; central differences carry cancellation noise of roughly
    // |loss| * 1e-16 / eps that would otherwise dominate the ratio.
    double gmax = 0.0;
    for (const auto& name : params.param_names())
        for (double v : analytic.at(name).d) gmax = std::max(gmax, std::fabs(v));
    const double floor = std::max(1e-6, 1e-3 * gmax);

    double max_rel = 0.0;
    for (const auto& name : params.param_names()) {
        Tensor2& p = params.at(name);
        const Tensor2& a = analytic.at(name);
        for (size_t i = 0; i < p.d.size(); ++i) {
            const double orig = p.d[i];
            p.d[i] = orig + eps;
            const double up = eval_loss(f, params);
            p.d[i] = orig - eps;
            const double down = eval_loss(f, params);
            p.d[i] = orig;
            const double numeric = (up - down) / (2.0 * eps);
            const double denom = std::max({std::fabs(a.d[i]), std::fabs(numeric), floor});
            max_rel = std::max(max_rel, std::fabs(a.d[i] - numeric) / denom);
        }
    }
    return max_rel;
}

}  // namespace czsl

#include "czsl/optim.hpp"

#include <cmath>

#include "czsl/error.hpp"

namespace czsl {

OptKind opt_kind_from_string(const std::string& s) {
    if (s == "sgd_nesterov") return OptKind::SgdNesterov;
    if (s == "adam") return OptKind::Adam;
    throw ConfigError("unknown optimizer kind: " + s);
}

std::string to_string(OptKind k) {
    return k == OptKind::SgdNesterov ? "sgd_nesterov" : "adam";
}

void OptimizerSpec::validate() const {
    if (learning_rate <= 0.0) throw ConfigError("OptimizerSpec: learning_rate must be > 0");
    if (momentum < 0.0 || momentum >= 1.0) throw ConfigError("OptimizerSpec: momentum must be in [0,1)");
    if (weight_decay < 0.0) throw ConfigError("OptimizerSpec: weight_decay must be >= 0");
}

void optimizer_step(const OptimizerSpec& spec, ParamStore& store, const GradMap& grads,
                    const std::set<std::string>* active) {
    spec.validate();
    for (const auto& [name, g] : grads) {
        if (active && !active->count(name)) continue;
        if (!g.all_finite()) throw NumericError("optimizer_step: non-finite gradient for " + name);
        const Tensor2& p = store.at(name);
        if (!p.same_shape(g))
            throw ConfigError("optimizer_step: gradient shape mismatch for " + name);
    }

    for (const auto& [name, g] : grads) {
        if (active && !active->count(name)) continue;
        Tensor2& p = store.at(name);

        if (spec.kind == OptKind::SgdNesterov) {
            Tensor2& buf = store.state("momentum", name);
            for (size_t i = 0; i < p.d.size(); ++i) {
                const double grad = g.d[i] + spec.weight_decay * p.d[i];
                buf.d[i] = spec.momentum * buf.d[i] + grad;
                const double update = spec.momentum > 0.0
                                          ? grad + spec.momentum * buf.d[i]
                                          : grad;
                p.d[i] -= spec.learning_rate * update;
            }
        } else {
            Tensor2& m = store.state("adam_m", name);
            Tensor2& v = store.state("adam_v", name);
            // Per-parameter step count so frozen phases do not skew bias correction.
            Tensor2* t_state = &store.state("adam_t", name);
            if (t_state->size() != 1) {
                // adam_t is a 1x1 counter regardless of the parameter's shape.
                *t_state = Tensor2::zeros(1, 1);
            }
            const double t = (t_state->d[0] += 1.0);
            const double bc1 = 1.0 - std::pow(spec.beta1, t);
            const double bc2 = 1.0 - std::pow(spec.beta2, t);
            for (size_t i = 0; i < p.d.size(); ++i) {
                const double grad = g.d[i] + spec.weight_decay * p.d[i];
                m.d[i] = spec.beta1 * m.d[i] + (1.0 - spec.beta1) * grad;
                v.d[i] = spec.beta2 * v.d[i] + (1.0 - spec.beta2) * grad * grad;
                const double mhat = m.d[i] / bc1;
                const double vhat = v.d[i] / bc2;
                p.d[i] -= spec.learning_rate * mhat / (std::sqrt(vhat) + spec.epsilon);
            }
        }
    }
    store.increment_step();
}

}  // namespace czsl

#pragma once

#include <set>
#include <string>

#include "czsl/params.hpp"

namespace czsl {

enum class OptKind { SgdNesterov, Adam };

OptKind opt_kind_from_string(const std::string& s);
std::string to_string(OptKind k);

struct OptimizerSpec {
    OptKind kind = OptKind::SgdNesterov;
    double learning_rate = 3e-4;
    double momentum = 0.9;     // SGD only
    double beta1 = 0.9;        // Adam
    double beta2 = 0.999;      // Adam
    double epsilon = 1e-8;     // Adam
    double weight_decay = 0.0; // coupled L2, added to the gradient

    void validate() const;
};

// Apply one update. When `active` is non-null only the named parameters are
// updated (the rest stay frozen, including their optimizer state). A NaN/Inf
// gradient aborts before any parameter is touched.
void optimizer_step(const OptimizerSpec& spec, ParamStore& store, const GradMap& grads,
                    const std::set<std::string>* active = nullptr);

}  // namespace czsl

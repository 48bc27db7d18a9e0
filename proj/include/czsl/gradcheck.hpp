#pragma once

#include <functional>

#include "czsl/params.hpp"
#include "czsl/tape.hpp"

namespace czsl {

// A deterministic scalar loss recorded on a caller-provided tape.
using LossFn = std::function<Var(Tape&, ParamStore&)>;

// Compares analytic gradients against central finite differences with step
// `eps`. Returns max over all parameter entries of
// |analytic - numeric| / max(|analytic|, |numeric|, 1e-8).
// Inputs must be kept away from activation kinks (e.g. relu at exactly 0).
double grad_check(const LossFn& f, ParamStore& params, double eps = 1e-5);

}  // namespace czsl

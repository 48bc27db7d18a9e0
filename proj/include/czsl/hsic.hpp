#pragma once

#include <vector>

#include "czsl/tape.hpp"
#include "czsl/tensor.hpp"

namespace czsl {

// Finite-sample linear-kernel HSIC: tr(KHLH)/(n-1)^2 with K = U U^T, L = V V^T
// and H the centering matrix. Computed through the algebraically equivalent
// ||V^T H U||_F^2 / (n-1)^2, which keeps the cost linear in batch size times
// feature dims. Differentiable (tape) and plain variants.
Var hsic_linear_rec(Tape& tape, Var U, Var V);
double hsic_linear(const Tensor2& U, const Tensor2& V);

// Direct tr(KHLH) evaluation through the n x n kernel matrices. Test oracle
// for the Gram-free route above; O(n^2 d) and not differentiable.
double hsic_linear_gram(const Tensor2& U, const Tensor2& V);

// Conditional dependence penalty: mean of per-group HSIC over the label groups
// present in the batch. Groups with fewer than 2 samples are skipped and do
// not count toward the divisor.
Var conditional_hsic_rec(Tape& tape, Var U, Var V, const std::vector<int>& y);
double conditional_hsic(const Tensor2& U, const Tensor2& V, const std::vector<int>& y);

// L_indep = lambda_oh * [I(phiA, O|A) + I(phiO, A|O)]
//         + lambda_rep * [I(phiA, phiO|A) + I(phiA, phiO|O)],
// where O and A enter as one-hot matrices. Terms with a zero weight are not
// evaluated at all.
Var loss_indep_rec(Tape& tape, Var phi_a, Var phi_o, Var one_hot_a, Var one_hot_o,
                   const std::vector<int>& a_labels, const std::vector<int>& o_labels,
                   double lambda_oh, double lambda_rep);

// Row one-hot encoding of labels.
Tensor2 one_hot(const std::vector<int>& labels, int num_classes);

}  // namespace czsl

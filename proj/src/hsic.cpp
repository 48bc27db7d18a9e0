#include "czsl/hsic.hpp"

#include <map>

#include "czsl/error.hpp"

namespace czsl {

namespace {

void check_batch(int n_u, int n_v) {
    if (n_u != n_v) throw ConfigError("hsic_linear: U and V row counts differ");
    if (n_u < 2) throw DomainError("hsic_linear: need at least 2 samples");
}

std::map<int, std::vector<int>> group_indices(const std::vector<int>& y) {
    std::map<int, std::vector<int>> groups;
    for (size_t i = 0; i < y.size(); ++i) groups[y[i]].push_back(static_cast<int>(i));
    return groups;
}

}  // namespace

Var hsic_linear_rec(Tape& tape, Var U, Var V) {
    const int n = tape.value(U).rows;
    check_batch(n, tape.value(V).rows);
    Var hu = tape.center_cols(U);
    Var hv = tape.center_cols(V);
    Var cross = tape.matmul(tape.transpose(hv), hu);
    const double denom = static_cast<double>(n - 1) * (n - 1);
    return tape.scale(tape.sum_sq(cross), 1.0 / denom);
}

double hsic_linear(const Tensor2& U, const Tensor2& V) {
    check_batch(U.rows, V.rows);
    const Tensor2 cross = matmul(transpose(center_cols(V)), center_cols(U));
    const double denom = static_cast<double>(U.rows - 1) * (U.rows - 1);
    return sum_sq(cross) / denom;
}

double hsic_linear_gram(const Tensor2& U, const Tensor2& V) {
    check_batch(U.rows, V.rows);
    const int n = U.rows;
    const Tensor2 K = matmul(U, transpose(U));
    const Tensor2 L = matmul(V, transpose(V));
    Tensor2 H(n, n, -1.0 / n);
    for (int i = 0; i < n; ++i) H(i, i) += 1.0;
    const Tensor2 khlh = matmul(matmul(K, H), matmul(L, H));
    double tr = 0.0;
    for (int i = 0; i < n; ++i) tr += khlh(i, i);
    return tr / (static_cast<double>(n - 1) * (n - 1));
}

Var conditional_hsic_rec(Tape& tape, Var U, Var V, const std::vector<int>& y) {
    if (static_cast<int>(y.size()) != tape.value(U).rows)
        throw ConfigError("conditional_hsic: label count mismatch");
    Var acc;
    int used = 0;
    for (const auto& [label, idx] : group_indices(y)) {
        if (idx.size() < 2) continue;
        Var gu = tape.gather_rows(U, idx);
        Var gv = tape.gather_rows(V, idx);
        Var h = hsic_linear_rec(tape, gu, gv);
        acc = acc.valid() ? tape.add(acc, h) : h;
        ++used;
    }
    if (used == 0) throw DomainError("conditional_hsic: no label group has >= 2 samples");
    return tape.scale(acc, 1.0 / used);
}

double conditional_hsic(const Tensor2& U, const Tensor2& V, const std::vector<int>& y) {
    Tape tape;
    Var u = tape.constant(U);
    Var v = tape.constant(V);
    return tape.scalar(conditional_hsic_rec(tape, u, v, y));
}

Var loss_indep_rec(Tape& tape, Var phi_a, Var phi_o, Var one_hot_a, Var one_hot_o,
                   const std::vector<int>& a_labels, const std::vector<int>& o_labels,
                   double lambda_oh, double lambda_rep) {
    if (lambda_oh < 0.0 || lambda_rep < 0.0)
        throw ConfigError("loss_indep: lambdas must be nonnegative");
    Var total;
    auto accumulate = [&](Var term) { total = total.valid() ? tape.add(total, term) : term; };
    if (lambda_oh > 0.0) {
        Var l_oh = tape.add(conditional_hsic_rec(tape, phi_a, one_hot_o, a_labels),
                            conditional_hsic_rec(tape, phi_o, one_hot_a, o_labels));
        accumulate(tape.scale(l_oh, lambda_oh));
    }
    if (lambda_rep > 0.0) {
        Var l_rep = tape.add(conditional_hsic_rec(tape, phi_a, phi_o, a_labels),
                             conditional_hsic_rec(tape, phi_a, phi_o, o_labels));
        accumulate(tape.scale(l_rep, lambda_rep));
    }
    if (!total.valid()) return tape.constant(Tensor2::zeros(1, 1));
    return total;
}

Tensor2 one_hot(const std::vector<int>& labels, int num_classes) {
    Tensor2 t(static_cast<int>(labels.size()), num_classes);
    for (size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] < 0 || labels[i] >= num_classes)
            throw DomainError("one_hot: label out of range");
        t(static_cast<int>(i), labels[i]) = 1.0;
    }
    return t;
}

}  // namespace czsl

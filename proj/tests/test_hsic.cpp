#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "czsl/error.hpp"
#include "czsl/gradcheck.hpp"
#include "czsl/hsic.hpp"
#include "czsl/rng.hpp"

using namespace czsl;

TEST_CASE("hand-derived n=2 case") {
    Tensor2 u(2, 1);
    u.d = {0, 1};
    CHECK(hsic_linear(u, u) == doctest::Approx(0.25).epsilon(1e-12));
}

TEST_CASE("constant rows annihilate the estimate") {
    Rng rng(1);
    Tensor2 u = Tensor2::full(10, 3, 2.5);
    Tensor2 v = Tensor2::randn(10, 2, rng);
    CHECK(hsic_linear(u, v) == doctest::Approx(0.0).epsilon(1e-14));
}

TEST_CASE("fewer than 2 samples is a domain error") {
    Tensor2 u(1, 2), v(1, 2);
    CHECK_THROWS_AS(hsic_linear(u, v), DomainError);
}

TEST_CASE("matches the Gram-matrix form on random inputs") {
    Rng rng(2);
    for (int rep = 0; rep < 100; ++rep) {
        const int n = 2 + rng.uniform_int(20);
        Tensor2 u = Tensor2::randn(n, 1 + rng.uniform_int(4), rng);
        Tensor2 v = Tensor2::randn(n, 1 + rng.uniform_int(4), rng);
        CHECK(std::abs(hsic_linear(u, v) - hsic_linear_gram(u, v)) < 1e-10);
    }
}

TEST_CASE("independent gaussians are near zero on the self-dependence scale") {
    for (uint64_t seed : {11u, 12u, 13u, 14u, 15u}) {
        Rng rng(seed);
        Tensor2 u = Tensor2::randn(2000, 3, rng);
        Tensor2 v = Tensor2::randn(2000, 3, rng);
        const double scale = std::sqrt(hsic_linear(u, u) * hsic_linear(v, v));
        CHECK(hsic_linear(u, v) < 0.01 * scale);
    }
}

TEST_CASE("symmetry, translation invariance, scale law") {
    Rng rng(3);
    Tensor2 u = Tensor2::randn(40, 3, rng);
    Tensor2 v = Tensor2::randn(40, 2, rng);
    CHECK(std::abs(hsic_linear(u, v) - hsic_linear(v, u)) < 1e-12);

    Tensor2 shifted = u;
    for (int i = 0; i < shifted.rows; ++i)
        for (int j = 0; j < shifted.cols; ++j) shifted(i, j) += 7.5;
    CHECK(std::abs(hsic_linear(shifted, v) - hsic_linear(u, v)) < 1e-10);

    const double c = 3.0;
    CHECK(std::abs(hsic_linear(scale(u, c), v) - c * c * hsic_linear(u, v)) < 1e-10);
}

TEST_CASE("hsic gradient passes finite differences") {
    Rng rng(4);
    ParamStore store;
    store.create("U", Tensor2::randn(12, 3, rng));
    store.create("V", Tensor2::randn(12, 2, rng));
    const double err = grad_check(
        [](Tape& t, ParamStore& s) {
            return hsic_linear_rec(t, t.param(s, "U"), t.param(s, "V"));
        },
        store);
    CHECK(err < 1e-4);
}

TEST_CASE("conditional hsic with one group equals the plain estimate") {
    Rng rng(5);
    Tensor2 u = Tensor2::randn(16, 2, rng);
    Tensor2 v = Tensor2::randn(16, 3, rng);
    const std::vector<int> y(16, 4);
    CHECK(conditional_hsic(u, v, y) == doctest::Approx(hsic_linear(u, v)).epsilon(1e-14));
}

TEST_CASE("two hand-computed groups average to 0.25") {
    Tensor2 u(4, 1);
    u.d = {0, 1, 0, 1};
    const std::vector<int> y{0, 0, 1, 1};
    CHECK(conditional_hsic(u, u, y) == doctest::Approx(0.25).epsilon(1e-12));
}

TEST_CASE("one-hot of the grouping labels is conditionally independent of anything") {
    Rng rng(6);
    const std::vector<int> y{0, 0, 1, 1, 2, 2, 2};
    Tensor2 u = one_hot(y, 3);
    Tensor2 v = Tensor2::randn(7, 4, rng);
    CHECK(conditional_hsic(u, v, y) == doctest::Approx(0.0).epsilon(1e-14));
}

TEST_CASE("singleton groups are skipped and excluded from the divisor") {
    Tensor2 u(5, 1);
    u.d = {0, 1, 0, 1, 99};
    const std::vector<int> y{0, 0, 1, 1, 2};  // group 2 has one sample
    CHECK(conditional_hsic(u, u, y) == doctest::Approx(0.25).epsilon(1e-12));

    const std::vector<int> all_singletons{0, 1, 2, 3, 4};
    CHECK_THROWS_AS(conditional_hsic(u, u, all_singletons), DomainError);
}

TEST_CASE("loss_indep with zero lambdas is zero") {
    Rng rng(7);
    Tensor2 pa = Tensor2::randn(8, 2, rng);
    Tensor2 po = Tensor2::randn(8, 2, rng);
    const std::vector<int> a{0, 0, 0, 0, 1, 1, 1, 1};
    const std::vector<int> o{0, 1, 0, 1, 0, 1, 0, 1};
    Tape tape;
    Var v = loss_indep_rec(tape, tape.constant(pa), tape.constant(po), tape.constant(one_hot(a, 2)),
                           tape.constant(one_hot(o, 2)), a, o, 0.0, 0.0);
    CHECK(tape.scalar(v) == 0.0);
}

TEST_CASE("constant phi_a kills its terms") {
    Rng rng(8);
    Tensor2 pa = Tensor2::full(8, 2, 3.0);
    Tensor2 po = Tensor2::randn(8, 2, rng);
    const std::vector<int> a{0, 0, 0, 0, 1, 1, 1, 1};
    const std::vector<int> o{0, 1, 0, 1, 0, 1, 0, 1};
    // With phi_a constant, I(phi_a, O|A) and both L_rep terms vanish; what
    // remains is lambda_oh * I(phi_o, A|O).
    Tape tape;
    Var v = loss_indep_rec(tape, tape.constant(pa), tape.constant(po), tape.constant(one_hot(a, 2)),
                           tape.constant(one_hot(o, 2)), a, o, 0.7, 0.9);
    const double expect = 0.7 * conditional_hsic(po, one_hot(a, 2), o);
    CHECK(tape.scalar(v) == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("four-sample batch equals the sum of hand-grouped terms") {
    Rng rng(9);
    Tensor2 pa = Tensor2::randn(4, 2, rng);
    Tensor2 po = Tensor2::randn(4, 2, rng);
    const std::vector<int> a{0, 0, 1, 1};
    const std::vector<int> o{0, 1, 0, 1};
    const Tensor2 oha = one_hot(a, 2), oho = one_hot(o, 2);
    const double lambda_oh = 0.1, lambda_rep = 0.2;

    Tape tape;
    Var v = loss_indep_rec(tape, tape.constant(pa), tape.constant(po), tape.constant(oha),
                           tape.constant(oho), a, o, lambda_oh, lambda_rep);
    const double expect = lambda_oh * (conditional_hsic(pa, oho, a) + conditional_hsic(po, oha, o)) +
                          lambda_rep * (conditional_hsic(pa, po, a) + conditional_hsic(pa, po, o));
    CHECK(tape.scalar(v) == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("loss_indep gradient passes finite differences") {
    Rng rng(10);
    ParamStore store;
    store.create("pa", Tensor2::randn(8, 2, rng));
    store.create("po", Tensor2::randn(8, 2, rng));
    const std::vector<int> a{0, 0, 0, 0, 1, 1, 1, 1};
    const std::vector<int> o{0, 1, 0, 1, 0, 1, 0, 1};
    const Tensor2 oha = one_hot(a, 2), oho = one_hot(o, 2);
    const double err = grad_check(
        [&](Tape& t, ParamStore& s) {
            return loss_indep_rec(t, t.param(s, "pa"), t.param(s, "po"), t.constant(oha),
                                  t.constant(oho), a, o, 0.1, 0.1);
        },
        store);
    CHECK(err < 1e-4);
}

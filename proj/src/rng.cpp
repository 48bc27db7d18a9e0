#include "czsl/rng.hpp"

#include <cmath>

#include "czsl/error.hpp"

namespace czsl {

double Rng::uniform() {
    // 53-bit mantissa fill.
    return static_cast<double>(eng_() >> 11) * (1.0 / 9007199254740992.0);
}

int Rng::uniform_int(int n) {
    if (n <= 0) throw DomainError("uniform_int: n must be positive");
    // Rejection sampling to avoid modulo bias.
    const uint64_t limit = UINT64_MAX - UINT64_MAX % static_cast<uint64_t>(n);
    uint64_t v;
    do {
        v = eng_();
    } while (v >= limit);
    return static_cast<int>(v % static_cast<uint64_t>(n));
}

double Rng::normal() {
    if (has_spare_) {
        has_spare_ = false;
        return spare_;
    }
    double u1, u2;
    do {
        u1 = uniform();
    } while (u1 <= 0.0);
    u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * M_PI * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
}

double Rng::gamma(double shape) {
    if (shape <= 0.0) throw DomainError("gamma: shape must be positive");
    if (shape < 1.0) {
        // Boost via Gamma(shape+1) * U^(1/shape).
        const double g = gamma(shape + 1.0);
        double u;
        do {
            u = uniform();
        } while (u <= 0.0);
        return g * std::pow(u, 1.0 / shape);
    }
    const double d = shape - 1.0 / 3.0;
    const double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
        double x, v;
        do {
            x = normal();
            v = 1.0 + c * x;
        } while (v <= 0.0);
        v = v * v * v;
        const double u = uniform();
        if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
        if (u > 0.0 && std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
    }
}

std::vector<double> Rng::dirichlet(double alpha, int k) {
    std::vector<double> g(k);
    double total = 0.0;
    for (int i = 0; i < k; ++i) {
        g[i] = gamma(alpha);
        total += g[i];
    }
    if (total <= 0.0) {
        // All-zero draw is theoretically impossible; fall back to uniform.
        for (auto& v : g) v = 1.0 / k;
        return g;
    }
    for (auto& v : g) v /= total;
    return g;
}

int Rng::categorical(const std::vector<double>& probs) {
    const double u = uniform();
    double acc = 0.0;
    for (size_t i = 0; i < probs.size(); ++i) {
        acc += probs[i];
        if (u < acc) return static_cast<int>(i);
    }
    return static_cast<int>(probs.size()) - 1;
}

std::vector<int> Rng::permutation(int n) {
    std::vector<int> p(n);
    for (int i = 0; i < n; ++i) p[i] = i;
    for (int i = n - 1; i > 0; --i) {
        const int j = uniform_int(i + 1);
        std::swap(p[i], p[j]);
    }
    return p;
}

Rng Rng::fork(uint64_t salt) {
    // splitmix-style mixing of a fresh draw with the salt.
    uint64_t z = eng_() + 0x9e3779b97f4a7c15ULL * (salt + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    z = z ^ (z >> 31);
    return Rng(z);
}

}  // namespace czsl

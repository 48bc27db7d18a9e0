#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace czsl {

class Rng;

// Dense row-major matrix of doubles. The only tensor type in the library;
// vectors are 1xN or Nx1, scalars are 1x1.
struct Tensor2 {
    int rows = 0;
    int cols = 0;
    std::vector<double> d;

    Tensor2() = default;
    Tensor2(int r, int c, double fill = 0.0);

    static Tensor2 zeros(int r, int c) { return Tensor2(r, c, 0.0); }
    static Tensor2 full(int r, int c, double v) { return Tensor2(r, c, v); }
    static Tensor2 identity(int n);
    static Tensor2 randn(int r, int c, Rng& rng, double stddev = 1.0);

    double& operator()(int i, int j) { return d[static_cast<size_t>(i) * cols + j]; }
    double operator()(int i, int j) const { return d[static_cast<size_t>(i) * cols + j]; }
    double* row(int i) { return d.data() + static_cast<size_t>(i) * cols; }
    const double* row(int i) const { return d.data() + static_cast<size_t>(i) * cols; }

    size_t size() const { return d.size(); }
    bool same_shape(const Tensor2& o) const { return rows == o.rows && cols == o.cols; }
    bool all_finite() const;
    std::string shape_str() const;
};

Tensor2 matmul(const Tensor2& a, const Tensor2& b);
Tensor2 transpose(const Tensor2& a);
Tensor2 add(const Tensor2& a, const Tensor2& b);
Tensor2 sub(const Tensor2& a, const Tensor2& b);
Tensor2 mul(const Tensor2& a, const Tensor2& b);
Tensor2 scale(const Tensor2& a, double c);
double sum(const Tensor2& a);
double sum_sq(const Tensor2& a);
double max_abs(const Tensor2& a);
double max_abs_diff(const Tensor2& a, const Tensor2& b);

// Concatenate along columns: [a | b].
Tensor2 concat_cols(const Tensor2& a, const Tensor2& b);
// Rows of `a` selected by `ids`.
Tensor2 gather_rows(const Tensor2& a, const std::vector<int>& ids);
// Subtract the per-column mean (multiply by the centering matrix H).
Tensor2 center_cols(const Tensor2& a);
// 1 x cols vector of per-column means.
Tensor2 col_mean(const Tensor2& a);

}  // namespace czsl

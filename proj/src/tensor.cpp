#include "czsl/tensor.hpp"

#include <cmath>
#include <cstring>

#include "czsl/error.hpp"
#include "czsl/rng.hpp"

namespace czsl {

Tensor2::Tensor2(int r, int c, double fill)
    : rows(r), cols(c), d(static_cast<size_t>(r) * static_cast<size_t>(c), fill) {
    if (r < 0 || c < 0) throw ConfigError("Tensor2: negative dimensions");
}

Tensor2 Tensor2::identity(int n) {
    Tensor2 t(n, n);
    for (int i = 0; i < n; ++i) t(i, i) = 1.0;
    return t;
}

Tensor2 Tensor2::randn(int r, int c, Rng& rng, double stddev) {
    Tensor2 t(r, c);
    for (auto& v : t.d) v = stddev * rng.normal();
    return t;
}

bool Tensor2::all_finite() const {
    for (double v : d) {
        if (!std::isfinite(v)) return false;
    }
    return true;
}

std::string Tensor2::shape_str() const {
    return "(" + std::to_string(rows) + "x" + std::to_string(cols) + ")";
}

Tensor2 matmul(const Tensor2& a, const Tensor2& b) {
    if (a.cols != b.rows)
        throw ConfigError("matmul: shape mismatch " + a.shape_str() + " x " + b.shape_str());
    Tensor2 c(a.rows, b.cols);
    // ikj order keeps the inner loop contiguous in b and c.
    for (int i = 0; i < a.rows; ++i) {
        const double* ar = a.row(i);
        double* cr = c.row(i);
        for (int k = 0; k < a.cols; ++k) {
            const double aik = ar[k];
            if (aik == 0.0) continue;
            const double* br = b.row(k);
            for (int j = 0; j < b.cols; ++j) cr[j] += aik * br[j];
        }
    }
    return c;
}

Tensor2 transpose(const Tensor2& a) {
    Tensor2 t(a.cols, a.rows);
    for (int i = 0; i < a.rows; ++i)
        for (int j = 0; j < a.cols; ++j) t(j, i) = a(i, j);
    return t;
}

Tensor2 add(const Tensor2& a, const Tensor2& b) {
    if (!a.same_shape(b)) throw ConfigError("add: shape mismatch");
    Tensor2 c = a;
    for (size_t i = 0; i < c.d.size(); ++i) c.d[i] += b.d[i];
    return c;
}

Tensor2 sub(const Tensor2& a, const Tensor2& b) {
    if (!a.same_shape(b)) throw ConfigError("sub: shape mismatch");
    Tensor2 c = a;
    for (size_t i = 0; i < c.d.size(); ++i) c.d[i] -= b.d[i];
    return c;
}

Tensor2 mul(const Tensor2& a, const Tensor2& b) {
    if (!a.same_shape(b)) throw ConfigError("mul: shape mismatch");
    Tensor2 c = a;
    for (size_t i = 0; i < c.d.size(); ++i) c.d[i] *= b.d[i];
    return c;
}

Tensor2 scale(const Tensor2& a, double c) {
    Tensor2 t = a;
    for (auto& v : t.d) v *= c;
    return t;
}

double sum(const Tensor2& a) {
    double s = 0.0;
    for (double v : a.d) s += v;
    return s;
}

double sum_sq(const Tensor2& a) {
    double s = 0.0;
    for (double v : a.d) s += v * v;
    return s;
}

double max_abs(const Tensor2& a) {
    double m = 0.0;
    for (double v : a.d) m = std::max(m, std::fabs(v));
    return m;
}

double max_abs_diff(const Tensor2& a, const Tensor2& b) {
    if (!a.same_shape(b)) throw ConfigError("max_abs_diff: shape mismatch");
    double m = 0.0;
    for (size_t i = 0; i < a.d.size(); ++i) m = std::max(m, std::fabs(a.d[i] - b.d[i]));
    return m;
}

Tensor2 concat_cols(const Tensor2& a, const Tensor2& b) {
    if (a.rows != b.rows) throw ConfigError("concat_cols: row mismatch");
    Tensor2 c(a.rows, a.cols + b.cols);
    for (int i = 0; i < a.rows; ++i) {
        std::memcpy(c.row(i), a.row(i), sizeof(double) * a.cols);
        std::memcpy(c.row(i) + a.cols, b.row(i), sizeof(double) * b.cols);
    }
    return c;
}

Tensor2 gather_rows(const Tensor2& a, const std::vector<int>& ids) {
    Tensor2 c(static_cast<int>(ids.size()), a.cols);
    for (size_t i = 0; i < ids.size(); ++i) {
        if (ids[i] < 0 || ids[i] >= a.rows) throw DomainError("gather_rows: index out of range");
        std::memcpy(c.row(static_cast<int>(i)), a.row(ids[i]), sizeof(double) * a.cols);
    }
    return c;
}

Tensor2 col_mean(const Tensor2& a) {
    Tensor2 m(1, a.cols);
    if (a.rows == 0) return m;
    for (int i = 0; i < a.rows; ++i) {
        const double* r = a.row(i);
        for (int j = 0; j < a.cols; ++j) m.d[j] += r[j];
    }
    for (auto& v : m.d) v /= a.rows;
    return m;
}

Tensor2 center_cols(const Tensor2& a) {
    const Tensor2 m = col_mean(a);
    Tensor2 c = a;
    for (int i = 0; i < c.rows; ++i) {
        double* r = c.row(i);
        for (int j = 0; j < c.cols; ++j) r[j] -= m.d[j];
    }
    return c;
}

}  // namespace czsl

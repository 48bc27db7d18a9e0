#include "czsl/tape.hpp"

#include <cmath>
#include <cstring>

#include "czsl/error.hpp"

namespace czsl {

int Tape::check(Var v) const {
    if (v.id < 0 || v.id >= static_cast<int>(nodes_.size()))
        throw UsageError("Tape: invalid Var handle");
    return v.id;
}

Var Tape::push(Tensor2 value, std::function<void(Tape&)> back) {
    Node n;
    n.value = std::move(value);
    n.back = std::move(back);
    nodes_.push_back(std::move(n));
    return Var{static_cast<int>(nodes_.size()) - 1};
}

Var Tape::constant(Tensor2 v) { return push(std::move(v)); }

Var Tape::param(const ParamStore& store, const std::string& name) {
    Var v = push(store.at(name));
    nodes_[v.id].param_name = name;
    return v;
}

double Tape::scalar(Var v) const {
    const Tensor2& t = value(v);
    if (t.rows != 1 || t.cols != 1) throw UsageError("Tape::scalar: node is not 1x1");
    return t.d[0];
}

Var Tape::matmul(Var a, Var b) {
    Tensor2 c = czsl::matmul(value(a), value(b));
    return push(std::move(c), [a, b, out = Var{static_cast<int>(nodes_.size())}](Tape& t) {
        const Tensor2& g = t.grad(out);
        t.grad_mut(a) = czsl::add(t.grad(a), czsl::matmul(g, czsl::transpose(t.value(b))));
        t.grad_mut(b) = czsl::add(t.grad(b), czsl::matmul(czsl::transpose(t.value(a)), g));
    });
}

Var Tape::transpose(Var a) {
    return push(czsl::transpose(value(a)),
                [a, out = Var{static_cast<int>(nodes_.size())}](Tape& t) {
                    t.grad_mut(a) = czsl::add(t.grad(a), czsl::transpose(t.grad(out)));
                });
}

Var Tape::add(Var a, Var b) {
    return push(czsl::add(value(a), value(b)),
                [a, b, out = Var{static_cast<int>(nodes_.size())}](Tape& t) {
                    t.grad_mut(a) = czsl::add(t.grad(a), t.grad(out));
                    t.grad_mut(b) = czsl::add(t.grad(b), t.grad(out));
                });
}

Var Tape::sub(Var a, Var b) {
    return push(czsl::sub(value(a), value(b)),
                [a, b, out = Var{static_cast<int>(nodes_.size())}](Tape& t) {
                    t.grad_mut(a) = czsl::add(t.grad(a), t.grad(out));
                    t.grad_mut(b) = czsl::sub(t.grad(b), t.grad(out));
                });
}

Var Tape::mul(Var a, Var b) {
    return push(czsl::mul(value(a), value(b)),
                [a, b, out = Var{static_cast<int>(nodes_.size())}](Tape& t) {
                    t.grad_mut(a) = czsl::add(t.grad(a), czsl::mul(t.grad(out), t.value(b)));
                    t.grad_mut(b) = czsl::add(t.grad(b), czsl::mul(t.grad(out), t.value(a)));
                });
}

Var Tape::scale(Var a, double c) {
    return push(czsl::scale(value(a), c),
                [a, c, out = Var{static_cast<int>(nodes_.size())}](Tape& t) {
                    t.grad_mut(a) = czsl::add(t.grad(a), czsl::scale(t.grad(out), c));
                });
}

Var Tape::add_rowvec(Var a, Var v) {
    const Tensor2& av = value(a);
    const Tensor2& vv = value(v);
    if (vv.rows != 1 || vv.cols != av.cols)
        throw ConfigError("add_rowvec: expected 1x" + std::to_string(av.cols) + " vector");
    Tensor2 c = av;
    for (int i = 0; i < c.rows; ++i) {
        double* r = c.row(i);
        for (int j = 0; j < c.cols; ++j) r[j] += vv.d[j];
    }
    return push(std::move(c), [a, v, out = Var{static_cast<int>(nodes_.size())}](Tape& t) {
        const Tensor2& g = t.grad(out);
        t.grad_mut(a) = czsl::add(t.grad(a), g);
        Tensor2& gv = t.grad_mut(v);
        for (int i = 0; i < g.rows; ++i) {
            const double* r = g.row(i);
            for (int j = 0; j < g.cols; ++j) gv.d[j] += r[j];
        }
    });
}

Var Tape::scale_rows(Var a, const std::vector<double>& w) {
    const Tensor2& av = value(a);
    if (static_cast<int>(w.size()) != av.rows) throw ConfigError("scale_rows: weight length mismatch");
    Tensor2 c = av;
    for (int i = 0; i < c.rows; ++i) {
        double* r = c.row(i);
        for (int j = 0; j < c.cols; ++j) r[j] *= w[i];
    }
    return push(std::move(c), [a, w, out = Var{static_cast<int>(nodes_.size())}](Tape& t) {
        const Tensor2& g = t.grad(out);
        Tensor2& ga = t.grad_mut(a);
        for (int i = 0; i < g.rows; ++i) {
            const double* r = g.row(i);
            double* gr = ga.row(i);
            for (int j = 0; j < g.cols; ++j) gr[j] += w[i] * r[j];
        }
    });
}

Var Tape::relu(Var a) {
    Tensor2 c = value(a);
    for (auto& x : c.d) x = x > 0.0 ? x : 0.0;
    return push(std::move(c), [a, out = Var{static_cast<int>(nodes_.size())}](Tape& t) {
        const Tensor2& g = t.grad(out);
        const Tensor2& x = t.value(a);
        Tensor2& ga = t.grad_mut(a);
        for (size_t i = 0; i < x.d.size(); ++i)
            if (x.d[i] > 0.0) ga.d[i] += g.d[i];
    });
}

Var Tape::leaky_relu(Var a, double slope) {
    Tensor2 c = value(a);
    for (auto& x : c.d) x = x > 0.0 ? x : slope * x;
    return push(std::move(c), [a, slope, out = Var{static_cast<int>(nodes_.size())}](Tape& t) {
        const Tensor2& g = t.grad(out);
        const Tensor2& x = t.value(a);
        Tensor2& ga = t.grad_mut(a);
        for (size_t i = 0; i < x.d.size(); ++i)
            ga.d[i] += (x.d[i] > 0.0 ? 1.0 : slope) * g.d[i];
    });
}

Var Tape::concat_cols(Var a, Var b) {
    return push(czsl::concat_cols(value(a), value(b)),
                [a, b, out = Var{static_cast<int>(nodes_.size())}](Tape& t) {
                    const Tensor2& g = t.grad(out);
                    Tensor2& ga = t.grad_mut(a);
                    Tensor2& gb = t.grad_mut(b);
                    for (int i = 0; i < g.rows; ++i) {
                        const double* r = g.row(i);
                        double* ra = ga.row(i);
                        double* rb = gb.row(i);
                        for (int j = 0; j < ga.cols; ++j) ra[j] += r[j];
                        for (int j = 0; j < gb.cols; ++j) rb[j] += r[ga.cols + j];
                    }
                });
}

Var Tape::gather_rows(Var a, std::vector<int> ids) {
    Tensor2 c = czsl::gather_rows(value(a), ids);
    return push(std::move(c),
                [a, ids = std::move(ids), out = Var{static_cast<int>(nodes_.size())}](Tape& t) {
                    const Tensor2& g = t.grad(out);
                    Tensor2& ga = t.grad_mut(a);
                    for (size_t i = 0; i < ids.size(); ++i) {
                        const double* r = g.row(static_cast<int>(i));
                        double* dst = ga.row(ids[i]);
                        for (int j = 0; j < g.cols; ++j) dst[j] += r[j];
                    }
                });
}

Var Tape::center_cols(Var a) {
    // H is symmetric and idempotent, so the backward pass is centering again.
    return push(czsl::center_cols(value(a)),
                [a, out = Var{static_cast<int>(nodes_.size())}](Tape& t) {
                    t.grad_mut(a) = czsl::add(t.grad(a), czsl::center_cols(t.grad(out)));
                });
}

Var Tape::sum(Var a) {
    Tensor2 c(1, 1);
    c.d[0] = czsl::sum(value(a));
    return push(std::move(c), [a, out = Var{static_cast<int>(nodes_.size())}](Tape& t) {
        const double g = t.grad(out).d[0];
        Tensor2& ga = t.grad_mut(a);
        for (auto& x : ga.d) x += g;
    });
}

Var Tape::sum_sq(Var a) {
    Tensor2 c(1, 1);
    c.d[0] = czsl::sum_sq(value(a));
    return push(std::move(c), [a, out = Var{static_cast<int>(nodes_.size())}](Tape& t) {
        const double g = t.grad(out).d[0];
        const Tensor2& x = t.value(a);
        Tensor2& ga = t.grad_mut(a);
        for (size_t i = 0; i < x.d.size(); ++i) ga.d[i] += 2.0 * g * x.d[i];
    });
}

Var Tape::mean(Var a) {
    const double n = static_cast<double>(value(a).size());
    if (n == 0) throw DomainError("mean: empty tensor");
    return scale(sum(a), 1.0 / n);
}

Var Tape::row_sq_dist(Var a, Var b) {
    const Tensor2& av = value(a);
    const Tensor2& bv = value(b);
    if (!av.same_shape(bv)) throw ConfigError("row_sq_dist: shape mismatch");
    Tensor2 c(av.rows, 1);
    for (int i = 0; i < av.rows; ++i) {
        double s = 0.0;
        const double* ra = av.row(i);
        const double* rb = bv.row(i);
        for (int j = 0; j < av.cols; ++j) {
            const double dlt = ra[j] - rb[j];
            s += dlt * dlt;
        }
        c(i, 0) = s;
    }
    return push(std::move(c), [a, b, out = Var{static_cast<int>(nodes_.size())}](Tape& t) {
        const Tensor2& g = t.grad(out);
        const Tensor2& av = t.value(a);
        const Tensor2& bv = t.value(b);
        Tensor2& ga = t.grad_mut(a);
        Tensor2& gb = t.grad_mut(b);
        for (int i = 0; i < av.rows; ++i) {
            const double gi = 2.0 * g(i, 0);
            for (int j = 0; j < av.cols; ++j) {
                const double dlt = av(i, j) - bv(i, j);
                ga(i, j) += gi * dlt;
                gb(i, j) -= gi * dlt;
            }
        }
    });
}

Var Tape::softmax_cross_entropy(Var logits, std::vector<int> labels, std::vector<double> weights) {
    const Tensor2& z = value(logits);
    const int n = z.rows;
    const int k = z.cols;
    if (static_cast<int>(labels.size()) != n)
        throw ConfigError("softmax_cross_entropy: label count mismatch");
    if (weights.empty()) weights.assign(n, 1.0);
    if (static_cast<int>(weights.size()) != n)
        throw ConfigError("softmax_cross_entropy: weight count mismatch");

    // Stable log-softmax; stash probabilities for the backward pass.
    Tensor2 probs(n, k);
    double loss = 0.0;
    for (int i = 0; i < n; ++i) {
        if (labels[i] < 0 || labels[i] >= k)
            throw DomainError("softmax_cross_entropy: label out of range");
        const double* r = z.row(i);
        double m = r[0];
        for (int j = 1; j < k; ++j) m = std::max(m, r[j]);
        double se = 0.0;
        for (int j = 0; j < k; ++j) se += std::exp(r[j] - m);
        const double lse = m + std::log(se);
        for (int j = 0; j < k; ++j) probs(i, j) = std::exp(r[j] - lse);
        loss += weights[i] * (lse - r[labels[i]]);
    }
    Tensor2 c(1, 1);
    c.d[0] = loss / n;
    if (!std::isfinite(c.d[0])) throw NumericError("softmax_cross_entropy: non-finite loss");
    return push(std::move(c),
                [logits, labels = std::move(labels), weights = std::move(weights),
                 probs = std::move(probs), out = Var{static_cast<int>(nodes_.size())}](Tape& t) {
                    const double g = t.grad(out).d[0];
                    const int n = probs.rows;
                    Tensor2& gl = t.grad_mut(logits);
                    for (int i = 0; i < n; ++i) {
                        const double w = g * weights[i] / n;
                        for (int j = 0; j < probs.cols; ++j)
                            gl(i, j) += w * (probs(i, j) - (j == labels[i] ? 1.0 : 0.0));
                    }
                });
}

Var Tape::batch_norm(Var x, Var gamma, Var beta, Tensor2& running_mean, Tensor2& running_var,
                     bool train, double momentum, double eps) {
    const Tensor2& xv = value(x);
    const int n = xv.rows;
    const int c = xv.cols;
    const Tensor2& gv = value(gamma);
    if (gv.rows != 1 || gv.cols != c) throw ConfigError("batch_norm: gamma shape mismatch");
    if (running_mean.cols != c || running_var.cols != c)
        throw ConfigError("batch_norm: running stats shape mismatch");

    if (!train) {
        const Tensor2& bv = value(beta);
        Tensor2 y(n, c);
        Tensor2 inv_std(1, c);
        for (int j = 0; j < c; ++j) inv_std.d[j] = 1.0 / std::sqrt(running_var.d[j] + eps);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < c; ++j)
                y(i, j) = gv.d[j] * (xv(i, j) - running_mean.d[j]) * inv_std.d[j] + bv.d[j];
        return push(std::move(y),
                    [x, gamma, beta, inv_std = std::move(inv_std), rm = running_mean,
                     out = Var{static_cast<int>(nodes_.size())}](Tape& t) {
                        const Tensor2& g = t.grad(out);
                        const Tensor2& xv = t.value(x);
                        const Tensor2& gv = t.value(gamma);
                        Tensor2& gx = t.grad_mut(x);
                        Tensor2& gg = t.grad_mut(gamma);
                        Tensor2& gb = t.grad_mut(beta);
                        for (int i = 0; i < g.rows; ++i)
                            for (int j = 0; j < g.cols; ++j) {
                                gx(i, j) += g(i, j) * gv.d[j] * inv_std.d[j];
                                gg.d[j] += g(i, j) * (xv(i, j) - rm.d[j]) * inv_std.d[j];
                                gb.d[j] += g(i, j);
                            }
                    });
    }

    if (n < 2) throw DomainError("batch_norm: train mode needs batch size >= 2");
    Tensor2 mean(1, c), var(1, c);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < c; ++j) mean.d[j] += xv(i, j);
    for (auto& v : mean.d) v /= n;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < c; ++j) {
            const double dlt = xv(i, j) - mean.d[j];
            var.d[j] += dlt * dlt;
        }
    for (auto& v : var.d) v /= n;

    Tensor2 inv_std(1, c);
    for (int j = 0; j < c; ++j) inv_std.d[j] = 1.0 / std::sqrt(var.d[j] + eps);

    Tensor2 xhat(n, c);
    Tensor2 y(n, c);
    const Tensor2& bv = value(beta);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < c; ++j) {
            xhat(i, j) = (xv(i, j) - mean.d[j]) * inv_std.d[j];
            y(i, j) = gv.d[j] * xhat(i, j) + bv.d[j];
        }

    // Running stats track the unbiased batch variance.
    const double unbias = n > 1 ? static_cast<double>(n) / (n - 1) : 1.0;
    for (int j = 0; j < c; ++j) {
        running_mean.d[j] = (1.0 - momentum) * running_mean.d[j] + momentum * mean.d[j];
        running_var.d[j] = (1.0 - momentum) * running_var.d[j] + momentum * var.d[j] * unbias;
    }

    return push(std::move(y),
                [x, gamma, beta, xhat = std::move(xhat), inv_std = std::move(inv_std),
                 out = Var{static_cast<int>(nodes_.size())}](Tape& t) {
                    const Tensor2& g = t.grad(out);
                    const Tensor2& gv = t.value(gamma);
                    const int n = g.rows;
                    const int c = g.cols;
                    Tensor2& gx = t.grad_mut(x);
                    Tensor2& gg = t.grad_mut(gamma);
                    Tensor2& gb = t.grad_mut(beta);
                    std::vector<double> sum_dxhat(c, 0.0), sum_dxhat_xhat(c, 0.0);
                    for (int i = 0; i < n; ++i)
                        for (int j = 0; j < c; ++j) {
                            const double dxhat = g(i, j) * gv.d[j];
                            sum_dxhat[j] += dxhat;
                            sum_dxhat_xhat[j] += dxhat * xhat(i, j);
                            gg.d[j] += g(i, j) * xhat(i, j);
                            gb.d[j] += g(i, j);
                        }
                    for (int i = 0; i < n; ++i)
                        for (int j = 0; j < c; ++j) {
                            const double dxhat = g(i, j) * gv.d[j];
                            gx(i, j) += inv_std.d[j] / n *
                                        (n * dxhat - sum_dxhat[j] - xhat(i, j) * sum_dxhat_xhat[j]);
                        }
                });
}

GradMap Tape::backward(Var loss, const ParamStore* store) {
    if (consumed_) throw UsageError("Tape::backward: tape already consumed");
    consumed_ = true;
    const Tensor2& lv = value(loss);
    if (lv.rows != 1 || lv.cols != 1) throw UsageError("Tape::backward: loss must be a 1x1 scalar");
    if (!std::isfinite(lv.d[0])) throw NumericError("Tape::backward: loss is not finite");

    for (auto& n : nodes_) n.grad = Tensor2::zeros(n.value.rows, n.value.cols);
    nodes_[loss.id].grad.d[0] = 1.0;

    for (int i = loss.id; i >= 0; --i) {
        if (nodes_[i].back) nodes_[i].back(*this);
    }

    GradMap grads;
    for (const auto& n : nodes_) {
        if (n.param_name.empty()) continue;
        auto it = grads.find(n.param_name);
        if (it == grads.end())
            grads.emplace(n.param_name, n.grad);
        else
            it->second = czsl::add(it->second, n.grad);
    }
    if (store) {
        for (const auto& [name, p] : store->params()) {
            if (!grads.count(name)) grads.emplace(name, Tensor2::zeros(p.rows, p.cols));
        }
    }
    return grads;
}

}  // namespace czsl

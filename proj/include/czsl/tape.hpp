#pragma once

#include <functional>
#include <string>
#include <vector>

#include "czsl/params.hpp"
#include "czsl/tensor.hpp"

namespace czsl {

// Handle into a Tape's node list.
struct Var {
    int id = -1;
    bool valid() const { return id >= 0; }
};

// Reverse-mode tape over Tensor2 values. Nodes are appended in topological
// order by construction, so backward() is a single reverse sweep. A tape is
// single-use: backward() consumes it.
class Tape {
  public:
    // Leaf holding a constant (no gradient flows out of it).
    Var constant(Tensor2 v);
    // Leaf tied to a named parameter; its value is copied from the store.
    // Multiple leaves for the same name have their gradients accumulated.
    Var param(const ParamStore& store, const std::string& name);

    const Tensor2& value(Var v) const { return nodes_[check(v)].value; }
    const Tensor2& grad(Var v) const { return nodes_[check(v)].grad; }
    double scalar(Var v) const;

    Var matmul(Var a, Var b);
    Var transpose(Var a);
    Var add(Var a, Var b);
    Var sub(Var a, Var b);
    Var mul(Var a, Var b);
    Var scale(Var a, double c);
    // Add a 1 x cols row vector to every row.
    Var add_rowvec(Var a, Var v);
    // Multiply row i by w[i].
    Var scale_rows(Var a, const std::vector<double>& w);
    Var relu(Var a);
    Var leaky_relu(Var a, double slope);
    Var concat_cols(Var a, Var b);
    Var gather_rows(Var a, std::vector<int> ids);
    // Subtract the per-column mean (apply the centering matrix H on the left).
    Var center_cols(Var a);
    Var sum(Var a);
    Var sum_sq(Var a);
    Var mean(Var a);
    // Per-row squared distance ||a_i - b_i||^2, as an n x 1 column.
    Var row_sq_dist(Var a, Var b);
    // Mean over rows of per-sample softmax cross-entropy against integer labels,
    // optionally weighted per sample (weights are applied before the 1/n mean).
    Var softmax_cross_entropy(Var logits, std::vector<int> labels,
                              std::vector<double> weights = {});
    // Batch normalization over the batch (row) dimension. In train mode uses
    // batch statistics and updates the running buffers in place; in eval mode
    // uses the running buffers.
    Var batch_norm(Var x, Var gamma, Var beta, Tensor2& running_mean, Tensor2& running_var,
                   bool train, double momentum = 0.1, double eps = 1e-5);

    // Seeds d(loss)/d(loss) = 1 and sweeps the tape. `loss` must be 1x1 and
    // finite. Returns gradients keyed by parameter name; when `store` is given,
    // parameters never touched by the computation get zero gradients.
    GradMap backward(Var loss, const ParamStore* store = nullptr);

  private:
    struct Node {
        Tensor2 value;
        Tensor2 grad;
        std::function<void(Tape&)> back;
        std::string param_name;
    };

    int check(Var v) const;
    Var push(Tensor2 value, std::function<void(Tape&)> back = nullptr);
    Tensor2& grad_mut(Var v) { return nodes_[check(v)].grad; }

    std::vector<Node> nodes_;
    bool consumed_ = false;
};

}  // namespace czsl

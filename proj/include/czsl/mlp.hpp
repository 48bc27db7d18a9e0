#pragma once

#include <string>

#include "czsl/params.hpp"
#include "czsl/rng.hpp"
#include "czsl/tape.hpp"
#include "czsl/tensor.hpp"

namespace czsl {

enum class Activation { None, Relu, LeakyRelu };

Activation activation_from_string(const std::string& s);
std::string to_string(Activation a);

// Architecture of one MLP. Zero hidden layers means a single linear map.
struct MlpSpec {
    int input_dim = 0;
    int hidden_dim = 0;
    int num_hidden_layers = 0;
    int output_dim = 0;
    Activation activation = Activation::Relu;
    bool batch_norm = false;       // applied after each hidden linear layer
    double leaky_slope = 0.01;

    void validate() const;
};

// Create (randomly initialized) parameters for `spec` under `prefix` in the store.
void init_mlp(const MlpSpec& spec, const std::string& prefix, ParamStore& store, Rng& rng);

struct MlpOut {
    Var output;
    Var last_hidden;  // activation of the final hidden layer; equals the input node when there are none
};

// Record the forward pass on the tape. In train mode batch-norm uses batch
// statistics and updates the running buffers stored under `prefix`.
MlpOut mlp_forward_rec(Tape& tape, const MlpSpec& spec, const std::string& prefix,
                       ParamStore& store, Var input, bool train);

// Plain forward evaluation (records on a throwaway tape internally).
Tensor2 mlp_forward(const MlpSpec& spec, const std::string& prefix, ParamStore& store,
                    const Tensor2& input, bool train);

}  // namespace czsl

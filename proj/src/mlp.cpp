#include "czsl/mlp.hpp"

#include <cmath>

#include "czsl/error.hpp"

namespace czsl {

Activation activation_from_string(const std::string& s) {
    if (s == "relu") return Activation::Relu;
    if (s == "leaky_relu") return Activation::LeakyRelu;
    if (s == "none") return Activation::None;
    throw ConfigError("unknown activation: " + s);
}

std::string to_string(Activation a) {
    switch (a) {
        case Activation::Relu: return "relu";
        case Activation::LeakyRelu: return "leaky_relu";
        case Activation::None: return "none";
    }
    return "none";
}

void MlpSpec::validate() const {
    if (input_dim <= 0 || output_dim <= 0)
        throw ConfigError("MlpSpec: input_dim and output_dim must be positive");
    if (num_hidden_layers < 0) throw ConfigError("MlpSpec: num_hidden_layers must be >= 0");
    if (num_hidden_layers > 0 && hidden_dim <= 0)
        throw ConfigError("MlpSpec: hidden_dim must be positive with hidden layers");
}

namespace {

std::string layer_name(const std::string& prefix, int layer, const char* what) {
    return prefix + ".layer" + std::to_string(layer) + "." + what;
}

}  // namespace

void init_mlp(const MlpSpec& spec, const std::string& prefix, ParamStore& store, Rng& rng) {
    spec.validate();
    int in = spec.input_dim;
    for (int l = 0; l < spec.num_hidden_layers; ++l) {
        const double std = std::sqrt(2.0 / in);
        store.create(layer_name(prefix, l, "W"), Tensor2::randn(in, spec.hidden_dim, rng, std));
        store.create(layer_name(prefix, l, "b"), Tensor2::zeros(1, spec.hidden_dim));
        if (spec.batch_norm) {
            store.create(layer_name(prefix, l, "bn_gamma"), Tensor2::full(1, spec.hidden_dim, 1.0));
            store.create(layer_name(prefix, l, "bn_beta"), Tensor2::zeros(1, spec.hidden_dim));
            store.create_buffer(layer_name(prefix, l, "bn_mean"), Tensor2::zeros(1, spec.hidden_dim));
            store.create_buffer(layer_name(prefix, l, "bn_var"), Tensor2::full(1, spec.hidden_dim, 1.0));
        }
        in = spec.hidden_dim;
    }
    const double std = std::sqrt(1.0 / in);
    store.create(prefix + ".out.W", Tensor2::randn(in, spec.output_dim, rng, std));
    store.create(prefix + ".out.b", Tensor2::zeros(1, spec.output_dim));
}

MlpOut mlp_forward_rec(Tape& tape, const MlpSpec& spec, const std::string& prefix,
                       ParamStore& store, Var input, bool train) {
    spec.validate();
    if (tape.value(input).cols != spec.input_dim)
        throw ConfigError(prefix + ": input has " + std::to_string(tape.value(input).cols) +
                          " columns, spec expects " + std::to_string(spec.input_dim));
    Var h = input;
    Var last_hidden = input;
    for (int l = 0; l < spec.num_hidden_layers; ++l) {
        Var w = tape.param(store, layer_name(prefix, l, "W"));
        Var b = tape.param(store, layer_name(prefix, l, "b"));
        h = tape.add_rowvec(tape.matmul(h, w), b);
        if (spec.batch_norm) {
            Var gamma = tape.param(store, layer_name(prefix, l, "bn_gamma"));
            Var beta = tape.param(store, layer_name(prefix, l, "bn_beta"));
            h = tape.batch_norm(h, gamma, beta, store.buffer(layer_name(prefix, l, "bn_mean")),
                                store.buffer(layer_name(prefix, l, "bn_var")), train);
        }
        switch (spec.activation) {
            case Activation::Relu: h = tape.relu(h); break;
            case Activation::LeakyRelu: h = tape.leaky_relu(h, spec.leaky_slope); break;
            case Activation::None: break;
        }
        if (!tape.value(h).all_finite())
            throw NumericError(prefix + ": non-finite activation at layer " + std::to_string(l));
        last_hidden = h;
    }
    Var w = tape.param(store, prefix + ".out.W");
    Var b = tape.param(store, prefix + ".out.b");
    Var out = tape.add_rowvec(tape.matmul(h, w), b);
    if (!tape.value(out).all_finite())
        throw NumericError(prefix + ": non-finite activation at output layer");
    return MlpOut{out, last_hidden};
}

Tensor2 mlp_forward(const MlpSpec& spec, const std::string& prefix, ParamStore& store,
                    const Tensor2& input, bool train) {
    Tape tape;
    Var in = tape.constant(input);
    MlpOut out = mlp_forward_rec(tape, spec, prefix, store, in, train);
    return tape.value(out.output);
}

}  // namespace czsl

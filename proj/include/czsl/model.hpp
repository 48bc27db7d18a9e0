#pragma once

#include <string>
#include <vector>

#include "czsl/mlp.hpp"
#include "czsl/params.hpp"
#include "czsl/scm.hpp"
#include "czsl/tape.hpp"

namespace czsl {

enum class Method { Causal, CausalNoIndep, VisProd, VisProdCI, LE };
Method method_from_string(const std::string& s);
std::string to_string(Method m);

// Loss weights and inference weights. The top-level mixture weights are fixed
// to 1; all balancing lives in the per-term lambdas.
struct LossWeights {
    double lambda_oh = 0.1;
    double lambda_rep = 0.1;
    double lambda_icore = 100.0;
    double lambda_ig = 0.0;
    double lambda_ao = 1.0;
    double triplet_margin = 0.5;
    // Inference weights standing in for the (unknown) 1/sigma^2 factors.
    double w_attr = 1.0;
    double w_obj = 1.0;
    double w_x = 1.0;
    bool frequency_weighting = true;

    void validate() const;
};

// Architecture knobs shared by all methods.
struct ModelConfig {
    int hidden_dim = 150;           // d_h; also the core dims d_A, d_O by default
    int core_dim = 0;               // 0 means "use hidden_dim"
    int embed_layers = 1;           // hidden layers of h_A / h_O (0 = linear embedding)
    int inverse_layers = 2;         // hidden layers of g_A^-1 / g_O^-1
    int gen_layers = 2;             // hidden layers of g
    int classifier_layers = 2;      // hidden layers of the VisProd heads
    bool projection = false;        // learned linear map from raw features to X
    int projection_dim = 0;         // 0 means keep the input dimension

    int effective_core_dim() const { return core_dim > 0 ? core_dim : hidden_dim; }
};

// One model instance: the five causal mappings plus heads, or the baseline
// networks, depending on `method`. All parameters live in `params`.
struct Model {
    Method method = Method::Causal;
    PairVocabulary vocab;
    ModelConfig config;
    int input_dim = 0;    // raw feature dimension
    int feature_dim = 0;  // X-space dimension (== input_dim unless projected)
    ParamStore params;

    MlpSpec h_attr, h_obj, gen, inv_attr, inv_obj;       // causal mappings
    MlpSpec head_attr, head_obj, head_gen_attr, head_gen_obj;  // linear invert heads
    MlpSpec clf_attr, clf_obj;                           // VisProd classifiers
    MlpSpec img_proj, label_emb;                         // LE networks
    MlpSpec proj;                                        // optional raw-feature projection
    bool has_projection = false;

    void save(const std::string& checkpoint_path, const std::string& sidecar_path,
              const LossWeights& weights) const;
    static Model load(const std::string& checkpoint_path, const std::string& sidecar_path,
                      LossWeights* weights_out = nullptr);
};

Model make_model(Method method, const PairVocabulary& vocab, int input_dim,
                 const ModelConfig& config, uint64_t seed);

// --- data plumbing --------------------------------------------------------

struct Batch {
    Tensor2 x;
    std::vector<int> attr_ids;
    std::vector<int> obj_ids;
    int size() const { return x.rows; }
};

Batch make_batch(const FeatureDataset& data, const std::vector<int>& rows);

// Per-sample loss weights from inverse label frequency, normalized to mean 1
// over the given reference counts.
std::vector<double> frequency_weights(const std::vector<int>& labels,
                                      const std::vector<double>& label_freq);
// Label frequencies (counts / total) over the train split.
std::vector<double> label_frequencies(const std::vector<int>& labels, int num_classes);

// Training-time context: negative sampling and frequency weights.
struct TrainContext {
    std::vector<int> seen_pairs;
    std::vector<double> attr_freq;  // train-set attribute frequencies
    std::vector<double> obj_freq;
    Rng* neg_rng = nullptr;

    static TrainContext make(const FeatureDataset& data, const SplitSpec& split,
                             const PairVocabulary& vocab, Rng* neg_rng);
};

// --- causal model forward & losses ----------------------------------------

struct CausalNodes {
    Var x;        // in X space (after projection when present)
    Var h_a;      // per-sample attribute prototypes, n x d_A
    Var h_o;
    Var phi_a;    // recovered cores g_A^-1(x)
    Var phi_o;
    Var gen_pos;  // g([h_a ; h_o]) per sample
};
CausalNodes causal_forward(Tape& tape, Model& model, const Batch& batch, bool train);

// Recovered cores (phi_a, phi_o) = (g_A^-1(x), g_O^-1(x)); eval-mode batch norm
// unless train is set. x must be raw features; projection is applied inside.
struct CoreBatch {
    Tensor2 phi_a;
    Tensor2 phi_o;
};
CoreBatch recover_cores(Model& model, const Tensor2& x, bool train = false);

Var loss_data_rec(Tape& tape, Model& model, const CausalNodes& nodes, const Batch& batch,
                  const LossWeights& weights, TrainContext& ctx);
Var loss_invert_rec(Tape& tape, Model& model, const CausalNodes& nodes, const Batch& batch,
                    const LossWeights& weights, TrainContext& ctx);
Var loss_indep_model_rec(Tape& tape, Model& model, const CausalNodes& nodes, const Batch& batch,
                         const LossWeights& weights);
Var total_loss_rec(Tape& tape, Model& model, const Batch& batch, const LossWeights& weights,
                   TrainContext& ctx, bool train);

// Scalar convenience wrappers (fresh tape, no gradient).
double loss_data(Model& model, const Batch& batch, const LossWeights& weights, TrainContext& ctx);
double loss_invert(Model& model, const Batch& batch, const LossWeights& weights, TrainContext& ctx);
double total_loss(Model& model, const Batch& batch, const LossWeights& weights, TrainContext& ctx);

// --- baseline losses -------------------------------------------------------

Var visprod_loss_rec(Tape& tape, Model& model, const Batch& batch, const LossWeights& weights,
                     bool train);
Var le_loss_rec(Tape& tape, Model& model, const Batch& batch, const LossWeights& weights,
                TrainContext& ctx, bool train);

// Single entry point used by the trainer.
Var method_loss_rec(Tape& tape, Model& model, const Batch& batch, const LossWeights& weights,
                    TrainContext& ctx, bool train);

// --- scoring ---------------------------------------------------------------

// Per-sample, per-candidate scores; higher is better.
struct ScoreMatrix {
    Tensor2 scores;                // batch x |candidates|
    std::vector<int> candidates;   // pair ids
};

// Negated weighted squared-distance sum of the interventional NLL, from
// explicit ingredients. `cand_h_a`, `cand_h_o`, `cand_gx` hold one row per
// candidate pair.
ScoreMatrix score_pairs_raw(const Tensor2& phi_a, const Tensor2& phi_o, const Tensor2& x,
                            const Tensor2& cand_h_a, const Tensor2& cand_h_o,
                            const Tensor2& cand_gx, const std::vector<int>& candidates,
                            const LossWeights& weights);

// Model-level scoring dispatch (causal NLL, VisProd log-probs, or LE distance).
ScoreMatrix score_pairs(Model& model, const Tensor2& x, const std::vector<int>& candidates,
                        const LossWeights& weights);

// Argmax per row; ties break toward the lowest pair id.
std::vector<int> predict(const ScoreMatrix& scores);

// Ground-truth-table scorer over an SCM instance (Bayes-style oracle used to
// check generator/scorer consistency).
ScoreMatrix oracle_score_pairs(const ScmInstance& inst, const Tensor2& x,
                               const std::vector<int>& candidates, const LossWeights& weights);

}  // namespace czsl

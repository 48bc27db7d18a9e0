#include "czsl/model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

#include <nlohmann/json.hpp>

#include "czsl/error.hpp"
#include "czsl/hsic.hpp"

namespace czsl {

using nlohmann::json;

Method method_from_string(const std::string& s) {
    if (s == "causal") return Method::Causal;
    if (s == "causal_no_indep") return Method::CausalNoIndep;
    if (s == "visprod") return Method::VisProd;
    if (s == "visprod_ci") return Method::VisProdCI;
    if (s == "le") return Method::LE;
    throw ConfigError("unknown method: " + s);
}

std::string to_string(Method m) {
    switch (m) {
        case Method::Causal: return "causal";
        case Method::CausalNoIndep: return "causal_no_indep";
        case Method::VisProd: return "visprod";
        case Method::VisProdCI: return "visprod_ci";
        case Method::LE: return "le";
    }
    return "causal";
}

void LossWeights::validate() const {
    if (lambda_oh < 0 || lambda_rep < 0 || lambda_icore < 0 || lambda_ig < 0 || lambda_ao < 0)
        throw ConfigError("LossWeights: lambdas must be nonnegative");
    if (!(triplet_margin > 0) || !std::isfinite(triplet_margin))
        throw ConfigError("LossWeights: triplet margin must be positive and finite");
    if (w_attr < 0 || w_obj < 0 || w_x < 0)
        throw ConfigError("LossWeights: inference weights must be nonnegative");
}

namespace {

bool is_causal(Method m) { return m == Method::Causal || m == Method::CausalNoIndep; }

MlpSpec linear_head(int in, int out) {
    MlpSpec s;
    s.input_dim = in;
    s.output_dim = out;
    s.num_hidden_layers = 0;
    s.activation = Activation::None;
    return s;
}

}  // namespace

Model make_model(Method method, const PairVocabulary& vocab, int input_dim,
                 const ModelConfig& config, uint64_t seed) {
    vocab.validate();
    if (input_dim <= 0) throw ConfigError("make_model: input_dim must be positive");
    Model m;
    m.method = method;
    m.vocab = vocab;
    m.config = config;
    m.input_dim = input_dim;
    m.has_projection = config.projection;
    m.feature_dim = m.has_projection
                        ? (config.projection_dim > 0 ? config.projection_dim : input_dim)
                        : input_dim;

    const int dh = config.hidden_dim;
    const int dc = config.effective_core_dim();
    const int na = vocab.num_attrs();
    const int no = vocab.num_objs();

    Rng rng(seed);
    if (m.has_projection) {
        m.proj = linear_head(input_dim, m.feature_dim);
        init_mlp(m.proj, "proj", m.params, rng);
    }

    if (is_causal(method)) {
        m.h_attr = MlpSpec{na, dh, config.embed_layers, dc, Activation::Relu, false};
        m.h_obj = MlpSpec{no, dh, config.embed_layers, dc, Activation::Relu, false};
        m.gen = MlpSpec{2 * dc, dh, config.gen_layers, m.feature_dim, Activation::Relu, false};
        m.inv_attr =
            MlpSpec{m.feature_dim, dh, config.inverse_layers, dc, Activation::LeakyRelu, true};
        m.inv_obj =
            MlpSpec{m.feature_dim, dh, config.inverse_layers, dc, Activation::LeakyRelu, true};
        m.head_attr = linear_head(dc, na);
        m.head_obj = linear_head(dc, no);
        m.head_gen_attr = linear_head(m.feature_dim, na);
        m.head_gen_obj = linear_head(m.feature_dim, no);
        init_mlp(m.h_attr, "h_attr", m.params, rng);
        init_mlp(m.h_obj, "h_obj", m.params, rng);
        init_mlp(m.gen, "gen", m.params, rng);
        init_mlp(m.inv_attr, "inv_attr", m.params, rng);
        init_mlp(m.inv_obj, "inv_obj", m.params, rng);
        init_mlp(m.head_attr, "head_attr", m.params, rng);
        init_mlp(m.head_obj, "head_obj", m.params, rng);
        init_mlp(m.head_gen_attr, "head_gen_attr", m.params, rng);
        init_mlp(m.head_gen_obj, "head_gen_obj", m.params, rng);
    } else if (method == Method::VisProd || method == Method::VisProdCI) {
        m.clf_attr =
            MlpSpec{m.feature_dim, dh, config.classifier_layers, na, Activation::Relu, false};
        m.clf_obj =
            MlpSpec{m.feature_dim, dh, config.classifier_layers, no, Activation::Relu, false};
        init_mlp(m.clf_attr, "clf_attr", m.params, rng);
        init_mlp(m.clf_obj, "clf_obj", m.params, rng);
    } else {
        m.img_proj = MlpSpec{m.feature_dim, dh, 1, dh, Activation::Relu, false};
        m.label_emb = MlpSpec{na + no, dh, 1, dh, Activation::Relu, false};
        init_mlp(m.img_proj, "img_proj", m.params, rng);
        init_mlp(m.label_emb, "label_emb", m.params, rng);
    }
    return m;
}

void Model::save(const std::string& checkpoint_path, const std::string& sidecar_path,
                 const LossWeights& weights) const {
    params.save(checkpoint_path);
    json j;
    j["method"] = czsl::to_string(method);
    j["attrs"] = vocab.attrs;
    j["objs"] = vocab.objs;
    j["input_dim"] = input_dim;
    j["config"] = {{"hidden_dim", config.hidden_dim},
                   {"core_dim", config.core_dim},
                   {"embed_layers", config.embed_layers},
                   {"inverse_layers", config.inverse_layers},
                   {"gen_layers", config.gen_layers},
                   {"classifier_layers", config.classifier_layers},
                   {"projection", config.projection},
                   {"projection_dim", config.projection_dim}};
    j["loss_weights"] = {{"lambda_oh", weights.lambda_oh},
                         {"lambda_rep", weights.lambda_rep},
                         {"lambda_icore", weights.lambda_icore},
                         {"lambda_ig", weights.lambda_ig},
                         {"lambda_ao", weights.lambda_ao},
                         {"triplet_margin", weights.triplet_margin},
                         {"w_attr", weights.w_attr},
                         {"w_obj", weights.w_obj},
                         {"w_x", weights.w_x},
                         {"frequency_weighting", weights.frequency_weighting}};
    std::ofstream out(sidecar_path);
    if (!out) throw LoadError("cannot write model sidecar: " + sidecar_path);
    out << j.dump(2) << "\n";
}

Model Model::load(const std::string& checkpoint_path, const std::string& sidecar_path,
                  LossWeights* weights_out) {
    std::ifstream in(sidecar_path);
    if (!in) throw LoadError("cannot open model sidecar: " + sidecar_path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw LoadError("model sidecar is not valid JSON: " + std::string(e.what()));
    }
    PairVocabulary vocab;
    vocab.attrs = j.at("attrs").get<std::vector<std::string>>();
    vocab.objs = j.at("objs").get<std::vector<std::string>>();
    ModelConfig cfg;
    const json& c = j.at("config");
    cfg.hidden_dim = c.at("hidden_dim").get<int>();
    cfg.core_dim = c.at("core_dim").get<int>();
    cfg.embed_layers = c.at("embed_layers").get<int>();
    cfg.inverse_layers = c.at("inverse_layers").get<int>();
    cfg.gen_layers = c.at("gen_layers").get<int>();
    cfg.classifier_layers = c.at("classifier_layers").get<int>();
    cfg.projection = c.at("projection").get<bool>();
    cfg.projection_dim = c.at("projection_dim").get<int>();
    Model m = make_model(method_from_string(j.at("method").get<std::string>()), vocab,
                         j.at("input_dim").get<int>(), cfg, 0);
    ParamStore loaded = ParamStore::load(checkpoint_path);
    for (const auto& name : m.params.param_names()) {
        if (!loaded.has(name)) throw LoadError("checkpoint is missing parameter " + name);
        if (!loaded.at(name).same_shape(m.params.at(name)))
            throw LoadError("checkpoint shape mismatch for " + name);
    }
    m.params = std::move(loaded);
    if (weights_out) {
        const json& w = j.at("loss_weights");
        weights_out->lambda_oh = w.at("lambda_oh").get<double>();
        weights_out->lambda_rep = w.at("lambda_rep").get<double>();
        weights_out->lambda_icore = w.at("lambda_icore").get<double>();
        weights_out->lambda_ig = w.at("lambda_ig").get<double>();
        weights_out->lambda_ao = w.at("lambda_ao").get<double>();
        weights_out->triplet_margin = w.at("triplet_margin").get<double>();
        weights_out->w_attr = w.at("w_attr").get<double>();
        weights_out->w_obj = w.at("w_obj").get<double>();
        weights_out->w_x = w.at("w_x").get<double>();
        weights_out->frequency_weighting = w.at("frequency_weighting").get<bool>();
    }
    return m;
}

// --- data plumbing --------------------------------------------------------

Batch make_batch(const FeatureDataset& data, const std::vector<int>& rows) {
    Batch b;
    b.x = gather_rows(data.features, rows);
    b.attr_ids.reserve(rows.size());
    b.obj_ids.reserve(rows.size());
    for (int r : rows) {
        b.attr_ids.push_back(data.attr_ids[r]);
        b.obj_ids.push_back(data.obj_ids[r]);
    }
    return b;
}

std::vector<double> label_frequencies(const std::vector<int>& labels, int num_classes) {
    std::vector<double> freq(num_classes, 0.0);
    for (int l : labels) {
        if (l < 0 || l >= num_classes) throw DomainError("label_frequencies: label out of range");
        freq[l] += 1.0;
    }
    for (auto& f : freq) f /= static_cast<double>(labels.size());
    return freq;
}

std::vector<double> frequency_weights(const std::vector<int>& labels,
                                      const std::vector<double>& label_freq) {
    std::vector<double> w(labels.size());
    double total = 0.0;
    for (size_t i = 0; i < labels.size(); ++i) {
        const double f = label_freq[labels[i]];
        if (f <= 0.0) throw DomainError("frequency_weights: zero frequency for present label");
        w[i] = 1.0 / f;
        total += w[i];
    }
    const double mean = total / static_cast<double>(labels.size());
    for (auto& v : w) v /= mean;
    return w;
}

TrainContext TrainContext::make(const FeatureDataset& data, const SplitSpec& split,
                                const PairVocabulary& vocab, Rng* neg_rng) {
    TrainContext ctx;
    ctx.seen_pairs = split.seen;
    ctx.neg_rng = neg_rng;
    const std::vector<int> train_rows = data.rows_with_tag(SplitTag::Train);
    std::vector<int> attrs, objs;
    for (int r : train_rows) {
        attrs.push_back(data.attr_ids[r]);
        objs.push_back(data.obj_ids[r]);
    }
    if (!train_rows.empty()) {
        ctx.attr_freq = label_frequencies(attrs, vocab.num_attrs());
        ctx.obj_freq = label_frequencies(objs, vocab.num_objs());
    }
    return ctx;
}

// --- causal model forward & losses ----------------------------------------

namespace {

Var project_input(Tape& tape, Model& model, Var raw) {
    if (!model.has_projection) return raw;
    return mlp_forward_rec(tape, model.proj, "proj", model.params, raw, false).output;
}

void check_seen_batch(const Model& model, const Batch& batch, const TrainContext& ctx) {
    std::set<int> seen(ctx.seen_pairs.begin(), ctx.seen_pairs.end());
    for (int i = 0; i < batch.size(); ++i) {
        if (!seen.count(model.vocab.pair_id(batch.attr_ids[i], batch.obj_ids[i])))
            throw ConfigError("training batch contains an unseen pair at row " + std::to_string(i));
    }
}

// One uniformly sampled seen pair different from the positive, per sample.
void sample_negatives(const Batch& batch, const Model& model, TrainContext& ctx,
                      std::vector<int>& neg_attr, std::vector<int>& neg_obj) {
    if (!ctx.neg_rng) throw UsageError("TrainContext: negative sampler rng not set");
    const int k = static_cast<int>(ctx.seen_pairs.size());
    if (k < 2) throw DomainError("negative sampling needs at least 2 seen pairs");
    neg_attr.resize(batch.size());
    neg_obj.resize(batch.size());
    for (int i = 0; i < batch.size(); ++i) {
        const int pos = model.vocab.pair_id(batch.attr_ids[i], batch.obj_ids[i]);
        int idx = ctx.neg_rng->uniform_int(k - 1);
        if (ctx.seen_pairs[idx] == pos) idx = k - 1;
        const auto [a, o] = model.vocab.pair_labels(ctx.seen_pairs[idx]);
        neg_attr[i] = a;
        neg_obj[i] = o;
    }
}

}  // namespace

CausalNodes causal_forward(Tape& tape, Model& model, const Batch& batch, bool train) {
    if (!is_causal(model.method)) throw UsageError("causal_forward: model is not a causal model");
    CausalNodes nodes;
    Var raw = tape.constant(batch.x);
    nodes.x = project_input(tape, model, raw);
    Var oh_a = tape.constant(one_hot(batch.attr_ids, model.vocab.num_attrs()));
    Var oh_o = tape.constant(one_hot(batch.obj_ids, model.vocab.num_objs()));
    nodes.h_a = mlp_forward_rec(tape, model.h_attr, "h_attr", model.params, oh_a, train).output;
    nodes.h_o = mlp_forward_rec(tape, model.h_obj, "h_obj", model.params, oh_o, train).output;
    nodes.phi_a = mlp_forward_rec(tape, model.inv_attr, "inv_attr", model.params, nodes.x, train).output;
    nodes.phi_o = mlp_forward_rec(tape, model.inv_obj, "inv_obj", model.params, nodes.x, train).output;
    Var hh = tape.concat_cols(nodes.h_a, nodes.h_o);
    nodes.gen_pos = mlp_forward_rec(tape, model.gen, "gen", model.params, hh, train).output;
    return nodes;
}

CoreBatch recover_cores(Model& model, const Tensor2& x, bool train) {
    Tape tape;
    Var raw = tape.constant(x);
    Var xin = project_input(tape, model, raw);
    Var pa = mlp_forward_rec(tape, model.inv_attr, "inv_attr", model.params, xin, train).output;
    Var po = mlp_forward_rec(tape, model.inv_obj, "inv_obj", model.params, xin, train).output;
    return CoreBatch{tape.value(pa), tape.value(po)};
}

Var loss_data_rec(Tape& tape, Model& model, const CausalNodes& nodes, const Batch& batch,
                  const LossWeights& weights, TrainContext& ctx) {
    weights.validate();
    check_seen_batch(model, batch, ctx);

    // Embedding terms, optionally reweighted by inverse batch label frequency
    // (normalized to mean 1, so a balanced batch matches the unweighted loss).
    Var da = tape.row_sq_dist(nodes.h_a, nodes.phi_a);
    Var dob = tape.row_sq_dist(nodes.h_o, nodes.phi_o);
    if (weights.frequency_weighting) {
        const auto fa = label_frequencies(batch.attr_ids, model.vocab.num_attrs());
        const auto fo = label_frequencies(batch.obj_ids, model.vocab.num_objs());
        da = tape.scale_rows(da, frequency_weights(batch.attr_ids, fa));
        dob = tape.scale_rows(dob, frequency_weights(batch.obj_ids, fo));
    }
    Var loss = tape.add(tape.mean(da), tape.mean(dob));

    if (weights.lambda_ao > 0.0) {
        std::vector<int> neg_attr, neg_obj;
        sample_negatives(batch, model, ctx, neg_attr, neg_obj);
        Var oh_na = tape.constant(one_hot(neg_attr, model.vocab.num_attrs()));
        Var oh_no = tape.constant(one_hot(neg_obj, model.vocab.num_objs()));
        Var h_na = mlp_forward_rec(tape, model.h_attr, "h_attr", model.params, oh_na, false).output;
        Var h_no = mlp_forward_rec(tape, model.h_obj, "h_obj", model.params, oh_no, false).output;
        Var gen_neg =
            mlp_forward_rec(tape, model.gen, "gen", model.params, tape.concat_cols(h_na, h_no), false)
                .output;
        Var d_pos = tape.row_sq_dist(nodes.x, nodes.gen_pos);
        Var d_neg = tape.row_sq_dist(nodes.x, gen_neg);
        Var margin = tape.constant(Tensor2::full(batch.size(), 1, weights.triplet_margin));
        Var hinge = tape.relu(tape.add(tape.sub(d_pos, d_neg), margin));
        loss = tape.add(loss, tape.scale(tape.mean(hinge), weights.lambda_ao));
    }
    return loss;
}

Var loss_invert_rec(Tape& tape, Model& model, const CausalNodes& nodes, const Batch& batch,
                    const LossWeights& weights, TrainContext& ctx) {
    weights.validate();
    check_seen_batch(model, batch, ctx);
    Var total;
    auto accumulate = [&](Var v) { total = total.valid() ? tape.add(total, v) : v; };
    if (weights.lambda_icore > 0.0) {
        Var la = mlp_forward_rec(tape, model.head_attr, "head_attr", model.params, nodes.h_a, false)
                     .output;
        Var lo = mlp_forward_rec(tape, model.head_obj, "head_obj", model.params, nodes.h_o, false)
                     .output;
        Var ce = tape.add(tape.softmax_cross_entropy(la, batch.attr_ids),
                          tape.softmax_cross_entropy(lo, batch.obj_ids));
        accumulate(tape.scale(ce, weights.lambda_icore));
    }
    if (weights.lambda_ig > 0.0) {
        Var la = mlp_forward_rec(tape, model.head_gen_attr, "head_gen_attr", model.params,
                                 nodes.gen_pos, false)
                     .output;
        Var lo = mlp_forward_rec(tape, model.head_gen_obj, "head_gen_obj", model.params,
                                 nodes.gen_pos, false)
                     .output;
        Var ce = tape.add(tape.softmax_cross_entropy(la, batch.attr_ids),
                          tape.softmax_cross_entropy(lo, batch.obj_ids));
        accumulate(tape.scale(ce, weights.lambda_ig));
    }
    if (!total.valid()) return tape.constant(Tensor2::zeros(1, 1));
    return total;
}

Var loss_indep_model_rec(Tape& tape, Model& model, const CausalNodes& nodes, const Batch& batch,
                         const LossWeights& weights) {
    Var oh_a = tape.constant(one_hot(batch.attr_ids, model.vocab.num_attrs()));
    Var oh_o = tape.constant(one_hot(batch.obj_ids, model.vocab.num_objs()));
    return loss_indep_rec(tape, nodes.phi_a, nodes.phi_o, oh_a, oh_o, batch.attr_ids,
                          batch.obj_ids, weights.lambda_oh, weights.lambda_rep);
}

Var total_loss_rec(Tape& tape, Model& model, const Batch& batch, const LossWeights& weights,
                   TrainContext& ctx, bool train) {
    LossWeights w = weights;
    if (model.method == Method::CausalNoIndep) {
        w.lambda_oh = 0.0;
        w.lambda_rep = 0.0;
    }
    CausalNodes nodes = causal_forward(tape, model, batch, train);
    Var loss = loss_data_rec(tape, model, nodes, batch, w, ctx);
    loss = tape.add(loss, loss_indep_model_rec(tape, model, nodes, batch, w));
    loss = tape.add(loss, loss_invert_rec(tape, model, nodes, batch, w, ctx));
    return loss;
}

double loss_data(Model& model, const Batch& batch, const LossWeights& weights, TrainContext& ctx) {
    Tape tape;
    CausalNodes nodes = causal_forward(tape, model, batch, false);
    return tape.scalar(loss_data_rec(tape, model, nodes, batch, weights, ctx));
}

double loss_invert(Model& model, const Batch& batch, const LossWeights& weights,
                   TrainContext& ctx) {
    Tape tape;
    CausalNodes nodes = causal_forward(tape, model, batch, false);
    return tape.scalar(loss_invert_rec(tape, model, nodes, batch, weights, ctx));
}

double total_loss(Model& model, const Batch& batch, const LossWeights& weights,
                  TrainContext& ctx) {
    Tape tape;
    return tape.scalar(total_loss_rec(tape, model, batch, weights, ctx, false));
}

// --- baseline losses -------------------------------------------------------

Var visprod_loss_rec(Tape& tape, Model& model, const Batch& batch, const LossWeights& weights,
                     bool train) {
    Var raw = tape.constant(batch.x);
    Var x = project_input(tape, model, raw);
    MlpOut a = mlp_forward_rec(tape, model.clf_attr, "clf_attr", model.params, x, train);
    MlpOut o = mlp_forward_rec(tape, model.clf_obj, "clf_obj", model.params, x, train);
    Var loss = tape.add(tape.softmax_cross_entropy(a.output, batch.attr_ids),
                        tape.softmax_cross_entropy(o.output, batch.obj_ids));
    if (model.method == Method::VisProdCI && (weights.lambda_oh > 0 || weights.lambda_rep > 0)) {
        // Penultimate activations stand in for the recovered cores.
        Var oh_a = tape.constant(one_hot(batch.attr_ids, model.vocab.num_attrs()));
        Var oh_o = tape.constant(one_hot(batch.obj_ids, model.vocab.num_objs()));
        Var indep = loss_indep_rec(tape, a.last_hidden, o.last_hidden, oh_a, oh_o, batch.attr_ids,
                                   batch.obj_ids, weights.lambda_oh, weights.lambda_rep);
        loss = tape.add(loss, indep);
    }
    return loss;
}

Var le_loss_rec(Tape& tape, Model& model, const Batch& batch, const LossWeights& weights,
                TrainContext& ctx, bool train) {
    Var raw = tape.constant(batch.x);
    Var x = project_input(tape, model, raw);
    Var px = mlp_forward_rec(tape, model.img_proj, "img_proj", model.params, x, train).output;

    auto embed = [&](const std::vector<int>& attrs, const std::vector<int>& objs) {
        Tensor2 oh = concat_cols(one_hot(attrs, model.vocab.num_attrs()),
                                 one_hot(objs, model.vocab.num_objs()));
        return mlp_forward_rec(tape, model.label_emb, "label_emb", model.params,
                               tape.constant(std::move(oh)), train)
            .output;
    };

    Var e_pos = embed(batch.attr_ids, batch.obj_ids);
    std::vector<int> neg_attr, neg_obj;
    sample_negatives(batch, model, ctx, neg_attr, neg_obj);
    Var e_neg = embed(neg_attr, neg_obj);

    Var d_pos = tape.row_sq_dist(px, e_pos);
    Var d_neg = tape.row_sq_dist(px, e_neg);
    Var margin = tape.constant(Tensor2::full(batch.size(), 1, weights.triplet_margin));
    return tape.mean(tape.relu(tape.add(tape.sub(d_pos, d_neg), margin)));
}

Var method_loss_rec(Tape& tape, Model& model, const Batch& batch, const LossWeights& weights,
                    TrainContext& ctx, bool train) {
    switch (model.method) {
        case Method::Causal:
        case Method::CausalNoIndep:
            return total_loss_rec(tape, model, batch, weights, ctx, train);
        case Method::VisProd: {
            LossWeights w = weights;
            w.lambda_oh = 0.0;
            w.lambda_rep = 0.0;
            return visprod_loss_rec(tape, model, batch, w, train);
        }
        case Method::VisProdCI:
            return visprod_loss_rec(tape, model, batch, weights, train);
        case Method::LE:
            return le_loss_rec(tape, model, batch, weights, ctx, train);
    }
    throw UsageError("method_loss_rec: unreachable");
}

// --- scoring ---------------------------------------------------------------

ScoreMatrix score_pairs_raw(const Tensor2& phi_a, const Tensor2& phi_o, const Tensor2& x,
                            const Tensor2& cand_h_a, const Tensor2& cand_h_o,
                            const Tensor2& cand_gx, const std::vector<int>& candidates,
                            const LossWeights& weights) {
    if (candidates.empty()) throw DomainError("score_pairs: empty candidate list");
    const int n = x.rows;
    const int k = static_cast<int>(candidates.size());
    if (cand_h_a.rows != k || cand_h_o.rows != k || cand_gx.rows != k)
        throw ConfigError("score_pairs: candidate table row mismatch");
    ScoreMatrix sm;
    sm.candidates = candidates;
    sm.scores = Tensor2(n, k);
    for (int i = 0; i < n; ++i) {
        for (int c = 0; c < k; ++c) {
            double s = 0.0;
            if (weights.w_attr > 0) {
                double d = 0.0;
                for (int j = 0; j < phi_a.cols; ++j) {
                    const double e = phi_a(i, j) - cand_h_a(c, j);
                    d += e * e;
                }
                s += weights.w_attr * d;
            }
            if (weights.w_obj > 0) {
                double d = 0.0;
                for (int j = 0; j < phi_o.cols; ++j) {
                    const double e = phi_o(i, j) - cand_h_o(c, j);
                    d += e * e;
                }
                s += weights.w_obj * d;
            }
            if (weights.w_x > 0) {
                double d = 0.0;
                for (int j = 0; j < x.cols; ++j) {
                    const double e = x(i, j) - cand_gx(c, j);
                    d += e * e;
                }
                s += weights.w_x * d;
            }
            sm.scores(i, c) = -s;
        }
    }
    return sm;
}

namespace {

void candidate_labels(const PairVocabulary& vocab, const std::vector<int>& candidates,
                      std::vector<int>& attrs, std::vector<int>& objs) {
    attrs.clear();
    objs.clear();
    for (int pid : candidates) {
        const auto [a, o] = vocab.pair_labels(pid);
        attrs.push_back(a);
        objs.push_back(o);
    }
}

Tensor2 log_softmax_rows(const Tensor2& z) {
    Tensor2 out = z;
    for (int i = 0; i < z.rows; ++i) {
        const double* r = z.row(i);
        double m = r[0];
        for (int j = 1; j < z.cols; ++j) m = std::max(m, r[j]);
        double se = 0.0;
        for (int j = 0; j < z.cols; ++j) se += std::exp(r[j] - m);
        const double lse = m + std::log(se);
        double* ro = out.row(i);
        for (int j = 0; j < z.cols; ++j) ro[j] = r[j] - lse;
    }
    return out;
}

}  // namespace

ScoreMatrix score_pairs(Model& model, const Tensor2& x, const std::vector<int>& candidates,
                        const LossWeights& weights) {
    if (candidates.empty()) throw DomainError("score_pairs: empty candidate list");
    std::vector<int> cand_attrs, cand_objs;
    candidate_labels(model.vocab, candidates, cand_attrs, cand_objs);

    if (is_causal(model.method)) {
        Tape tape;
        Var raw = tape.constant(x);
        Var xin = project_input(tape, model, raw);
        Var oh_a = tape.constant(one_hot(cand_attrs, model.vocab.num_attrs()));
        Var oh_o = tape.constant(one_hot(cand_objs, model.vocab.num_objs()));
        Var h_a = mlp_forward_rec(tape, model.h_attr, "h_attr", model.params, oh_a, false).output;
        Var h_o = mlp_forward_rec(tape, model.h_obj, "h_obj", model.params, oh_o, false).output;
        Var gx = mlp_forward_rec(tape, model.gen, "gen", model.params, tape.concat_cols(h_a, h_o),
                                 false)
                     .output;
        Var pa = mlp_forward_rec(tape, model.inv_attr, "inv_attr", model.params, xin, false).output;
        Var po = mlp_forward_rec(tape, model.inv_obj, "inv_obj", model.params, xin, false).output;
        return score_pairs_raw(tape.value(pa), tape.value(po), tape.value(xin), tape.value(h_a),
                               tape.value(h_o), tape.value(gx), candidates, weights);
    }

    if (model.method == Method::VisProd || model.method == Method::VisProdCI) {
        Tape tape;
        Var raw = tape.constant(x);
        Var xin = project_input(tape, model, raw);
        const Tensor2 lsm_a = log_softmax_rows(tape.value(
            mlp_forward_rec(tape, model.clf_attr, "clf_attr", model.params, xin, false).output));
        const Tensor2 lsm_o = log_softmax_rows(tape.value(
            mlp_forward_rec(tape, model.clf_obj, "clf_obj", model.params, xin, false).output));
        ScoreMatrix sm;
        sm.candidates = candidates;
        sm.scores = Tensor2(x.rows, static_cast<int>(candidates.size()));
        for (int i = 0; i < x.rows; ++i)
            for (size_t c = 0; c < candidates.size(); ++c)
                sm.scores(i, static_cast<int>(c)) =
                    lsm_a(i, cand_attrs[c]) + lsm_o(i, cand_objs[c]);
        return sm;
    }

    // LE: negated squared distance in the joint embedding space.
    Tape tape;
    Var raw = tape.constant(x);
    Var xin = project_input(tape, model, raw);
    const Tensor2 px = tape.value(
        mlp_forward_rec(tape, model.img_proj, "img_proj", model.params, xin, false).output);
    Tensor2 oh = concat_cols(one_hot(cand_attrs, model.vocab.num_attrs()),
                             one_hot(cand_objs, model.vocab.num_objs()));
    const Tensor2 emb = tape.value(
        mlp_forward_rec(tape, model.label_emb, "label_emb", model.params, tape.constant(oh), false)
            .output);
    ScoreMatrix sm;
    sm.candidates = candidates;
    sm.scores = Tensor2(x.rows, static_cast<int>(candidates.size()));
    for (int i = 0; i < x.rows; ++i)
        for (int c = 0; c < emb.rows; ++c) {
            double d = 0.0;
            for (int j = 0; j < emb.cols; ++j) {
                const double e = px(i, j) - emb(c, j);
                d += e * e;
            }
            sm.scores(i, c) = -d;
        }
    return sm;
}

std::vector<int> predict(const ScoreMatrix& sm) {
    if (sm.candidates.empty()) throw DomainError("predict: empty candidate list");
    std::vector<int> out(sm.scores.rows);
    for (int i = 0; i < sm.scores.rows; ++i) {
        int best = 0;
        for (int c = 1; c < sm.scores.cols; ++c) {
            const double s = sm.scores(i, c);
            const double b = sm.scores(i, best);
            // Strictly-better wins; on ties, the lower pair id wins.
            if (s > b || (s == b && sm.candidates[c] < sm.candidates[best])) best = c;
        }
        out[i] = sm.candidates[best];
    }
    return out;
}

ScoreMatrix oracle_score_pairs(const ScmInstance& inst, const Tensor2& x,
                               const std::vector<int>& candidates, const LossWeights& weights) {
    std::vector<int> cand_attrs, cand_objs;
    candidate_labels(inst.vocab, candidates, cand_attrs, cand_objs);
    const Tensor2 h_a = gather_rows(inst.tables.h_attr, cand_attrs);
    const Tensor2 h_o = gather_rows(inst.tables.h_obj, cand_objs);
    const Tensor2 gx = inst.tables.generate(concat_cols(h_a, h_o));
    LossWeights w = weights;
    Tensor2 phi_a, phi_o;
    if (inst.config.identity_concat) {
        // g* is identity-concat, so the exact inverse is coordinate selection.
        std::vector<int> ia(inst.config.core_dim_attr), io(inst.config.core_dim_obj);
        phi_a = Tensor2(x.rows, inst.config.core_dim_attr);
        phi_o = Tensor2(x.rows, inst.config.core_dim_obj);
        for (int i = 0; i < x.rows; ++i) {
            for (int j = 0; j < inst.config.core_dim_attr; ++j) phi_a(i, j) = x(i, j);
            for (int j = 0; j < inst.config.core_dim_obj; ++j)
                phi_o(i, j) = x(i, inst.config.core_dim_attr + j);
        }
    } else {
        // No closed-form inverse for a general g*; score on the X term only.
        w.w_attr = 0.0;
        w.w_obj = 0.0;
        phi_a = Tensor2(x.rows, h_a.cols);
        phi_o = Tensor2(x.rows, h_o.cols);
    }
    return score_pairs_raw(phi_a, phi_o, x, h_a, h_o, gx, candidates, w);
}

}  // namespace czsl

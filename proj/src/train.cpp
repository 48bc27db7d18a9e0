#include "czsl/train.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <thread>

#include <nlohmann/json.hpp>

#include "czsl/error.hpp"

namespace czsl {

namespace fs = std::filesystem;
using nlohmann::json;

Schedule schedule_from_string(const std::string& s) {
    if (s == "joint") return Schedule::Joint;
    if (s == "alternating") return Schedule::Alternating;
    throw ConfigError("unknown schedule: " + s);
}

std::string to_string(Schedule s) {
    return s == Schedule::Joint ? "joint" : "alternating";
}

StopCriterion criterion_from_string(const std::string& s) {
    if (s == "harmonic") return StopCriterion::Harmonic;
    if (s == "closed") return StopCriterion::Closed;
    if (s == "ausuc") return StopCriterion::Ausuc;
    throw ConfigError("unknown early-stop criterion: " + s);
}

std::string to_string(StopCriterion c) {
    switch (c) {
        case StopCriterion::Harmonic: return "harmonic";
        case StopCriterion::Closed: return "closed";
        case StopCriterion::Ausuc: return "ausuc";
    }
    return "harmonic";
}

// --- config (de)serialization ------------------------------------------------

namespace {

void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& where) {
    if (!j.is_object()) throw ConfigError(where + ": expected a JSON object");
    for (const auto& [key, _] : j.items())
        if (!allowed.count(key)) throw ConfigError(where + ": unknown key '" + key + "'");
}

template <typename T>
T get_or(const json& j, const std::string& key, T fallback) {
    if (!j.contains(key)) return fallback;
    try {
        return j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ConfigError("bad value for '" + key + "': " + e.what());
    }
}

ModelConfig model_config_from_json(const json& j) {
    check_keys(j, {"hidden_dim", "core_dim", "embed_layers", "inverse_layers", "gen_layers",
                   "classifier_layers", "projection", "projection_dim"},
               "model");
    ModelConfig c;
    c.hidden_dim = get_or(j, "hidden_dim", c.hidden_dim);
    c.core_dim = get_or(j, "core_dim", c.core_dim);
    c.embed_layers = get_or(j, "embed_layers", c.embed_layers);
    c.inverse_layers = get_or(j, "inverse_layers", c.inverse_layers);
    c.gen_layers = get_or(j, "gen_layers", c.gen_layers);
    c.classifier_layers = get_or(j, "classifier_layers", c.classifier_layers);
    c.projection = get_or(j, "projection", c.projection);
    c.projection_dim = get_or(j, "projection_dim", c.projection_dim);
    return c;
}

json model_config_json(const ModelConfig& c) {
    return {{"hidden_dim", c.hidden_dim},
            {"core_dim", c.core_dim},
            {"embed_layers", c.embed_layers},
            {"inverse_layers", c.inverse_layers},
            {"gen_layers", c.gen_layers},
            {"classifier_layers", c.classifier_layers},
            {"projection", c.projection},
            {"projection_dim", c.projection_dim}};
}

OptimizerSpec optimizer_from_json(const json& j) {
    check_keys(j, {"kind", "learning_rate", "momentum", "beta1", "beta2", "epsilon",
                   "weight_decay"},
               "optimizer");
    OptimizerSpec s;
    if (j.contains("kind")) s.kind = opt_kind_from_string(j.at("kind").get<std::string>());
    s.learning_rate = get_or(j, "learning_rate", s.learning_rate);
    s.momentum = get_or(j, "momentum", s.momentum);
    s.beta1 = get_or(j, "beta1", s.beta1);
    s.beta2 = get_or(j, "beta2", s.beta2);
    s.epsilon = get_or(j, "epsilon", s.epsilon);
    s.weight_decay = get_or(j, "weight_decay", s.weight_decay);
    s.validate();
    return s;
}

json optimizer_json(const OptimizerSpec& s) {
    return {{"kind", to_string(s.kind)},
            {"learning_rate", s.learning_rate},
            {"momentum", s.momentum},
            {"beta1", s.beta1},
            {"beta2", s.beta2},
            {"epsilon", s.epsilon},
            {"weight_decay", s.weight_decay}};
}

LossWeights weights_from_json(const json& j) {
    check_keys(j, {"lambda_oh", "lambda_rep", "lambda_icore", "lambda_ig", "lambda_ao",
                   "triplet_margin", "w_attr", "w_obj", "w_x", "frequency_weighting"},
               "weights");
    LossWeights w;
    w.lambda_oh = get_or(j, "lambda_oh", w.lambda_oh);
    w.lambda_rep = get_or(j, "lambda_rep", w.lambda_rep);
    w.lambda_icore = get_or(j, "lambda_icore", w.lambda_icore);
    w.lambda_ig = get_or(j, "lambda_ig", w.lambda_ig);
    w.lambda_ao = get_or(j, "lambda_ao", w.lambda_ao);
    w.triplet_margin = get_or(j, "triplet_margin", w.triplet_margin);
    w.w_attr = get_or(j, "w_attr", w.w_attr);
    w.w_obj = get_or(j, "w_obj", w.w_obj);
    w.w_x = get_or(j, "w_x", w.w_x);
    w.frequency_weighting = get_or(j, "frequency_weighting", w.frequency_weighting);
    w.validate();
    return w;
}

json weights_json(const LossWeights& w) {
    return {{"lambda_oh", w.lambda_oh},
            {"lambda_rep", w.lambda_rep},
            {"lambda_icore", w.lambda_icore},
            {"lambda_ig", w.lambda_ig},
            {"lambda_ao", w.lambda_ao},
            {"triplet_margin", w.triplet_margin},
            {"w_attr", w.w_attr},
            {"w_obj", w.w_obj},
            {"w_x", w.w_x},
            {"frequency_weighting", w.frequency_weighting}};
}

ScmConfig scm_config_from_json(const json& j) {
    check_keys(j, {"core_dim_attr", "core_dim_obj", "feature_dim", "gen_hidden",
                   "identity_concat", "sigma_attr", "sigma_obj", "sigma_x", "alpha",
                   "uniform_pairs", "train_per_pair", "val_per_pair", "test_per_pair"},
               "scm");
    ScmConfig c;
    c.core_dim_attr = get_or(j, "core_dim_attr", c.core_dim_attr);
    c.core_dim_obj = get_or(j, "core_dim_obj", c.core_dim_obj);
    c.feature_dim = get_or(j, "feature_dim", c.feature_dim);
    c.gen_hidden = get_or(j, "gen_hidden", c.gen_hidden);
    c.identity_concat = get_or(j, "identity_concat", c.identity_concat);
    c.sigma_attr = get_or(j, "sigma_attr", c.sigma_attr);
    c.sigma_obj = get_or(j, "sigma_obj", c.sigma_obj);
    c.sigma_x = get_or(j, "sigma_x", c.sigma_x);
    c.alpha = get_or(j, "alpha", c.alpha);
    c.uniform_pairs = get_or(j, "uniform_pairs", c.uniform_pairs);
    c.train_per_pair = get_or(j, "train_per_pair", c.train_per_pair);
    c.val_per_pair = get_or(j, "val_per_pair", c.val_per_pair);
    c.test_per_pair = get_or(j, "test_per_pair", c.test_per_pair);
    c.validate();
    return c;
}

json load_json_file(const std::string& path, const std::string& what) {
    std::ifstream is(path);
    if (!is) throw LoadError(what + ": cannot open " + path);
    json j;
    try {
        is >> j;
    } catch (const json::exception& e) {
        throw LoadError(what + ": invalid JSON in " + path + ": " + e.what());
    }
    return j;
}

TrainConfig train_config_from_json(const json& j) {
    check_keys(j, {"method", "schedule", "criterion", "batch_size", "max_epochs", "model_seed",
                   "split_seed", "balanced_eval", "pida_samples", "model", "optimizer",
                   "optimizer_obj", "weights"},
               "train config");
    TrainConfig c;
    if (j.contains("method")) c.method = method_from_string(j.at("method").get<std::string>());
    if (j.contains("schedule"))
        c.schedule = schedule_from_string(j.at("schedule").get<std::string>());
    if (j.contains("criterion"))
        c.criterion = criterion_from_string(j.at("criterion").get<std::string>());
    c.batch_size = get_or(j, "batch_size", c.batch_size);
    c.max_epochs = get_or(j, "max_epochs", c.max_epochs);
    c.model_seed = get_or(j, "model_seed", c.model_seed);
    c.split_seed = get_or(j, "split_seed", c.split_seed);
    c.balanced_eval = get_or(j, "balanced_eval", c.balanced_eval);
    c.pida_samples = get_or(j, "pida_samples", c.pida_samples);
    if (j.contains("model")) c.model = model_config_from_json(j.at("model"));
    if (j.contains("optimizer")) c.optimizer = optimizer_from_json(j.at("optimizer"));
    c.optimizer_obj = j.contains("optimizer_obj") ? optimizer_from_json(j.at("optimizer_obj"))
                                                  : c.optimizer;
    if (j.contains("weights")) c.weights = weights_from_json(j.at("weights"));
    c.validate();
    return c;
}

json train_config_json(const TrainConfig& c) {
    json j;
    j["method"] = to_string(c.method);
    j["schedule"] = to_string(c.schedule);
    j["criterion"] = to_string(c.criterion);
    j["batch_size"] = c.batch_size;
    j["max_epochs"] = c.max_epochs;
    j["model_seed"] = c.model_seed;
    j["split_seed"] = c.split_seed;
    j["balanced_eval"] = c.balanced_eval;
    j["pida_samples"] = c.pida_samples;
    j["model"] = model_config_json(c.model);
    j["optimizer"] = optimizer_json(c.optimizer);
    j["optimizer_obj"] = optimizer_json(c.optimizer_obj);
    j["weights"] = weights_json(c.weights);
    return j;
}

}  // namespace

void TrainConfig::validate() const {
    if (batch_size < 2) throw ConfigError("train config: batch_size must be >= 2");
    if (max_epochs < 1) throw ConfigError("train config: max_epochs must be >= 1");
    if (pida_samples < 1) throw ConfigError("train config: pida_samples must be >= 1");
    weights.validate();
    optimizer.validate();
    optimizer_obj.validate();
    if (schedule == Schedule::Alternating) {
        if (method != Method::Causal && method != Method::CausalNoIndep)
            throw ConfigError("alternating schedule is only valid for the causal methods");
        if (model.projection)
            throw ConfigError("alternating schedule is not valid with a learned projection");
    }
}

TrainConfig TrainConfig::from_json_file(const std::string& path) {
    return train_config_from_json(load_json_file(path, "train config"));
}

TrainConfig TrainConfig::from_json_string(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw LoadError(std::string("train config: invalid JSON: ") + e.what());
    }
    return train_config_from_json(j);
}

std::string TrainConfig::to_json_string() const { return train_config_json(*this).dump(2); }

// --- training loop -------------------------------------------------------------

double criterion_value(const EvalReport& r, StopCriterion c) {
    switch (c) {
        case StopCriterion::Harmonic: return r.harmonic;
        case StopCriterion::Closed: return r.closed_acc;
        case StopCriterion::Ausuc: return r.ausuc;
    }
    return r.harmonic;
}

int early_stop(const std::vector<EpochRecord>& history, StopCriterion c) {
    if (history.empty()) throw DomainError("early_stop: empty history");
    int best = 0;
    for (size_t i = 1; i < history.size(); ++i)
        if (criterion_value(history[i].val, c) > criterion_value(history[best].val, c))
            best = static_cast<int>(i);
    return history[best].epoch;
}

namespace {

// Parameter groups for the alternating schedule. g and its invertibility heads
// are trained in both phases; each phase adds its own embedding, inverse and
// core head.
std::set<std::string> phase_active_set(const ParamStore& store, bool attr_phase) {
    const std::vector<std::string> prefixes =
        attr_phase ? std::vector<std::string>{"h_attr.", "inv_attr.", "gen.", "head_attr.",
                                              "head_gen_attr.", "head_gen_obj."}
                   : std::vector<std::string>{"h_obj.", "inv_obj.", "gen.", "head_obj.",
                                              "head_gen_attr.", "head_gen_obj."};
    std::set<std::string> active;
    for (const auto& name : store.param_names())
        for (const auto& p : prefixes)
            if (name.rfind(p, 0) == 0) active.insert(name);
    return active;
}

}  // namespace

TrainResult train(const TrainConfig& config, const FeatureDataset& data, const SplitSpec& split,
                  const PairVocabulary& vocab) {
    config.validate();
    split.validate(vocab);
    data.validate(vocab, split);
    const auto t0 = std::chrono::steady_clock::now();

    TrainResult result;
    result.model = make_model(config.method, vocab, data.features.cols, config.model,
                              config.model_seed);
    Model& model = result.model;

    Rng root(config.model_seed);
    Rng shuffle_rng = root.fork(101);
    Rng neg_rng = root.fork(102);
    TrainContext ctx = TrainContext::make(data, split, vocab, &neg_rng);

    const std::vector<int> train_rows = data.rows_with_tag(SplitTag::Train);
    if (train_rows.empty()) throw DomainError("train: no training rows");
    const int n = static_cast<int>(train_rows.size());

    EvalOptions val_opts;
    val_opts.balanced = config.balanced_eval;
    val_opts.with_ausuc = (config.criterion == StopCriterion::Ausuc);
    val_opts.with_hsic = false;

    ParamStore best_params;
    int best_epoch = 0;
    double best_value = -1.0;

    for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
        const bool attr_phase = (epoch % 2) == 1;
        const OptimizerSpec& opt = (config.schedule == Schedule::Alternating && !attr_phase)
                                       ? config.optimizer_obj
                                       : config.optimizer;
        std::set<std::string> active;
        if (config.schedule == Schedule::Alternating)
            active = phase_active_set(model.params, attr_phase);

        const std::vector<int> perm = shuffle_rng.permutation(n);
        double loss_sum = 0.0;
        long loss_count = 0;
        int step = 0;
        for (int start = 0; start < n; start += config.batch_size, ++step) {
            const int len = std::min(config.batch_size, n - start);
            if (len < 2) continue;  // a lone sample has no batch statistics
            std::vector<int> rows;
            rows.reserve(len);
            for (int i = 0; i < len; ++i) rows.push_back(train_rows[perm[start + i]]);
            Batch batch = make_batch(data, rows);
            try {
                Tape tape;
                Var loss = method_loss_rec(tape, model, batch, config.weights, ctx, true);
                const double value = tape.scalar(loss);
                GradMap grads = tape.backward(loss, &model.params);
                optimizer_step(opt, model.params, grads,
                               config.schedule == Schedule::Alternating ? &active : nullptr);
                loss_sum += value * len;
                loss_count += len;
            } catch (const NumericError& e) {
                throw NumericError("training aborted at epoch " + std::to_string(epoch) +
                                   ", step " + std::to_string(step) + ": " + e.what());
            }
        }

        EpochRecord rec;
        rec.epoch = epoch;
        rec.train_loss = loss_count > 0 ? loss_sum / static_cast<double>(loss_count) : 0.0;
        rec.val = evaluate_model(model, data, split, SplitTag::Val, config.weights, val_opts);
        rec.val.epoch = epoch;
        rec.val.seed = config.model_seed;
        const double v = criterion_value(rec.val, config.criterion);
        if (best_epoch == 0 || v > best_value) {
            best_value = v;
            best_epoch = epoch;
            best_params = model.params;
        }
        result.history.push_back(std::move(rec));
    }

    result.selected_epoch = best_epoch;
    model.params = std::move(best_params);
    const auto t1 = std::chrono::steady_clock::now();
    result.train_seconds = std::chrono::duration<double>(t1 - t0).count();
    return result;
}

// --- experiment orchestration ---------------------------------------------------

const PairVocabulary& DataSource::vocab() const {
    if (scm) return scm->vocab;
    if (imported) return imported->vocab;
    throw UsageError("DataSource: no data attached");
}

const SplitSpec& DataSource::split() const {
    if (scm) return scm->split;
    if (imported) return imported->split;
    throw UsageError("DataSource: no data attached");
}

const FeatureDataset& DataSource::data() const {
    if (scm) return scm->data;
    if (imported) return imported->data;
    throw UsageError("DataSource: no data attached");
}

uint64_t file_hash(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw LoadError("file_hash: cannot open " + path);
    uint64_t h = 14695981039346656037ull;
    char buf[4096];
    while (is.read(buf, sizeof(buf)) || is.gcount() > 0) {
        for (std::streamsize i = 0; i < is.gcount(); ++i) {
            h ^= static_cast<unsigned char>(buf[i]);
            h *= 1099511628211ull;
        }
        if (!is) break;
    }
    return h;
}

namespace {

uint64_t dataset_hash(const FeatureDataset& data) {
    uint64_t h = 14695981039346656037ull;
    auto mix_bytes = [&h](const void* p, size_t len) {
        const auto* b = static_cast<const unsigned char*>(p);
        for (size_t i = 0; i < len; ++i) {
            h ^= b[i];
            h *= 1099511628211ull;
        }
    };
    mix_bytes(data.features.d.data(), data.features.d.size() * sizeof(double));
    mix_bytes(data.attr_ids.data(), data.attr_ids.size() * sizeof(int));
    mix_bytes(data.obj_ids.data(), data.obj_ids.size() * sizeof(int));
    for (SplitTag t : data.tags) {
        const int v = static_cast<int>(t);
        mix_bytes(&v, sizeof(v));
    }
    return h;
}

void write_text(const std::string& path, const std::string& text,
                std::vector<std::string>& written) {
    std::ofstream os(path);
    if (!os) throw LoadError("cannot write " + path);
    os << text;
    written.push_back(path);
}

constexpr const char* kVersionTag = "czsl-0.1.0";

}  // namespace

ExperimentResult run_experiment(const TrainConfig& config, const DataSource& source,
                                const std::string& out_dir) {
    fs::create_directories(out_dir);
    std::vector<std::string> written;
    try {
        ExperimentResult res;
        res.trained = train(config, source.data(), source.split(), source.vocab());

        EvalOptions opts;
        opts.balanced = config.balanced_eval;
        opts.with_pida = source.scm != nullptr && config.method != Method::LE;
        opts.pida_samples = config.pida_samples;
        opts.pida_seed = config.model_seed ^ 0x9e3779b97f4a7c15ull;
        res.test = evaluate_model(res.trained.model, source.data(), source.split(),
                                  SplitTag::Test, config.weights, opts, source.scm);
        res.test.epoch = res.trained.selected_epoch;
        res.test.seed = config.model_seed;

        const SplitSpec& split = source.split();
        const std::string ratio = split.ratio_tag.empty() ? "na" : split.ratio_tag;
        res.csv_row = summary_csv_row(res.test, to_string(config.method), ratio, split.seed,
                                      config.model_seed);

        const std::string report_path = (fs::path(out_dir) / "report.json").string();
        write_text(report_path, res.test.to_json_string() + "\n", written);
        write_text((fs::path(out_dir) / "summary.csv").string(),
                   summary_csv_header() + "\n" + res.csv_row + "\n", written);

        std::string curve_csv = "constant,seen,unseen\n";
        for (const auto& p : res.test.curve) {
            char buf[128];
            std::snprintf(buf, sizeof(buf), "%.17g,%.6f,%.6f\n", p.constant, p.seen_acc,
                          p.unseen_acc);
            curve_csv += buf;
        }
        write_text((fs::path(out_dir) / "curve.csv").string(), curve_csv, written);

        const std::string ckpt = (fs::path(out_dir) / "model.ckpt").string();
        const std::string sidecar = (fs::path(out_dir) / "model.json").string();
        res.trained.model.save(ckpt, sidecar, config.weights);
        written.push_back(ckpt);
        written.push_back(sidecar);

        json manifest;
        manifest["config"] = train_config_json(config);
        manifest["dataset_hash"] = dataset_hash(source.data());
        manifest["version"] = kVersionTag;
        manifest["wall_clock_seconds"] = res.trained.train_seconds;
        manifest["selected_epoch"] = res.trained.selected_epoch;
        manifest["report"] = "report.json";
        manifest["ratio"] = ratio;
        manifest["split_seed"] = split.seed;
        res.manifest_path = (fs::path(out_dir) / "manifest.json").string();
        write_text(res.manifest_path, manifest.dump(2) + "\n", written);
        return res;
    } catch (...) {
        for (const auto& p : written) {
            std::error_code ec;
            fs::remove(p, ec);
        }
        throw;
    }
}

// --- sweep -----------------------------------------------------------------------

void SweepGrid::validate() const {
    if (methods.empty() || ratios.empty() || split_seeds.empty() || model_seeds.empty())
        throw ConfigError("sweep grid: methods, ratios, split_seeds, model_seeds must be non-empty");
    for (const auto& m : methods) method_from_string(m);
    for (const auto& r : ratios) ratio_tag_to_fraction(r);
    base.validate();
    scm.validate();
}

SweepGrid SweepGrid::from_json_file(const std::string& path) {
    const json j = load_json_file(path, "sweep grid");
    check_keys(j, {"methods", "ratios", "split_seeds", "model_seeds", "base", "scm", "mode"},
               "sweep grid");
    SweepGrid g;
    g.methods = j.at("methods").get<std::vector<std::string>>();
    g.ratios = j.at("ratios").get<std::vector<std::string>>();
    g.split_seeds = j.at("split_seeds").get<std::vector<uint64_t>>();
    g.model_seeds = j.at("model_seeds").get<std::vector<uint64_t>>();
    if (j.contains("base")) g.base = train_config_from_json(j.at("base"));
    if (j.contains("scm")) g.scm = scm_config_from_json(j.at("scm"));
    if (j.contains("mode")) g.mode = split_mode_from_string(j.at("mode").get<std::string>());
    g.validate();
    return g;
}

namespace {

std::string sanitize(const std::string& s) {
    std::string out = s;
    for (char& c : out)
        if (c == ':' || c == '/' || c == ' ') c = '-';
    return out;
}

struct SemStats {
    double mean = 0.0, sem = 0.0;
};

SemStats mean_sem(const std::vector<double>& v) {
    SemStats s;
    const double n = static_cast<double>(v.size());
    for (double x : v) s.mean += x;
    s.mean /= n;
    if (v.size() < 2) return s;  // s.e.m. 0 by convention for a single run
    double ss = 0.0;
    for (double x : v) ss += (x - s.mean) * (x - s.mean);
    s.sem = std::sqrt(ss / (n - 1.0)) / std::sqrt(n);
    return s;
}

void run_sweep_cell(const SweepGrid& grid, SweepCell& cell, const std::string& out_dir) {
    try {
        PairVocabulary vocab = PairVocabulary::ao_clevr();
        SplitSpec split = sample_split(vocab, ratio_tag_to_fraction(cell.ratio), grid.mode,
                                       cell.split_seed);
        split.ratio_tag = cell.ratio;
        ScmInstance inst = generate_dataset(vocab, split, grid.scm, cell.split_seed);
        TrainConfig cfg = grid.base;
        cfg.method = method_from_string(cell.method);
        cfg.model_seed = cell.model_seed;
        cfg.split_seed = cell.split_seed;
        DataSource source;
        source.scm = &inst;
        const std::string cell_dir =
            (fs::path(out_dir) / ("cell_" + sanitize(cell.method) + "_" + sanitize(cell.ratio) +
                                  "_s" + std::to_string(cell.split_seed) + "_m" +
                                  std::to_string(cell.model_seed)))
                .string();
        ExperimentResult r = run_experiment(cfg, source, cell_dir);
        cell.report = r.test;
        cell.csv_row = r.csv_row;
        cell.ok = true;
    } catch (const std::exception& e) {
        cell.ok = false;
        cell.error = e.what();
    }
}

}  // namespace

SweepResult sweep(const SweepGrid& grid, const std::string& out_dir, int threads) {
    grid.validate();
    if (threads < 1) threads = 1;
    fs::create_directories(out_dir);

    SweepResult result;
    for (const auto& m : grid.methods)
        for (const auto& r : grid.ratios)
            for (uint64_t ss : grid.split_seeds)
                for (uint64_t ms : grid.model_seeds) {
                    SweepCell cell;
                    cell.method = m;
                    cell.ratio = r;
                    cell.split_seed = ss;
                    cell.model_seed = ms;
                    result.cells.push_back(std::move(cell));
                }

    if (threads == 1) {
        for (auto& cell : result.cells) run_sweep_cell(grid, cell, out_dir);
    } else {
        std::atomic<size_t> next{0};
        auto worker = [&]() {
            for (;;) {
                const size_t i = next.fetch_add(1);
                if (i >= result.cells.size()) return;
                run_sweep_cell(grid, result.cells[i], out_dir);
            }
        };
        std::vector<std::thread> pool;
        for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }

    // Aggregate completed cells per (method, ratio); cell order is fixed by the
    // grid, so the output is independent of execution order.
    for (const auto& m : grid.methods) {
        for (const auto& r : grid.ratios) {
            std::vector<double> unseen, seen, harm;
            for (const auto& cell : result.cells) {
                if (!cell.ok || cell.method != m || cell.ratio != r) continue;
                unseen.push_back(cell.report.unseen_acc);
                seen.push_back(cell.report.seen_acc);
                harm.push_back(cell.report.harmonic);
            }
            if (unseen.empty()) continue;
            SweepAggregate agg;
            agg.method = m;
            agg.ratio = r;
            agg.count = static_cast<int>(unseen.size());
            const SemStats u = mean_sem(unseen), s = mean_sem(seen), h = mean_sem(harm);
            agg.unseen_mean = u.mean;
            agg.unseen_sem = u.sem;
            agg.seen_mean = s.mean;
            agg.seen_sem = s.sem;
            agg.harmonic_mean_v = h.mean;
            agg.harmonic_sem = h.sem;
            agg.degenerate_sem = unseen.size() < 2;
            result.aggregates.push_back(std::move(agg));
        }
    }

    std::string rows = summary_csv_header() + "\n";
    for (const auto& cell : result.cells)
        if (cell.ok) rows += cell.csv_row + "\n";
    std::ofstream(fs::path(out_dir) / "summary.csv") << rows;

    std::string agg_csv =
        "method,ratio,count,unseen_mean,unseen_sem,seen_mean,seen_sem,harmonic_mean,harmonic_sem,"
        "single_run\n";
    for (const auto& a : result.aggregates) {
        char buf[256];
        std::snprintf(buf, sizeof(buf), "%s,%s,%d,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f,%d\n",
                      a.method.c_str(), a.ratio.c_str(), a.count, a.unseen_mean, a.unseen_sem,
                      a.seen_mean, a.seen_sem, a.harmonic_mean_v, a.harmonic_sem,
                      a.degenerate_sem ? 1 : 0);
        agg_csv += buf;
    }
    std::ofstream(fs::path(out_dir) / "aggregate.csv") << agg_csv;

    std::string failures;
    for (const auto& cell : result.cells)
        if (!cell.ok)
            failures += cell.method + "," + cell.ratio + "," + std::to_string(cell.split_seed) +
                        "," + std::to_string(cell.model_seed) + ": " + cell.error + "\n";
    if (!failures.empty()) std::ofstream(fs::path(out_dir) / "failures.txt") << failures;
    return result;
}

// --- generation ---------------------------------------------------------------

void GenConfig::validate() const {
    scm.validate();
    ratio_tag_to_fraction(ratio);
    if (num_attrs < 2 || num_objs < 2)
        throw ConfigError("gen config: need at least 2 attributes and 2 objects");
}

GenConfig GenConfig::from_json_file(const std::string& path) {
    const json j = load_json_file(path, "gen config");
    check_keys(j, {"scm", "ratio", "mode", "seed", "num_attrs", "num_objs"}, "gen config");
    GenConfig g;
    if (j.contains("scm")) g.scm = scm_config_from_json(j.at("scm"));
    g.ratio = get_or<std::string>(j, "ratio", g.ratio);
    if (j.contains("mode")) g.mode = split_mode_from_string(j.at("mode").get<std::string>());
    g.seed = get_or(j, "seed", g.seed);
    g.num_attrs = get_or(j, "num_attrs", g.num_attrs);
    g.num_objs = get_or(j, "num_objs", g.num_objs);
    g.validate();
    return g;
}

ScmInstance run_gen(const GenConfig& config, const std::string& out_dir) {
    config.validate();
    PairVocabulary vocab;
    if (config.num_attrs == 8 && config.num_objs == 3) {
        vocab = PairVocabulary::ao_clevr();
    } else {
        for (int a = 0; a < config.num_attrs; ++a) vocab.attrs.push_back("a" + std::to_string(a));
        for (int o = 0; o < config.num_objs; ++o) vocab.objs.push_back("o" + std::to_string(o));
    }
    SplitSpec split =
        sample_split(vocab, ratio_tag_to_fraction(config.ratio), config.mode, config.seed);
    split.ratio_tag = config.ratio;
    ScmInstance inst = generate_dataset(vocab, split, config.scm, config.seed);
    fs::create_directories(out_dir);
    export_features(inst.data, vocab, (fs::path(out_dir) / "features.csv").string());
    export_splits(split, vocab, (fs::path(out_dir) / "splits.json").string());
    export_scm(inst, (fs::path(out_dir) / "scm.json").string());
    return inst;
}

DataSource LoadedData::source() const {
    DataSource s;
    if (has_scm)
        s.scm = &scm;
    else
        s.imported = &imported;
    return s;
}

LoadedData load_data_dir(const std::string& dir) {
    const std::string csv = (fs::path(dir) / "features.csv").string();
    const std::string splits = (fs::path(dir) / "splits.json").string();
    const std::string scm_path = (fs::path(dir) / "scm.json").string();
    LoadedData out;
    if (fs::exists(scm_path)) {
        out.scm = import_scm(csv, splits, scm_path);
        out.has_scm = true;
    } else {
        out.imported = import_features(csv, splits);
    }
    return out;
}

}  // namespace czsl

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "czsl/error.hpp"
#include "czsl/train.hpp"

using namespace czsl;
namespace fs = std::filesystem;

namespace {

EpochRecord rec(int epoch, double harmonic, double closed = 0.0) {
    EpochRecord r;
    r.epoch = epoch;
    r.val.harmonic = harmonic;
    r.val.closed_acc = closed;
    return r;
}

PairVocabulary small_vocab() {
    PairVocabulary v;
    v.attrs = {"a0", "a1"};
    v.objs = {"o0", "o1"};
    return v;
}

ScmConfig small_scm() {
    ScmConfig c;
    c.core_dim_attr = c.core_dim_obj = 2;
    c.feature_dim = 6;
    c.gen_hidden = 8;
    c.train_per_pair = 8;
    c.val_per_pair = 4;
    c.test_per_pair = 4;
    return c;
}

TrainConfig small_config(Method method, uint64_t model_seed) {
    TrainConfig c;
    c.method = method;
    c.model.hidden_dim = 8;
    c.batch_size = 16;
    c.max_epochs = 2;
    c.model_seed = model_seed;
    c.pida_samples = 20;
    c.optimizer.learning_rate = 1e-2;
    c.optimizer_obj = c.optimizer;
    return c;
}

std::string slurp(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    REQUIRE(is);
    std::ostringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    std::string str() const { return path.string(); }
};

}  // namespace

TEST_CASE("early stopping picks the argmax and breaks ties early") {
    std::vector<EpochRecord> h{rec(1, 0.2), rec(2, 0.5), rec(3, 0.4)};
    CHECK(early_stop(h, StopCriterion::Harmonic) == 2);

    std::vector<EpochRecord> tie{rec(1, 0.3), rec(2, 0.5), rec(3, 0.5), rec(4, 0.1)};
    CHECK(early_stop(tie, StopCriterion::Harmonic) == 2);

    std::vector<EpochRecord> flat{rec(1, 0.0), rec(2, 0.0)};
    CHECK(early_stop(flat, StopCriterion::Harmonic) == 1);

    std::vector<EpochRecord> closed{rec(1, 0.9, 0.1), rec(2, 0.1, 0.8)};
    CHECK(early_stop(closed, StopCriterion::Closed) == 2);

    CHECK_THROWS_AS(early_stop({}, StopCriterion::Harmonic), DomainError);
}

TEST_CASE("train config json round-trips and rejects unknown keys") {
    TrainConfig c = small_config(Method::VisProdCI, 7);
    c.schedule = Schedule::Joint;
    c.criterion = StopCriterion::Closed;
    c.weights.lambda_rep = 0.42;
    TrainConfig back = TrainConfig::from_json_string(c.to_json_string());
    CHECK(back.method == Method::VisProdCI);
    CHECK(back.criterion == StopCriterion::Closed);
    CHECK(back.model_seed == 7);
    CHECK(back.weights.lambda_rep == 0.42);
    CHECK(back.optimizer.learning_rate == 1e-2);

    CHECK_THROWS_AS(TrainConfig::from_json_string(R"({"max_epochz": 3})"), ConfigError);
    CHECK_THROWS_AS(TrainConfig::from_json_string(R"({"weights": {"lambda_xx": 1}})"),
                    ConfigError);
    CHECK_THROWS_AS(TrainConfig::from_json_string("not json"), LoadError);
}

TEST_CASE("config validation gates the alternating schedule") {
    TrainConfig c = small_config(Method::VisProd, 0);
    c.schedule = Schedule::Alternating;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c.method = Method::Causal;
    c.validate();
    c.model.projection = true;
    CHECK_THROWS_AS(c.validate(), ConfigError);

    TrainConfig bad = small_config(Method::Causal, 0);
    bad.batch_size = 1;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("training is bit-deterministic given the seeds") {
    PairVocabulary v = small_vocab();
    SplitSpec split = sample_split(v, 0.5, SplitMode::Overlapping, 11);
    ScmInstance inst = generate_dataset(v, split, small_scm(), 11);
    TrainConfig cfg = small_config(Method::Causal, 3);

    TrainResult a = train(cfg, inst.data, split, v);
    TrainResult b = train(cfg, inst.data, split, v);
    CHECK(a.selected_epoch == b.selected_epoch);
    REQUIRE(a.history.size() == b.history.size());
    for (size_t i = 0; i < a.history.size(); ++i) {
        CHECK(a.history[i].train_loss == b.history[i].train_loss);
        CHECK(a.history[i].val.harmonic == b.history[i].val.harmonic);
    }
    for (const auto& name : a.model.params.param_names())
        CHECK(max_abs_diff(a.model.params.at(name), b.model.params.at(name)) == 0.0);

    TrainConfig other = cfg;
    other.model_seed = 4;
    TrainResult c = train(other, inst.data, split, v);
    CHECK(max_abs_diff(a.model.params.at("gen.out.W"), c.model.params.at("gen.out.W")) > 0.0);
}

TEST_CASE("the training loss falls on a tiny overfittable dataset") {
    PairVocabulary v = small_vocab();
    SplitSpec split = sample_split(v, 0.5, SplitMode::Overlapping, 13);
    ScmConfig sc = small_scm();
    sc.sigma_x = 0.0;
    ScmInstance inst = generate_dataset(v, split, sc, 13);
    TrainConfig cfg = small_config(Method::Causal, 5);
    cfg.max_epochs = 30;
    cfg.optimizer.kind = OptKind::Adam;
    cfg.optimizer.learning_rate = 3e-3;
    cfg.optimizer_obj = cfg.optimizer;

    TrainResult r = train(cfg, inst.data, split, v);
    REQUIRE(r.history.size() == 30);
    CHECK(r.history.back().train_loss < 0.5 * r.history.front().train_loss);
    CHECK(r.selected_epoch >= 1);
    CHECK(r.selected_epoch <= 30);
}

TEST_CASE("the alternating schedule freezes the inactive branch") {
    PairVocabulary v = small_vocab();
    SplitSpec split = sample_split(v, 0.5, SplitMode::Overlapping, 17);
    ScmInstance inst = generate_dataset(v, split, small_scm(), 17);
    TrainConfig cfg = small_config(Method::Causal, 9);
    cfg.schedule = Schedule::Alternating;
    cfg.max_epochs = 1;  // a single attribute phase
    cfg.weights.lambda_ig = 1.0;  // guarantees the generator sees a gradient

    TrainResult r = train(cfg, inst.data, split, v);
    Model fresh = make_model(Method::Causal, v, inst.data.features.cols, cfg.model, 9);
    CHECK(max_abs_diff(r.model.params.at("h_obj.out.W"), fresh.params.at("h_obj.out.W")) == 0.0);
    CHECK(max_abs_diff(r.model.params.at("inv_obj.out.W"), fresh.params.at("inv_obj.out.W")) ==
          0.0);
    CHECK(max_abs_diff(r.model.params.at("head_obj.out.W"), fresh.params.at("head_obj.out.W")) ==
          0.0);
    CHECK(max_abs_diff(r.model.params.at("h_attr.out.W"), fresh.params.at("h_attr.out.W")) > 0.0);
    CHECK(max_abs_diff(r.model.params.at("gen.out.W"), fresh.params.at("gen.out.W")) > 0.0);
}

TEST_CASE("run_experiment writes its artifacts and reruns byte-identically") {
    PairVocabulary v = small_vocab();
    SplitSpec split = sample_split(v, 0.5, SplitMode::Overlapping, 19);
    split.ratio_tag = "5:5";
    ScmInstance inst = generate_dataset(v, split, small_scm(), 19);
    DataSource source;
    source.scm = &inst;
    TrainConfig cfg = small_config(Method::Causal, 21);

    TempDir d1("czsl_exp_a"), d2("czsl_exp_b");
    ExperimentResult r1 = run_experiment(cfg, source, d1.str());
    for (const char* f :
         {"report.json", "summary.csv", "curve.csv", "model.ckpt", "model.json", "manifest.json"})
        CHECK(fs::exists(d1.path / f));
    CHECK(r1.csv_row.rfind("causal,5:5,19,21,", 0) == 0);
    CHECK(r1.test.pida_attr >= 0.0);  // SCM source enables PIDA

    ExperimentResult r2 = run_experiment(cfg, source, d2.str());
    CHECK(slurp((d1.path / "summary.csv").string()) == slurp((d2.path / "summary.csv").string()));
    CHECK(slurp((d1.path / "report.json").string()) == slurp((d2.path / "report.json").string()));
    CHECK(slurp((d1.path / "model.ckpt").string()) == slurp((d2.path / "model.ckpt").string()));

    // The saved checkpoint reproduces the experiment's test report.
    LossWeights w;
    Model back = Model::load((d1.path / "model.ckpt").string(), (d1.path / "model.json").string(),
                             &w);
    EvalOptions opts;
    EvalReport again = evaluate_model(back, inst.data, split, SplitTag::Test, w, opts);
    CHECK(again.harmonic == doctest::Approx(r1.test.harmonic).epsilon(1e-12));
}

TEST_CASE("sweeps aggregate completed cells and record failures") {
    SweepGrid grid;
    grid.methods = {"visprod"};
    grid.ratios = {"5:5", "7:3"};  // 7:3 cannot cover 8 attributes with 7 seen pairs
    grid.split_seeds = {1, 2};
    grid.model_seeds = {3};
    grid.base = small_config(Method::VisProd, 3);
    grid.scm = small_scm();

    TempDir dir("czsl_sweep");
    SweepResult r = sweep(grid, dir.str(), 2);
    REQUIRE(r.cells.size() == 4);

    int ok = 0, failed = 0;
    for (const auto& cell : r.cells) {
        if (cell.ok) {
            ++ok;
            CHECK(cell.ratio == "5:5");
        } else {
            ++failed;
            CHECK(cell.ratio == "7:3");
            CHECK(!cell.error.empty());
        }
    }
    CHECK(ok == 2);
    CHECK(failed == 2);

    REQUIRE(r.aggregates.size() == 1);
    const SweepAggregate& a = r.aggregates.front();
    CHECK(a.method == "visprod");
    CHECK(a.count == 2);
    CHECK(!a.degenerate_sem);
    // Two runs: s.e.m. = sd/sqrt(2) = |x1 - x2| / 2.
    const double u1 = r.cells[0].report.unseen_acc;
    const double u2 = r.cells[1].report.unseen_acc;
    CHECK(a.unseen_mean == doctest::Approx(0.5 * (u1 + u2)).epsilon(1e-12));
    CHECK(a.unseen_sem == doctest::Approx(0.5 * std::abs(u1 - u2)).epsilon(1e-12));

    CHECK(fs::exists(dir.path / "summary.csv"));
    CHECK(fs::exists(dir.path / "aggregate.csv"));
    CHECK(fs::exists(dir.path / "failures.txt"));
    CHECK(fs::exists(dir.path / "cell_visprod_5-5_s1_m3" / "manifest.json"));
}

TEST_CASE("generated directories load back with their SCM sidecar") {
    GenConfig g;
    g.scm = small_scm();
    g.ratio = "5:5";
    g.seed = 23;
    g.num_attrs = 2;
    g.num_objs = 2;

    TempDir dir("czsl_gen");
    ScmInstance inst = run_gen(g, dir.str());
    LoadedData loaded = load_data_dir(dir.str());
    REQUIRE(loaded.has_scm);
    CHECK(loaded.scm.data.size() == inst.data.size());
    CHECK(loaded.scm.split.ratio_tag == "5:5");
    CHECK(max_abs_diff(loaded.scm.data.features, inst.data.features) == 0.0);
    CHECK(loaded.source().scm != nullptr);

    // Hash provenance is stable across loads of the same files.
    const uint64_t h1 = file_hash((dir.path / "features.csv").string());
    const uint64_t h2 = file_hash((dir.path / "features.csv").string());
    CHECK(h1 == h2);
    CHECK_THROWS_AS(file_hash((dir.path / "missing.csv").string()), LoadError);
}

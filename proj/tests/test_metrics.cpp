#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <limits>

#include "czsl/error.hpp"
#include "czsl/metrics.hpp"
#include "czsl/model.hpp"

using namespace czsl;

namespace {

SplitSpec two_pair_split() {
    SplitSpec s;
    s.seen = {0};
    s.unseen = {1};
    s.val_unseen = {1};
    s.test_unseen = {1};
    return s;
}

}  // namespace

TEST_CASE("harmonic mean identities and published operating points") {
    CHECK(harmonic_mean(0.0, 0.0) == 0.0);
    CHECK(harmonic_mean(0.4, 0.4) == doctest::Approx(0.4).epsilon(1e-15));
    CHECK(harmonic_mean(0.2, 0.8) == doctest::Approx(0.32).epsilon(1e-15));
    CHECK(std::abs(harmonic_mean(26.6, 39.7) - 31.8) < 0.1);
    CHECK(std::abs(harmonic_mean(57.5, 85.7) - 68.8) < 0.1);
    CHECK_THROWS_AS(harmonic_mean(-0.1, 0.5), DomainError);
}

TEST_CASE("accuracy and balanced accuracy on a hand-tallied case") {
    const std::vector<int> truths{0, 0, 0, 1};
    const std::vector<int> preds{0, 0, 1, 1};
    CHECK(accuracy(preds, truths) == doctest::Approx(0.75).epsilon(1e-15));
    // Per-pair: pair 0 is 2/3, pair 1 is 1/1.
    CHECK(balanced_accuracy(preds, truths, {0, 1}) ==
          doctest::Approx(0.5 * (2.0 / 3.0 + 1.0)).epsilon(1e-15));
}

TEST_CASE("balanced accuracy ignores duplication of one class") {
    std::vector<int> truths{0, 1};
    std::vector<int> preds{0, 0};
    const double base = balanced_accuracy(preds, truths, {0, 1});
    // Flood the set with copies of the correctly-predicted pair.
    for (int i = 0; i < 50; ++i) {
        truths.push_back(0);
        preds.push_back(0);
    }
    CHECK(balanced_accuracy(preds, truths, {0, 1}) == doctest::Approx(base).epsilon(1e-15));
    CHECK(accuracy(preds, truths) > base);  // plain accuracy is not invariant
    CHECK_THROWS_AS(balanced_accuracy({0}, {5}, {0, 1}), DomainError);
}

TEST_CASE("open evaluation splits accuracies by truth group") {
    SplitSpec s = two_pair_split();
    ScoreMatrix sm;
    sm.candidates = {0, 1};
    sm.scores = Tensor2(3, 2);
    // row 0 (truth 0): picks 0; row 1 (truth 1): picks 1; row 2 (truth 1): picks 0.
    sm.scores.d = {2.0, 1.0, 0.0, 1.0, 3.0, 2.0};
    const std::vector<int> truths{0, 1, 1};
    OpenEval r = evaluate_open(sm, truths, s, true);
    CHECK(r.seen_acc == 1.0);
    CHECK(r.unseen_acc == 0.5);
    CHECK(r.harmonic == doctest::Approx(harmonic_mean(1.0, 0.5)).epsilon(1e-15));

    CHECK_THROWS_AS(evaluate_open(sm, {0, 0, 0}, s, true), DomainError);  // no unseen truths
}

TEST_CASE("closed evaluation restricts candidates to unseen pairs") {
    SplitSpec s;
    s.seen = {0};
    s.unseen = {1, 2};
    s.val_unseen = s.test_unseen = s.unseen;
    ScoreMatrix sm;
    sm.candidates = {1, 2};
    sm.scores = Tensor2(2, 2);
    sm.scores.d = {1.0, 0.0, 0.0, 1.0};
    CHECK(evaluate_closed(sm, {1, 2}, s, true) == 1.0);
    CHECK(evaluate_closed(sm, {2, 2}, s, false) == 0.5);

    ScoreMatrix bad = sm;
    bad.candidates = {0, 1};
    CHECK_THROWS_AS(evaluate_closed(bad, {1, 2}, s, true), ConfigError);
}

TEST_CASE("ausuc on a separable two-sample problem integrates to one") {
    SplitSpec s = two_pair_split();
    ScoreMatrix sm;
    sm.candidates = {0, 1};
    sm.scores = Tensor2(2, 2);
    sm.scores.d = {1.0, 0.0, 0.6, 0.5};
    const std::vector<int> truths{0, 1};
    AusucResult r = ausuc(sm, truths, s, true);
    CHECK(r.area == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(r.curve.size() == 203);  // 201 finite constants plus both infinities
    CHECK(!r.degenerate);

    // Infinite endpoints restrict the candidate set outright.
    CHECK(std::isinf(r.curve.front().constant));
    CHECK(r.curve.front().seen_acc == 0.0);
    CHECK(r.curve.front().unseen_acc == 1.0);
    CHECK(std::isinf(r.curve.back().constant));
    CHECK(r.curve.back().seen_acc == 1.0);
    CHECK(r.curve.back().unseen_acc == 0.0);
}

TEST_CASE("ausuc area matches a hand trapezoid on a three-level curve") {
    // Four samples: two seen-truth, two unseen-truth; engineered so the sweep
    // visits (0,1), (0.5,1), (0.5,0.5), (0.5,0), (1,0) as c rises.
    SplitSpec s = two_pair_split();
    ScoreMatrix sm;
    sm.candidates = {0, 1};
    sm.scores = Tensor2(4, 2);
    sm.scores.d = {
        1.0, 0.0,   // seen truth, margin 1.0 toward seen
        0.0, 1.0,   // seen truth, needs c > 1 to flip to seen
        0.2, 0.0,   // unseen truth, flips to seen once c > -0.2
        -0.4, 0.0,  // unseen truth, flips to seen once c > 0.4
    };
    const std::vector<int> truths{0, 0, 1, 1};
    AusucResult r = ausuc(sm, truths, s, false);
    // Upper envelope: (0,1) -> (0.5,1) -> (1,0); trapezoid = 0.5*1 + 0.5*0.5.
    CHECK(r.area == doctest::Approx(0.75).epsilon(1e-12));
}

TEST_CASE("pida vanishes for extractors that honor the intervention") {
    // Hand-built noiseless identity SCM over 2x2 with a point-mass joint on
    // pair (0,0), so both do-marginals are deterministic.
    ScmInstance inst;
    inst.vocab.attrs = {"a0", "a1"};
    inst.vocab.objs = {"o0", "o1"};
    inst.split.seen = {0, 1, 2, 3};
    inst.config.core_dim_attr = 1;
    inst.config.core_dim_obj = 1;
    inst.config.identity_concat = true;
    inst.config.sigma_attr = inst.config.sigma_obj = inst.config.sigma_x = 0.0;
    inst.tables.identity_concat = true;
    inst.tables.h_attr = Tensor2(2, 1);
    inst.tables.h_attr.d = {0.0, 4.0};
    inst.tables.h_obj = Tensor2(2, 1);
    inst.tables.h_obj.d = {0.0, 3.0};
    inst.joint.pairs = {0, 1, 2, 3};
    inst.joint.probs = {1.0, 0.0, 0.0, 0.0};
    inst.data.provenance = "scm";

    // x = [phi_a ; phi_o]; slicing out the right coordinate is intervention-true.
    CoreExtractor slices = [](const Tensor2& x) {
        CoreBatch c;
        c.phi_a = Tensor2(x.rows, 1);
        c.phi_o = Tensor2(x.rows, 1);
        for (int i = 0; i < x.rows; ++i) {
            c.phi_a(i, 0) = x(i, 0);
            c.phi_o(i, 0) = x(i, 1);
        }
        return c;
    };
    PidaResult clean = pida(slices, inst, 20, 42);
    CHECK(clean.pida_attr == doctest::Approx(0.0).epsilon(1e-14));
    CHECK(clean.pida_obj == doctest::Approx(0.0).epsilon(1e-14));

    // An entangled extractor (both cores = full x) leaks the other factor.
    CoreExtractor entangled = [](const Tensor2& x) { return CoreBatch{x, x}; };
    PidaResult leaky = pida(entangled, inst, 20, 42);
    // do(a) marginal pins o = 0, so disagreement is |h_o(o)| averaged over pairs:
    // (0 + 3 + 0 + 3) / 4; likewise |h_a(a)| gives (0 + 0 + 4 + 4) / 4.
    CHECK(leaky.pida_attr == doctest::Approx(1.5).epsilon(1e-12));
    CHECK(leaky.pida_obj == doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("pida rejects non-scm data and bad sample counts") {
    ScmInstance inst;
    inst.data.provenance = "imported";
    CoreExtractor id = [](const Tensor2& x) { return CoreBatch{x, x}; };
    CHECK_THROWS_AS(pida(id, inst, 10, 0), DomainError);
    inst.data.provenance = "scm";
    CHECK_THROWS_AS(pida(id, inst, 0, 0), ConfigError);
}

TEST_CASE("summary csv row formatting and absent-metric blanks") {
    CHECK(summary_csv_header() ==
          "method,ratio,split_seed,model_seed,unseen,seen,harmonic,closed,ausuc,"
          "pida_attr,pida_obj,u_to_s,u_to_u");
    EvalReport r;
    r.unseen_acc = 0.25;
    r.seen_acc = 0.5;
    r.harmonic = harmonic_mean(0.5, 0.25);
    r.closed_acc = 0.75;
    r.confusion_unseen_to_seen = 3;
    r.confusion_unseen_wrong = 1;
    const std::string row = summary_csv_row(r, "causal", "5:5", 7, 11);
    CHECK(row == "causal,5:5,7,11,0.250000,0.500000,0.333333,0.750000,,,,3,1");
}

TEST_CASE("full model evaluation populates every requested field") {
    PairVocabulary v;
    v.attrs = {"a0", "a1"};
    v.objs = {"o0", "o1"};
    SplitSpec split = sample_split(v, 0.5, SplitMode::Overlapping, 3);
    ScmConfig cfg;
    cfg.core_dim_attr = cfg.core_dim_obj = 2;
    cfg.feature_dim = 6;
    cfg.train_per_pair = 8;
    cfg.val_per_pair = 6;
    cfg.test_per_pair = 6;
    ScmInstance inst = generate_dataset(v, split, cfg, 5);

    ModelConfig mc;
    mc.hidden_dim = 8;
    Model m = make_model(Method::Causal, v, cfg.feature_dim, mc, 9);
    LossWeights w;
    EvalOptions opts;
    opts.with_pida = true;
    opts.pida_samples = 30;
    opts.pida_seed = 13;
    EvalReport r = evaluate_model(m, inst.data, inst.split, SplitTag::Test, w, opts, &inst);

    CHECK(r.split_tag == "test");
    CHECK(r.seen_acc >= 0.0);
    CHECK(r.seen_acc <= 1.0);
    CHECK(r.unseen_acc >= 0.0);
    CHECK(r.unseen_acc <= 1.0);
    CHECK(r.harmonic == doctest::Approx(harmonic_mean(r.seen_acc, r.unseen_acc)).epsilon(1e-12));
    CHECK(r.closed_acc >= r.unseen_acc - 1e-12);  // dropping seen distractors cannot hurt here
    CHECK(r.ausuc >= 0.0);
    CHECK(r.ausuc <= 1.0);
    CHECK(r.curve.size() == 203);
    CHECK(r.hsic_attr_residual >= 0.0);
    CHECK(r.hsic_obj_residual >= 0.0);
    CHECK(r.pida_attr >= 0.0);
    CHECK(r.pida_obj >= 0.0);
    for (const auto& [pid, acc] : r.per_pair_acc) {
        CHECK(pid >= 0);
        CHECK(pid < v.num_pairs());
        CHECK(acc >= 0.0);
        CHECK(acc <= 1.0);
    }
    // Confusion counters only count misclassified unseen-truth samples.
    long unseen_total = 0, unseen_correct = 0;
    for (const auto& [pid, acc] : r.per_pair_acc) {
        if (!split.is_unseen(pid)) continue;
        long n = 0;
        for (size_t i = 0; i < inst.data.tags.size(); ++i)
            n += (inst.data.tags[i] == SplitTag::Test &&
                  inst.data.pair_id(v, static_cast<int>(i)) == pid);
        unseen_total += n;
        unseen_correct += std::lround(acc * n);
    }
    CHECK(r.confusion_unseen_to_seen + r.confusion_unseen_wrong == unseen_total - unseen_correct);

    CHECK_THROWS_AS(
        evaluate_model(m, inst.data, inst.split, SplitTag::Train, w, opts, &inst), ConfigError);
    CHECK(r.to_json_string().find("\"harmonic\"") != std::string::npos);
}

#include "czsl/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <set>

#include <nlohmann/json.hpp>

#include "czsl/error.hpp"
#include "czsl/hsic.hpp"

namespace czsl {

using nlohmann::json;

double harmonic_mean(double seen, double unseen) {
    if (seen < 0 || unseen < 0) throw DomainError("harmonic_mean: negative accuracy");
    if (seen == 0.0 && unseen == 0.0) return 0.0;
    return 2.0 * seen * unseen / (seen + unseen);
}

double accuracy(const std::vector<int>& preds, const std::vector<int>& truths) {
    if (preds.size() != truths.size()) throw ConfigError("accuracy: size mismatch");
    if (preds.empty()) throw DomainError("accuracy: empty evaluation set");
    long correct = 0;
    for (size_t i = 0; i < preds.size(); ++i) correct += (preds[i] == truths[i]);
    return static_cast<double>(correct) / static_cast<double>(preds.size());
}

double balanced_accuracy(const std::vector<int>& preds, const std::vector<int>& truths,
                         const std::vector<int>& pair_set) {
    if (preds.size() != truths.size()) throw ConfigError("balanced_accuracy: size mismatch");
    if (preds.empty()) throw DomainError("balanced_accuracy: empty evaluation set");
    std::set<int> allowed(pair_set.begin(), pair_set.end());
    std::map<int, std::pair<long, long>> tally;  // pair -> (correct, total)
    for (size_t i = 0; i < preds.size(); ++i) {
        if (!allowed.count(truths[i]))
            throw DomainError("balanced_accuracy: truth outside the pair set");
        auto& [c, t] = tally[truths[i]];
        c += (preds[i] == truths[i]);
        ++t;
    }
    double acc = 0.0;
    for (const auto& [pid, ct] : tally)
        acc += static_cast<double>(ct.first) / static_cast<double>(ct.second);
    return acc / static_cast<double>(tally.size());
}

namespace {

// Argmax per row over `scores + c * seen_mask`; ties go to the lower pair id.
// An infinite constant restricts the candidate set instead of shifting.
std::vector<int> predict_shifted(const ScoreMatrix& sm, const std::vector<bool>& seen_mask,
                                 double c) {
    std::vector<int> out(sm.scores.rows);
    const int k = sm.scores.cols;
    for (int i = 0; i < sm.scores.rows; ++i) {
        int best = -1;
        double best_s = 0.0;
        for (int j = 0; j < k; ++j) {
            if (std::isinf(c)) {
                const bool want_seen = c > 0;
                if (seen_mask[j] != want_seen) continue;
            }
            double s = sm.scores(i, j);
            if (!std::isinf(c) && seen_mask[j]) s += c;
            if (best < 0 || s > best_s || (s == best_s && sm.candidates[j] < sm.candidates[best]))
                best = j, best_s = s;
        }
        if (best < 0) throw DomainError("predict: empty restricted candidate set");
        out[i] = sm.candidates[best];
    }
    return out;
}

struct GroupedTruths {
    std::vector<int> seen_rows, unseen_rows;
    std::vector<int> seen_truths, unseen_truths;
};

GroupedTruths group_truths(const std::vector<int>& truths, const SplitSpec& split) {
    GroupedTruths g;
    for (size_t i = 0; i < truths.size(); ++i) {
        if (split.is_seen(truths[i])) {
            g.seen_rows.push_back(static_cast<int>(i));
            g.seen_truths.push_back(truths[i]);
        } else if (split.is_unseen(truths[i])) {
            g.unseen_rows.push_back(static_cast<int>(i));
            g.unseen_truths.push_back(truths[i]);
        } else {
            throw DomainError("evaluate: truth pair is neither seen nor unseen");
        }
    }
    return g;
}

std::vector<int> take(const std::vector<int>& v, const std::vector<int>& rows) {
    std::vector<int> out;
    out.reserve(rows.size());
    for (int r : rows) out.push_back(v[r]);
    return out;
}

double group_accuracy(const std::vector<int>& preds, const std::vector<int>& truths,
                      const std::vector<int>& pair_set, bool balanced) {
    return balanced ? balanced_accuracy(preds, truths, pair_set) : accuracy(preds, truths);
}

std::vector<bool> seen_candidate_mask(const ScoreMatrix& sm, const SplitSpec& split) {
    std::vector<bool> mask(sm.candidates.size());
    for (size_t j = 0; j < sm.candidates.size(); ++j) mask[j] = split.is_seen(sm.candidates[j]);
    return mask;
}

std::pair<double, double> sweep_point(const ScoreMatrix& sm, const GroupedTruths& g,
                                      const SplitSpec& split, bool balanced,
                                      const std::vector<bool>& mask, double c) {
    const std::vector<int> preds = predict_shifted(sm, mask, c);
    const double s = group_accuracy(take(preds, g.seen_rows), g.seen_truths, split.seen, balanced);
    const double u =
        group_accuracy(take(preds, g.unseen_rows), g.unseen_truths, split.unseen, balanced);
    return {s, u};
}

}  // namespace

OpenEval evaluate_open(const ScoreMatrix& scores, const std::vector<int>& truths,
                       const SplitSpec& split, bool balanced) {
    if (static_cast<int>(truths.size()) != scores.scores.rows)
        throw ConfigError("evaluate_open: truth count mismatch");
    GroupedTruths g = group_truths(truths, split);
    if (g.seen_rows.empty() || g.unseen_rows.empty())
        throw DomainError("evaluate_open: needs both seen and unseen truth samples");
    const std::vector<int> preds = predict(scores);
    OpenEval r;
    r.seen_acc = group_accuracy(take(preds, g.seen_rows), g.seen_truths, split.seen, balanced);
    r.unseen_acc =
        group_accuracy(take(preds, g.unseen_rows), g.unseen_truths, split.unseen, balanced);
    r.harmonic = harmonic_mean(r.seen_acc, r.unseen_acc);
    return r;
}

double evaluate_closed(const ScoreMatrix& scores, const std::vector<int>& truths,
                       const SplitSpec& split, bool balanced) {
    for (int pid : scores.candidates)
        if (!split.is_unseen(pid))
            throw ConfigError("evaluate_closed: candidate set must contain unseen pairs only");
    for (int t : truths)
        if (!split.is_unseen(t)) throw DomainError("evaluate_closed: truth is not an unseen pair");
    const std::vector<int> preds = predict(scores);
    return group_accuracy(preds, truths, split.unseen, balanced);
}

AusucResult ausuc(const ScoreMatrix& scores, const std::vector<int>& truths,
                  const SplitSpec& split, bool balanced, int num_points) {
    if (num_points < 3) throw ConfigError("ausuc: need at least 3 sweep points");
    if (static_cast<int>(truths.size()) != scores.scores.rows)
        throw ConfigError("ausuc: truth count mismatch");
    GroupedTruths g = group_truths(truths, split);
    if (g.seen_rows.empty() || g.unseen_rows.empty())
        throw DomainError("ausuc: needs both seen and unseen truth samples");
    const std::vector<bool> mask = seen_candidate_mask(scores, split);

    double lo = scores.scores(0, 0), hi = scores.scores(0, 0);
    for (double v : scores.scores.d) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    const double delta = hi - lo;

    AusucResult res;
    const double inf = std::numeric_limits<double>::infinity();
    auto add_point = [&](double c) {
        auto [s, u] = sweep_point(scores, g, split, balanced, mask, c);
        res.curve.push_back({c, s, u});
    };
    add_point(-inf);
    for (int i = 0; i < num_points; ++i)
        add_point(-delta + 2.0 * delta * i / static_cast<double>(num_points - 1));
    add_point(inf);

    std::vector<CurvePoint> by_seen = res.curve;
    // Integrate the upper envelope: one point per distinct seen accuracy,
    // keeping the best unseen accuracy reached at that level.
    std::sort(by_seen.begin(), by_seen.end(), [](const CurvePoint& a, const CurvePoint& b) {
        if (a.seen_acc != b.seen_acc) return a.seen_acc < b.seen_acc;
        return a.unseen_acc > b.unseen_acc;
    });
    std::vector<CurvePoint> envelope;
    for (const CurvePoint& p : by_seen)
        if (envelope.empty() || p.seen_acc != envelope.back().seen_acc) envelope.push_back(p);
    double area = 0.0;
    for (size_t i = 1; i < envelope.size(); ++i)
        area += (envelope[i].seen_acc - envelope[i - 1].seen_acc) *
                0.5 * (envelope[i].unseen_acc + envelope[i - 1].unseen_acc);
    res.area = area;
    res.degenerate = envelope.size() < 2;
    if (res.degenerate) res.area = 0.0;
    return res;
}

// --- PIDA -------------------------------------------------------------------

CoreExtractor core_extractor(Model& model) {
    switch (model.method) {
        case Method::Causal:
        case Method::CausalNoIndep:
            return [&model](const Tensor2& x) { return recover_cores(model, x, false); };
        case Method::VisProd:
        case Method::VisProdCI:
            return [&model](const Tensor2& x) {
                Tape tape;
                Var raw = tape.constant(x);
                Var xin = raw;
                if (model.has_projection)
                    xin = mlp_forward_rec(tape, model.proj, "proj", model.params, raw, false).output;
                MlpOut a =
                    mlp_forward_rec(tape, model.clf_attr, "clf_attr", model.params, xin, false);
                MlpOut o =
                    mlp_forward_rec(tape, model.clf_obj, "clf_obj", model.params, xin, false);
                return CoreBatch{tape.value(a.last_hidden), tape.value(o.last_hidden)};
            };
        case Method::LE:
            throw DomainError("core_extractor: LE has no attribute/object representation");
    }
    throw UsageError("core_extractor: unreachable");
}

namespace {

double euclid(const Tensor2& a, const Tensor2& b) {
    double s = 0.0;
    for (size_t i = 0; i < a.d.size(); ++i) {
        const double e = a.d[i] - b.d[i];
        s += e * e;
    }
    return std::sqrt(s);
}

Tensor2 stack_rows(const std::vector<Tensor2>& parts) {
    int rows = 0;
    for (const auto& p : parts) rows += p.rows;
    Tensor2 out(rows, parts.front().cols);
    int at = 0;
    for (const auto& p : parts) {
        std::copy(p.d.begin(), p.d.end(), out.d.begin() + static_cast<size_t>(at) * out.cols);
        at += p.rows;
    }
    return out;
}

// E[phi] under do(attr) with the other label marginalized over `marg`.
Tensor2 do_marginal_mean(const CoreExtractor& extract, const ScmInstance& inst, bool fix_attr,
                         int fixed, const std::vector<double>& marg, int n, Rng& rng) {
    std::vector<int> counts(marg.size(), 0);
    for (int i = 0; i < n; ++i) ++counts[rng.categorical(marg)];
    std::vector<Tensor2> xs;
    for (size_t other = 0; other < counts.size(); ++other) {
        if (counts[other] == 0) continue;
        const int a = fix_attr ? fixed : static_cast<int>(other);
        const int o = fix_attr ? static_cast<int>(other) : fixed;
        xs.push_back(sample_do(inst.tables, inst.config, a, o, counts[other], rng).x);
    }
    CoreBatch cores = extract(stack_rows(xs));
    return col_mean(fix_attr ? cores.phi_a : cores.phi_o);
}

}  // namespace

PidaResult pida(const CoreExtractor& extract, const ScmInstance& inst, int samples_per_do,
                uint64_t seed) {
    if (inst.data.provenance != "scm")
        throw DomainError("pida: only supported for SCM-generated datasets");
    if (samples_per_do < 1) throw ConfigError("pida: samples_per_do must be positive");
    Rng rng(seed);
    const int na = inst.vocab.num_attrs();
    const int no = inst.vocab.num_objs();
    const std::vector<double> obj_marg = inst.joint.obj_marginal(inst.vocab);
    const std::vector<double> attr_marg = inst.joint.attr_marginal(inst.vocab);

    std::vector<Tensor2> mean_do_a(na), mean_do_o(no);
    for (int a = 0; a < na; ++a)
        mean_do_a[a] = do_marginal_mean(extract, inst, true, a, obj_marg, samples_per_do, rng);
    for (int o = 0; o < no; ++o)
        mean_do_o[o] = do_marginal_mean(extract, inst, false, o, attr_marg, samples_per_do, rng);

    PidaResult res;
    for (int a = 0; a < na; ++a) {
        for (int o = 0; o < no; ++o) {
            const Tensor2 x = sample_do(inst.tables, inst.config, a, o, samples_per_do, rng).x;
            CoreBatch cores = extract(x);
            res.pida_attr += euclid(mean_do_a[a], col_mean(cores.phi_a));
            res.pida_obj += euclid(mean_do_o[o], col_mean(cores.phi_o));
        }
    }
    const double num_pairs = static_cast<double>(na) * no;
    res.pida_attr /= num_pairs;
    res.pida_obj /= num_pairs;
    return res;
}

// --- full model evaluation ---------------------------------------------------

EvalReport evaluate_model(Model& model, const FeatureDataset& data, const SplitSpec& split,
                          SplitTag tag, const LossWeights& weights, const EvalOptions& opts,
                          const ScmInstance* inst) {
    if (tag == SplitTag::Train)
        throw ConfigError("evaluate_model: evaluation runs on the val or test split");
    const std::vector<int> rows = data.rows_with_tag(tag);
    if (rows.empty()) throw DomainError("evaluate_model: empty evaluation split");

    const std::vector<int>& tag_unseen =
        (tag == SplitTag::Val) ? split.val_unseen : split.test_unseen;
    std::vector<int> candidates = split.seen;
    candidates.insert(candidates.end(), tag_unseen.begin(), tag_unseen.end());
    std::sort(candidates.begin(), candidates.end());

    Batch batch = make_batch(data, rows);
    std::vector<int> truths(rows.size());
    for (size_t i = 0; i < rows.size(); ++i)
        truths[i] = model.vocab.pair_id(batch.attr_ids[i], batch.obj_ids[i]);

    EvalReport r;
    r.split_tag = to_string(tag);

    const ScoreMatrix open_scores = score_pairs(model, batch.x, candidates, weights);
    OpenEval open = evaluate_open(open_scores, truths, split, opts.balanced);
    r.seen_acc = open.seen_acc;
    r.unseen_acc = open.unseen_acc;
    r.harmonic = open.harmonic;

    // Per-pair open accuracy plus the unseen-sample confusion counters.
    {
        const std::vector<int> preds = predict(open_scores);
        std::map<int, std::pair<long, long>> tally;
        for (size_t i = 0; i < preds.size(); ++i) {
            auto& [c, t] = tally[truths[i]];
            c += (preds[i] == truths[i]);
            ++t;
            if (split.is_unseen(truths[i]) && preds[i] != truths[i]) {
                if (split.is_seen(preds[i]))
                    ++r.confusion_unseen_to_seen;
                else
                    ++r.confusion_unseen_wrong;
            }
        }
        for (const auto& [pid, ct] : tally)
            r.per_pair_acc[pid] = static_cast<double>(ct.first) / static_cast<double>(ct.second);
    }

    // Closed: unseen candidates only, unseen-truth samples only.
    {
        std::vector<int> u_rows;
        for (size_t i = 0; i < truths.size(); ++i)
            if (split.is_unseen(truths[i])) u_rows.push_back(static_cast<int>(i));
        std::vector<int> data_rows;
        for (int i : u_rows) data_rows.push_back(rows[i]);
        Batch ub = make_batch(data, data_rows);
        std::vector<int> u_cands = tag_unseen;
        std::sort(u_cands.begin(), u_cands.end());
        const ScoreMatrix closed_scores = score_pairs(model, ub.x, u_cands, weights);
        r.closed_acc = evaluate_closed(closed_scores, take(truths, u_rows), split, opts.balanced);
    }

    if (opts.with_ausuc) {
        AusucResult a = ausuc(open_scores, truths, split, opts.balanced, opts.ausuc_points);
        r.ausuc = a.area;
        r.curve = std::move(a.curve);
    }

    if (opts.with_hsic && model.method != Method::LE) {
        CoreBatch cores = core_extractor(model)(batch.x);
        r.hsic_attr_residual = conditional_hsic(
            cores.phi_a, one_hot(batch.obj_ids, model.vocab.num_objs()), batch.attr_ids);
        r.hsic_obj_residual = conditional_hsic(
            cores.phi_o, one_hot(batch.attr_ids, model.vocab.num_attrs()), batch.obj_ids);
    }

    if (opts.with_pida) {
        if (!inst) throw ConfigError("evaluate_model: PIDA requested without an SCM instance");
        PidaResult p = pida(core_extractor(model), *inst, opts.pida_samples, opts.pida_seed);
        r.pida_attr = p.pida_attr;
        r.pida_obj = p.pida_obj;
    }
    return r;
}

// --- serialization ------------------------------------------------------------

std::string EvalReport::to_json_string() const {
    json j;
    j["unseen_acc"] = unseen_acc;
    j["seen_acc"] = seen_acc;
    j["harmonic"] = harmonic;
    j["closed_acc"] = closed_acc;
    j["ausuc"] = ausuc;
    j["pida_attr"] = pida_attr;
    j["pida_obj"] = pida_obj;
    j["hsic_attr_residual"] = hsic_attr_residual;
    j["hsic_obj_residual"] = hsic_obj_residual;
    j["confusion_unseen_to_seen"] = confusion_unseen_to_seen;
    j["confusion_unseen_wrong"] = confusion_unseen_wrong;
    j["split_tag"] = split_tag;
    j["seed"] = seed;
    j["epoch"] = epoch;
    json pp = json::object();
    for (const auto& [pid, acc] : per_pair_acc) pp[std::to_string(pid)] = acc;
    j["per_pair_acc"] = pp;
    json curve_json = json::array();
    for (const auto& p : curve)
        curve_json.push_back({{"constant", p.constant}, {"seen", p.seen_acc}, {"unseen", p.unseen_acc}});
    j["curve"] = curve_json;
    return j.dump(2);
}

std::string summary_csv_header() {
    return "method,ratio,split_seed,model_seed,unseen,seen,harmonic,closed,ausuc,"
           "pida_attr,pida_obj,u_to_s,u_to_u";
}

std::string summary_csv_row(const EvalReport& r, const std::string& method,
                            const std::string& ratio, uint64_t split_seed, uint64_t model_seed) {
    char buf[512];
    auto fmt = [](double v) {
        char b[48];
        if (v < 0) return std::string();  // metric absent
        std::snprintf(b, sizeof(b), "%.6f", v);
        return std::string(b);
    };
    std::snprintf(buf, sizeof(buf), "%s,%s,%llu,%llu,%s,%s,%s,%s,%s,%s,%s,%ld,%ld",
                  method.c_str(), ratio.c_str(),
                  static_cast<unsigned long long>(split_seed),
                  static_cast<unsigned long long>(model_seed), fmt(r.unseen_acc).c_str(),
                  fmt(r.seen_acc).c_str(), fmt(r.harmonic).c_str(), fmt(r.closed_acc).c_str(),
                  fmt(r.ausuc).c_str(), fmt(r.pida_attr).c_str(), fmt(r.pida_obj).c_str(),
                  r.confusion_unseen_to_seen, r.confusion_unseen_wrong);
    return std::string(buf);
}

}  // namespace czsl

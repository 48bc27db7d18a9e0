#include "czsl/scm.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "czsl/error.hpp"

namespace czsl {

using nlohmann::json;

int PairVocabulary::attr_index(const std::string& name) const {
    for (int i = 0; i < num_attrs(); ++i)
        if (attrs[i] == name) return i;
    return -1;
}

int PairVocabulary::obj_index(const std::string& name) const {
    for (int i = 0; i < num_objs(); ++i)
        if (objs[i] == name) return i;
    return -1;
}

void PairVocabulary::validate() const {
    if (num_attrs() < 2 || num_objs() < 2)
        throw ConfigError("PairVocabulary: need at least 2 attributes and 2 objects");
    std::set<std::string> a(attrs.begin(), attrs.end()), o(objs.begin(), objs.end());
    if (static_cast<int>(a.size()) != num_attrs() || static_cast<int>(o.size()) != num_objs())
        throw ConfigError("PairVocabulary: duplicate label names");
}

PairVocabulary PairVocabulary::ao_clevr() {
    return PairVocabulary{
        {"red", "purple", "yellow", "blue", "green", "cyan", "gray", "brown"},
        {"sphere", "cube", "cylinder"}};
}

SplitMode split_mode_from_string(const std::string& s) {
    if (s == "overlapping") return SplitMode::Overlapping;
    if (s == "non_overlapping") return SplitMode::NonOverlapping;
    throw ConfigError("unknown split mode: " + s);
}

std::string to_string(SplitMode m) {
    return m == SplitMode::Overlapping ? "overlapping" : "non_overlapping";
}

bool SplitSpec::is_seen(int pid) const {
    return std::find(seen.begin(), seen.end(), pid) != seen.end();
}

bool SplitSpec::is_unseen(int pid) const {
    return std::find(unseen.begin(), unseen.end(), pid) != unseen.end();
}

void SplitSpec::validate(const PairVocabulary& vocab) const {
    std::set<int> s(seen.begin(), seen.end()), u(unseen.begin(), unseen.end());
    for (int pid : u)
        if (s.count(pid)) throw SplitError("SplitSpec: pair in both seen and unseen sets");
    for (int pid : seen)
        if (pid < 0 || pid >= vocab.num_pairs()) throw SplitError("SplitSpec: pair id out of range");
    for (int pid : unseen)
        if (pid < 0 || pid >= vocab.num_pairs()) throw SplitError("SplitSpec: pair id out of range");
    std::set<int> covered_a, covered_o;
    for (int pid : seen) {
        auto [a, o] = vocab.pair_labels(pid);
        covered_a.insert(a);
        covered_o.insert(o);
    }
    for (int a = 0; a < vocab.num_attrs(); ++a)
        if (!covered_a.count(a))
            throw SplitError("SplitSpec: attribute '" + vocab.attrs[a] + "' has no seen pair");
    for (int o = 0; o < vocab.num_objs(); ++o)
        if (!covered_o.count(o))
            throw SplitError("SplitSpec: object '" + vocab.objs[o] + "' has no seen pair");
    if (mode == SplitMode::NonOverlapping) {
        std::set<int> vu(val_unseen.begin(), val_unseen.end());
        for (int pid : test_unseen)
            if (vu.count(pid))
                throw SplitError("SplitSpec: non-overlapping mode but val/test unseen sets intersect");
    }
}

double ratio_tag_to_fraction(const std::string& tag) {
    const auto colon = tag.find(':');
    if (colon == std::string::npos) throw ConfigError("ratio tag must look like 'u:s': " + tag);
    const double u = std::stod(tag.substr(0, colon));
    const double s = std::stod(tag.substr(colon + 1));
    if (u <= 0 || s <= 0) throw ConfigError("ratio tag parts must be positive: " + tag);
    return u / (u + s);
}

SplitSpec sample_split(const PairVocabulary& vocab, double unseen_fraction, SplitMode mode,
                       uint64_t seed) {
    vocab.validate();
    if (unseen_fraction <= 0.0 || unseen_fraction >= 1.0)
        throw ConfigError("sample_split: unseen_fraction must be in (0, 1)");
    const int total = vocab.num_pairs();
    // Nearest rounding; at least 2 unseen pairs and at least 1 seen pair.
    int num_unseen = static_cast<int>(std::lround(total * unseen_fraction));
    num_unseen = std::max(2, std::min(num_unseen, total - 1));

    Rng rng(seed);
    constexpr int kMaxRetries = 1000;
    std::string missing;
    for (int attempt = 0; attempt < kMaxRetries; ++attempt) {
        const std::vector<int> perm = rng.permutation(total);
        SplitSpec split;
        split.mode = mode;
        split.seed = seed;
        split.unseen.assign(perm.begin(), perm.begin() + num_unseen);
        split.seen.assign(perm.begin() + num_unseen, perm.end());
        std::sort(split.unseen.begin(), split.unseen.end());
        std::sort(split.seen.begin(), split.seen.end());

        // Coverage check: every attribute/object must appear in a seen pair.
        std::set<int> covered_a, covered_o;
        for (int pid : split.seen) {
            auto [a, o] = vocab.pair_labels(pid);
            covered_a.insert(a);
            covered_o.insert(o);
        }
        bool ok = true;
        for (int a = 0; a < vocab.num_attrs() && ok; ++a)
            if (!covered_a.count(a)) {
                ok = false;
                missing = "attribute '" + vocab.attrs[a] + "'";
            }
        for (int o = 0; o < vocab.num_objs() && ok; ++o)
            if (!covered_o.count(o)) {
                ok = false;
                missing = "object '" + vocab.objs[o] + "'";
            }
        if (!ok) continue;

        if (mode == SplitMode::Overlapping) {
            split.val_unseen = split.unseen;
            split.test_unseen = split.unseen;
        } else {
            // Hold out 20% of all pairs (capped to leave test-unseen nonempty)
            // as validation-unseen, disjoint from test-unseen.
            int num_val = static_cast<int>(std::lround(total * 0.2));
            num_val = std::max(1, std::min(num_val, num_unseen - 1));
            std::vector<int> shuffled = split.unseen;
            const std::vector<int> p = rng.permutation(num_unseen);
            for (int i = 0; i < num_unseen; ++i) shuffled[i] = split.unseen[p[i]];
            split.val_unseen.assign(shuffled.begin(), shuffled.begin() + num_val);
            split.test_unseen.assign(shuffled.begin() + num_val, shuffled.end());
            std::sort(split.val_unseen.begin(), split.val_unseen.end());
            std::sort(split.test_unseen.begin(), split.test_unseen.end());
        }
        split.validate(vocab);
        return split;
    }
    throw SplitError("sample_split: could not cover " + missing + " after " +
                     std::to_string(kMaxRetries) + " retries");
}

PairJoint PairJoint::make(const SplitSpec& split, double alpha, bool uniform, uint64_t seed) {
    if (!uniform && alpha <= 0.0) throw ConfigError("PairJoint: alpha must be positive");
    PairJoint joint;
    joint.pairs = split.seen;
    const int k = static_cast<int>(joint.pairs.size());
    if (k == 0) throw SplitError("PairJoint: empty seen set");
    if (uniform) {
        joint.probs.assign(k, 1.0 / k);
    } else {
        Rng rng(seed);
        joint.probs = rng.dirichlet(alpha, k);
    }
    return joint;
}

int PairJoint::sample(Rng& rng) const { return pairs[rng.categorical(probs)]; }

std::vector<double> PairJoint::obj_marginal(const PairVocabulary& vocab) const {
    std::vector<double> m(vocab.num_objs(), 0.0);
    for (size_t i = 0; i < pairs.size(); ++i) m[vocab.pair_labels(pairs[i]).second] += probs[i];
    return m;
}

std::vector<double> PairJoint::attr_marginal(const PairVocabulary& vocab) const {
    std::vector<double> m(vocab.num_attrs(), 0.0);
    for (size_t i = 0; i < pairs.size(); ++i) m[vocab.pair_labels(pairs[i]).first] += probs[i];
    return m;
}

double PairJoint::entropy() const {
    double h = 0.0;
    for (double p : probs)
        if (p > 0.0) h -= p * std::log(p);
    return h;
}

void ScmConfig::validate() const {
    if (core_dim_attr <= 0 || core_dim_obj <= 0) throw ConfigError("ScmConfig: core dims must be positive");
    if (sigma_attr < 0 || sigma_obj < 0 || sigma_x < 0) throw ConfigError("ScmConfig: sigmas must be >= 0");
    if (!uniform_pairs && alpha <= 0) throw ConfigError("ScmConfig: alpha must be positive");
    if (!identity_concat && (feature_dim <= 0 || gen_hidden <= 0))
        throw ConfigError("ScmConfig: feature_dim and gen_hidden must be positive");
    if (train_per_pair <= 0 || val_per_pair <= 0 || test_per_pair <= 0)
        throw ConfigError("ScmConfig: per-pair counts must be positive");
}

ScmTables ScmTables::make(const ScmConfig& cfg, const PairVocabulary& vocab, Rng& rng) {
    cfg.validate();
    ScmTables t;
    t.identity_concat = cfg.identity_concat;
    t.h_attr = Tensor2::randn(vocab.num_attrs(), cfg.core_dim_attr, rng);
    t.h_obj = Tensor2::randn(vocab.num_objs(), cfg.core_dim_obj, rng);
    if (!cfg.identity_concat) {
        const int in = cfg.core_dim_attr + cfg.core_dim_obj;
        t.w1 = Tensor2::randn(in, cfg.gen_hidden, rng, std::sqrt(1.0 / in));
        t.b1 = Tensor2::randn(1, cfg.gen_hidden, rng, 0.1);
        t.w2 = Tensor2::randn(cfg.gen_hidden, cfg.feature_dim, rng, std::sqrt(1.0 / cfg.gen_hidden));
        t.b2 = Tensor2::randn(1, cfg.feature_dim, rng, 0.1);
    }
    return t;
}

Tensor2 ScmTables::generate(const Tensor2& phi_concat) const {
    if (identity_concat) return phi_concat;
    Tensor2 h = matmul(phi_concat, w1);
    for (int i = 0; i < h.rows; ++i)
        for (int j = 0; j < h.cols; ++j) h(i, j) = std::tanh(h(i, j) + b1.d[j]);
    Tensor2 out = matmul(h, w2);
    for (int i = 0; i < out.rows; ++i)
        for (int j = 0; j < out.cols; ++j) out(i, j) += b2.d[j];
    return out;
}

std::string to_string(SplitTag t) {
    switch (t) {
        case SplitTag::Train: return "train";
        case SplitTag::Val: return "val";
        case SplitTag::Test: return "test";
    }
    return "train";
}

SplitTag split_tag_from_string(const std::string& s) {
    if (s == "train") return SplitTag::Train;
    if (s == "val") return SplitTag::Val;
    if (s == "test") return SplitTag::Test;
    throw LoadError("unknown split tag: " + s);
}

std::vector<int> FeatureDataset::rows_with_tag(SplitTag t) const {
    std::vector<int> rows;
    for (int i = 0; i < size(); ++i)
        if (tags[i] == t) rows.push_back(i);
    return rows;
}

void FeatureDataset::validate(const PairVocabulary& vocab, const SplitSpec& split) const {
    if (static_cast<int>(attr_ids.size()) != size() || static_cast<int>(obj_ids.size()) != size() ||
        static_cast<int>(tags.size()) != size())
        throw ConfigError("FeatureDataset: column length mismatch");
    if (!features.all_finite()) throw NumericError("FeatureDataset: non-finite features");
    std::set<int> seen(split.seen.begin(), split.seen.end());
    std::set<int> val_ok = seen, test_ok = seen;
    val_ok.insert(split.val_unseen.begin(), split.val_unseen.end());
    test_ok.insert(split.test_unseen.begin(), split.test_unseen.end());
    for (int i = 0; i < size(); ++i) {
        const int pid = pair_id(vocab, i);
        if (tags[i] == SplitTag::Train && !seen.count(pid))
            throw ConfigError("FeatureDataset: train row " + std::to_string(i) +
                              " carries a non-seen pair");
        if (tags[i] == SplitTag::Val && !val_ok.count(pid))
            throw ConfigError("FeatureDataset: val row " + std::to_string(i) +
                              " carries a pair outside the validation pair set");
        if (tags[i] == SplitTag::Test && !test_ok.count(pid))
            throw ConfigError("FeatureDataset: test row " + std::to_string(i) +
                              " carries a pair outside the test pair set");
    }
}

namespace {

void emit_rows(const ScmTables& tables, const ScmConfig& cfg, const PairVocabulary& vocab,
               const std::vector<int>& pair_ids, SplitTag tag, Rng& rng, FeatureDataset& out,
               int& cursor) {
    const int d_a = cfg.core_dim_attr;
    const int d_o = cfg.core_dim_obj;
    for (int pid : pair_ids) {
        const auto [a, o] = vocab.pair_labels(pid);
        Tensor2 phi(1, d_a + d_o);
        for (int j = 0; j < d_a; ++j) phi(0, j) = tables.h_attr(a, j) + cfg.sigma_attr * rng.normal();
        for (int j = 0; j < d_o; ++j)
            phi(0, d_a + j) = tables.h_obj(o, j) + cfg.sigma_obj * rng.normal();
        Tensor2 x = tables.generate(phi);
        for (int j = 0; j < x.cols; ++j) out.features(cursor, j) = x(0, j) + cfg.sigma_x * rng.normal();
        out.attr_ids[cursor] = a;
        out.obj_ids[cursor] = o;
        out.tags[cursor] = tag;
        ++cursor;
    }
}

}  // namespace

ScmInstance generate_dataset(const PairVocabulary& vocab, const SplitSpec& split,
                             const ScmConfig& cfg, uint64_t seed) {
    vocab.validate();
    split.validate(vocab);
    cfg.validate();

    Rng root(seed);
    Rng table_rng = root.fork(1);
    Rng joint_rng = root.fork(2);
    Rng train_rng = root.fork(3);
    Rng eval_rng = root.fork(4);

    ScmInstance inst;
    inst.vocab = vocab;
    inst.split = split;
    inst.config = cfg;
    inst.seed = seed;
    inst.tables = ScmTables::make(cfg, vocab, table_rng);
    inst.joint = PairJoint::make(split, cfg.alpha, cfg.uniform_pairs, joint_rng.next_u64());

    // Train rows: confounded joint over seen pairs.
    std::vector<int> train_pairs;
    const int n_train = static_cast<int>(split.seen.size()) * cfg.train_per_pair;
    train_pairs.reserve(n_train);
    for (int i = 0; i < n_train; ++i) train_pairs.push_back(inst.joint.sample(train_rng));

    // Val/test rows: fixed per-pair counts over their allowed pair sets.
    std::vector<int> val_pairs, test_pairs;
    std::vector<int> val_set = split.seen;
    val_set.insert(val_set.end(), split.val_unseen.begin(), split.val_unseen.end());
    std::sort(val_set.begin(), val_set.end());
    std::vector<int> test_set = split.seen;
    test_set.insert(test_set.end(), split.test_unseen.begin(), split.test_unseen.end());
    std::sort(test_set.begin(), test_set.end());
    for (int pid : val_set)
        for (int i = 0; i < cfg.val_per_pair; ++i) val_pairs.push_back(pid);
    for (int pid : test_set)
        for (int i = 0; i < cfg.test_per_pair; ++i) test_pairs.push_back(pid);

    const int n_total = n_train + static_cast<int>(val_pairs.size() + test_pairs.size());
    inst.data.features = Tensor2(n_total, cfg.effective_feature_dim());
    inst.data.attr_ids.resize(n_total);
    inst.data.obj_ids.resize(n_total);
    inst.data.tags.resize(n_total);
    inst.data.provenance = "scm";

    int cursor = 0;
    emit_rows(inst.tables, cfg, vocab, train_pairs, SplitTag::Train, train_rng, inst.data, cursor);
    emit_rows(inst.tables, cfg, vocab, val_pairs, SplitTag::Val, eval_rng, inst.data, cursor);
    emit_rows(inst.tables, cfg, vocab, test_pairs, SplitTag::Test, eval_rng, inst.data, cursor);

    inst.data.validate(vocab, split);
    return inst;
}

InterventionalSample sample_do(const ScmTables& tables, const ScmConfig& cfg, int attr, int obj,
                               int n, Rng& rng) {
    const int d_a = cfg.core_dim_attr;
    const int d_o = cfg.core_dim_obj;
    InterventionalSample s;
    s.phi_a = Tensor2(n, d_a);
    s.phi_o = Tensor2(n, d_o);
    Tensor2 phi(n, d_a + d_o);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < d_a; ++j) {
            s.phi_a(i, j) = tables.h_attr(attr, j) + cfg.sigma_attr * rng.normal();
            phi(i, j) = s.phi_a(i, j);
        }
        for (int j = 0; j < d_o; ++j) {
            s.phi_o(i, j) = tables.h_obj(obj, j) + cfg.sigma_obj * rng.normal();
            phi(i, d_a + j) = s.phi_o(i, j);
        }
    }
    s.x = tables.generate(phi);
    for (auto& v : s.x.d) v += cfg.sigma_x * rng.normal();
    return s;
}

// --- external interfaces -------------------------------------------------

namespace {

std::string fmt_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) fields.push_back(field);
    if (!line.empty() && line.back() == ',') fields.push_back("");
    return fields;
}

std::vector<int> parse_pair_list(const json& arr, const PairVocabulary& vocab,
                                 const std::string& what) {
    std::vector<int> out;
    for (const auto& item : arr) {
        if (!item.is_array() || item.size() != 2)
            throw LoadError("splits json: " + what + " entries must be [attr, obj] pairs");
        const int a = vocab.attr_index(item[0].get<std::string>());
        const int o = vocab.obj_index(item[1].get<std::string>());
        if (a < 0 || o < 0)
            throw LoadError("splits json: unknown label in " + what + ": [" +
                            item[0].get<std::string>() + ", " + item[1].get<std::string>() + "]");
        out.push_back(vocab.pair_id(a, o));
    }
    std::sort(out.begin(), out.end());
    return out;
}

json pair_list_json(const std::vector<int>& pids, const PairVocabulary& vocab) {
    json arr = json::array();
    for (int pid : pids) {
        const auto [a, o] = vocab.pair_labels(pid);
        arr.push_back(json::array({vocab.attrs[a], vocab.objs[o]}));
    }
    return arr;
}

}  // namespace

void export_features(const FeatureDataset& data, const PairVocabulary& vocab,
                     const std::string& csv_path) {
    std::ofstream os(csv_path);
    if (!os) throw LoadError("export_features: cannot open " + csv_path);
    const int d = data.features.cols;
    for (int j = 0; j < d; ++j) os << "f" << j << ",";
    os << "attr,obj,split\n";
    for (int i = 0; i < data.size(); ++i) {
        for (int j = 0; j < d; ++j) os << fmt_double(data.features(i, j)) << ",";
        os << vocab.attrs[data.attr_ids[i]] << "," << vocab.objs[data.obj_ids[i]] << ","
           << to_string(data.tags[i]) << "\n";
    }
}

void export_splits(const SplitSpec& split, const PairVocabulary& vocab,
                   const std::string& json_path) {
    json j;
    j["attrs"] = vocab.attrs;
    j["objs"] = vocab.objs;
    j["seen"] = pair_list_json(split.seen, vocab);
    j["unseen"] = pair_list_json(split.unseen, vocab);
    j["val_unseen"] = pair_list_json(split.val_unseen, vocab);
    j["test_unseen"] = pair_list_json(split.test_unseen, vocab);
    j["mode"] = to_string(split.mode);
    j["ratio_tag"] = split.ratio_tag;
    j["seed"] = split.seed;
    std::ofstream os(json_path);
    if (!os) throw LoadError("export_splits: cannot open " + json_path);
    os << j.dump(2) << "\n";
}

ImportedData import_features(const std::string& csv_path, const std::string& splits_path) {
    std::ifstream sjson(splits_path);
    if (!sjson) throw LoadError("import_features: cannot open " + splits_path);
    json j;
    try {
        sjson >> j;
    } catch (const json::exception& e) {
        throw LoadError("import_features: bad splits json: " + std::string(e.what()));
    }

    ImportedData out;
    out.vocab.attrs = j.at("attrs").get<std::vector<std::string>>();
    out.vocab.objs = j.at("objs").get<std::vector<std::string>>();
    out.vocab.validate();
    out.split.seen = parse_pair_list(j.at("seen"), out.vocab, "seen");
    out.split.unseen = parse_pair_list(j.at("unseen"), out.vocab, "unseen");
    out.split.mode = j.contains("mode") ? split_mode_from_string(j.at("mode").get<std::string>())
                                        : SplitMode::Overlapping;
    if (j.contains("val_unseen") && !j.at("val_unseen").empty())
        out.split.val_unseen = parse_pair_list(j.at("val_unseen"), out.vocab, "val_unseen");
    else
        out.split.val_unseen = out.split.unseen;
    if (j.contains("test_unseen") && !j.at("test_unseen").empty())
        out.split.test_unseen = parse_pair_list(j.at("test_unseen"), out.vocab, "test_unseen");
    else if (out.split.mode == SplitMode::Overlapping)
        out.split.test_unseen = out.split.unseen;
    else {
        // Non-overlapping with only val_unseen listed: the rest of U is test.
        std::set<int> vu(out.split.val_unseen.begin(), out.split.val_unseen.end());
        for (int pid : out.split.unseen)
            if (!vu.count(pid)) out.split.test_unseen.push_back(pid);
    }
    if (j.contains("ratio_tag")) out.split.ratio_tag = j.at("ratio_tag").get<std::string>();
    if (j.contains("seed")) out.split.seed = j.at("seed").get<uint64_t>();
    out.split.validate(out.vocab);

    std::ifstream is(csv_path);
    if (!is) throw LoadError("import_features: cannot open " + csv_path);
    std::string line;
    if (!std::getline(is, line)) throw LoadError("import_features: empty csv");
    const std::vector<std::string> header = split_csv_line(line);
    if (header.size() < 4 || header[header.size() - 3] != "attr" ||
        header[header.size() - 2] != "obj" || header[header.size() - 1] != "split")
        throw LoadError("import_features: bad header (expect f0..f{d-1},attr,obj,split)");
    const int d = static_cast<int>(header.size()) - 3;

    std::vector<double> feat;
    FeatureDataset& data = out.data;
    data.provenance = "imported";
    int line_no = 1;
    std::set<int> seen(out.split.seen.begin(), out.split.seen.end());
    while (std::getline(is, line)) {
        ++line_no;
        if (line.empty()) continue;
        const std::vector<std::string> f = split_csv_line(line);
        if (static_cast<int>(f.size()) != d + 3)
            throw LoadError("import_features: line " + std::to_string(line_no) + ": expected " +
                            std::to_string(d + 3) + " fields, got " + std::to_string(f.size()));
        for (int jx = 0; jx < d; ++jx) {
            char* end = nullptr;
            const double v = std::strtod(f[jx].c_str(), &end);
            if (end == f[jx].c_str() || *end != '\0' || !std::isfinite(v))
                throw LoadError("import_features: line " + std::to_string(line_no) +
                                ": bad feature value '" + f[jx] + "'");
            feat.push_back(v);
        }
        const int a = out.vocab.attr_index(f[d]);
        const int o = out.vocab.obj_index(f[d + 1]);
        if (a < 0)
            throw LoadError("import_features: line " + std::to_string(line_no) +
                            ": unknown attribute '" + f[d] + "'");
        if (o < 0)
            throw LoadError("import_features: line " + std::to_string(line_no) +
                            ": unknown object '" + f[d + 1] + "'");
        SplitTag tag;
        try {
            tag = split_tag_from_string(f[d + 2]);
        } catch (const LoadError&) {
            throw LoadError("import_features: line " + std::to_string(line_no) +
                            ": unknown split tag '" + f[d + 2] + "'");
        }
        const int pid = out.vocab.pair_id(a, o);
        if (tag == SplitTag::Train && !seen.count(pid))
            throw LoadError("import_features: line " + std::to_string(line_no) +
                            ": train row labeled with unseen pair");
        data.attr_ids.push_back(a);
        data.obj_ids.push_back(o);
        data.tags.push_back(tag);
    }
    const int n = static_cast<int>(data.attr_ids.size());
    data.features = Tensor2(n, d);
    data.features.d = std::move(feat);
    data.validate(out.vocab, out.split);
    return out;
}

namespace {

json tensor_json(const Tensor2& t) {
    return json{{"rows", t.rows}, {"cols", t.cols}, {"data", t.d}};
}

Tensor2 tensor_from_json(const json& j, const std::string& what) {
    Tensor2 t(j.at("rows").get<int>(), j.at("cols").get<int>());
    const auto d = j.at("data").get<std::vector<double>>();
    if (d.size() != t.size()) throw LoadError("scm json: bad data length for " + what);
    t.d = d;
    return t;
}

}  // namespace

void export_scm(const ScmInstance& inst, const std::string& json_path) {
    json j;
    const ScmConfig& c = inst.config;
    j["config"] = {{"core_dim_attr", c.core_dim_attr},
                   {"core_dim_obj", c.core_dim_obj},
                   {"feature_dim", c.feature_dim},
                   {"gen_hidden", c.gen_hidden},
                   {"identity_concat", c.identity_concat},
                   {"sigma_attr", c.sigma_attr},
                   {"sigma_obj", c.sigma_obj},
                   {"sigma_x", c.sigma_x},
                   {"alpha", c.alpha},
                   {"uniform_pairs", c.uniform_pairs},
                   {"train_per_pair", c.train_per_pair},
                   {"val_per_pair", c.val_per_pair},
                   {"test_per_pair", c.test_per_pair}};
    j["seed"] = inst.seed;
    j["joint"] = {{"pairs", inst.joint.pairs}, {"probs", inst.joint.probs}};
    json tables;
    tables["h_attr"] = tensor_json(inst.tables.h_attr);
    tables["h_obj"] = tensor_json(inst.tables.h_obj);
    tables["identity_concat"] = inst.tables.identity_concat;
    if (!inst.tables.identity_concat) {
        tables["w1"] = tensor_json(inst.tables.w1);
        tables["b1"] = tensor_json(inst.tables.b1);
        tables["w2"] = tensor_json(inst.tables.w2);
        tables["b2"] = tensor_json(inst.tables.b2);
    }
    j["tables"] = tables;
    std::ofstream os(json_path);
    if (!os) throw LoadError("export_scm: cannot open " + json_path);
    os << j.dump(2) << "\n";
}

ScmInstance import_scm(const std::string& csv_path, const std::string& splits_path,
                       const std::string& scm_path) {
    ImportedData imported = import_features(csv_path, splits_path);
    std::ifstream is(scm_path);
    if (!is) throw LoadError("import_scm: cannot open " + scm_path);
    json j;
    try {
        is >> j;
    } catch (const json::exception& e) {
        throw LoadError("import_scm: bad scm json: " + std::string(e.what()));
    }
    ScmInstance inst;
    inst.vocab = std::move(imported.vocab);
    inst.split = std::move(imported.split);
    inst.data = std::move(imported.data);
    inst.data.provenance = "scm";
    const json& c = j.at("config");
    inst.config.core_dim_attr = c.at("core_dim_attr").get<int>();
    inst.config.core_dim_obj = c.at("core_dim_obj").get<int>();
    inst.config.feature_dim = c.at("feature_dim").get<int>();
    inst.config.gen_hidden = c.at("gen_hidden").get<int>();
    inst.config.identity_concat = c.at("identity_concat").get<bool>();
    inst.config.sigma_attr = c.at("sigma_attr").get<double>();
    inst.config.sigma_obj = c.at("sigma_obj").get<double>();
    inst.config.sigma_x = c.at("sigma_x").get<double>();
    inst.config.alpha = c.at("alpha").get<double>();
    inst.config.uniform_pairs = c.at("uniform_pairs").get<bool>();
    inst.config.train_per_pair = c.at("train_per_pair").get<int>();
    inst.config.val_per_pair = c.at("val_per_pair").get<int>();
    inst.config.test_per_pair = c.at("test_per_pair").get<int>();
    inst.config.validate();
    inst.seed = j.at("seed").get<uint64_t>();
    inst.joint.pairs = j.at("joint").at("pairs").get<std::vector<int>>();
    inst.joint.probs = j.at("joint").at("probs").get<std::vector<double>>();
    if (inst.joint.pairs.size() != inst.joint.probs.size())
        throw LoadError("import_scm: joint pairs/probs length mismatch");
    const json& t = j.at("tables");
    inst.tables.h_attr = tensor_from_json(t.at("h_attr"), "h_attr");
    inst.tables.h_obj = tensor_from_json(t.at("h_obj"), "h_obj");
    inst.tables.identity_concat = t.at("identity_concat").get<bool>();
    if (!inst.tables.identity_concat) {
        inst.tables.w1 = tensor_from_json(t.at("w1"), "w1");
        inst.tables.b1 = tensor_from_json(t.at("b1"), "b1");
        inst.tables.w2 = tensor_from_json(t.at("w2"), "w2");
        inst.tables.b2 = tensor_from_json(t.at("b2"), "b2");
    }
    if (inst.tables.h_attr.rows != inst.vocab.num_attrs() ||
        inst.tables.h_obj.rows != inst.vocab.num_objs())
        throw LoadError("import_scm: table shapes disagree with the vocabulary");
    return inst;
}

}  // namespace czsl

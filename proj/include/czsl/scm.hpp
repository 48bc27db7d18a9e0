#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "czsl/rng.hpp"
#include "czsl/tensor.hpp"

namespace czsl {

// Attribute and object label sets. pair_id = attr * num_objs + obj.
struct PairVocabulary {
    std::vector<std::string> attrs;
    std::vector<std::string> objs;

    int num_attrs() const { return static_cast<int>(attrs.size()); }
    int num_objs() const { return static_cast<int>(objs.size()); }
    int num_pairs() const { return num_attrs() * num_objs(); }
    int pair_id(int a, int o) const { return a * num_objs() + o; }
    std::pair<int, int> pair_labels(int pid) const { return {pid / num_objs(), pid % num_objs()}; }
    int attr_index(const std::string& name) const;
    int obj_index(const std::string& name) const;
    void validate() const;

    // 8 colors x 3 shapes, 24 pairs.
    static PairVocabulary ao_clevr();
};

enum class SplitMode { Overlapping, NonOverlapping };
SplitMode split_mode_from_string(const std::string& s);
std::string to_string(SplitMode m);

// Partition of the pair set into seen pairs S and unseen pairs U, with the
// unseen side further assigned to validation/test roles.
struct SplitSpec {
    std::vector<int> seen;
    std::vector<int> unseen;
    std::vector<int> val_unseen;   // overlapping mode: == unseen
    std::vector<int> test_unseen;  // overlapping mode: == unseen
    SplitMode mode = SplitMode::Overlapping;
    std::string ratio_tag;
    uint64_t seed = 0;

    bool is_seen(int pid) const;
    bool is_unseen(int pid) const;
    void validate(const PairVocabulary& vocab) const;
};

// Draws |U| = round(num_pairs * unseen_fraction) unseen pairs (minimum 2),
// resampling until every attribute and object is covered by a seen pair.
SplitSpec sample_split(const PairVocabulary& vocab, double unseen_fraction, SplitMode mode,
                       uint64_t seed);

// "u:s" ratio tags (2:8 ... 7:3) to an unseen fraction u/(u+s).
double ratio_tag_to_fraction(const std::string& tag);

// Confounded pair distribution over the seen pairs: one Dirichlet(alpha) draw
// per seed, then i.i.d. sampling.
struct PairJoint {
    std::vector<int> pairs;
    std::vector<double> probs;

    static PairJoint make(const SplitSpec& split, double alpha, bool uniform, uint64_t seed);
    int sample(Rng& rng) const;
    // Marginal distribution over objects implied by the joint.
    std::vector<double> obj_marginal(const PairVocabulary& vocab) const;
    std::vector<double> attr_marginal(const PairVocabulary& vocab) const;
    double entropy() const;
};

// Generator-side structural model configuration. The generator network g* is
// frozen at creation and never shown to any learner.
struct ScmConfig {
    int core_dim_attr = 8;
    int core_dim_obj = 8;
    int feature_dim = 16;
    int gen_hidden = 32;        // width of g*'s tanh hidden layer
    bool identity_concat = false;  // g* = [phi_a ; phi_o] (forces feature_dim)
    double sigma_attr = 0.05;
    double sigma_obj = 0.05;
    double sigma_x = 0.05;
    double alpha = 0.3;         // Dirichlet concentration; small = strong confounding
    bool uniform_pairs = false; // alpha -> infinity limit
    int train_per_pair = 300;
    int val_per_pair = 60;
    int test_per_pair = 100;

    void validate() const;
    int effective_feature_dim() const {
        return identity_concat ? core_dim_attr + core_dim_obj : feature_dim;
    }
};

// Frozen ground-truth tables and generator network.
struct ScmTables {
    Tensor2 h_attr;  // num_attrs x core_dim_attr
    Tensor2 h_obj;   // num_objs  x core_dim_obj
    bool identity_concat = false;
    Tensor2 w1, b1, w2, b2;  // tanh MLP, unused in identity-concat mode

    static ScmTables make(const ScmConfig& cfg, const PairVocabulary& vocab, Rng& rng);
    // Apply g* to rows of [phi_a ; phi_o].
    Tensor2 generate(const Tensor2& phi_concat) const;
};

enum class SplitTag { Train, Val, Test };
std::string to_string(SplitTag t);
SplitTag split_tag_from_string(const std::string& s);

struct FeatureDataset {
    Tensor2 features;  // n x d_x
    std::vector<int> attr_ids;
    std::vector<int> obj_ids;
    std::vector<SplitTag> tags;
    std::string provenance;  // "scm" or "imported"

    int size() const { return features.rows; }
    int pair_id(const PairVocabulary& vocab, int row) const {
        return vocab.pair_id(attr_ids[row], obj_ids[row]);
    }
    std::vector<int> rows_with_tag(SplitTag t) const;
    void validate(const PairVocabulary& vocab, const SplitSpec& split) const;
};

// A generated dataset together with everything needed to draw fresh
// interventional samples from the same structural model (for PIDA).
struct ScmInstance {
    PairVocabulary vocab;
    SplitSpec split;
    ScmConfig config;
    ScmTables tables;
    PairJoint joint;
    FeatureDataset data;
    uint64_t seed = 0;
};

ScmInstance generate_dataset(const PairVocabulary& vocab, const SplitSpec& split,
                             const ScmConfig& cfg, uint64_t seed);

// Draw n samples of (phi_a, phi_o, x) with labels forced to (a, o).
struct InterventionalSample {
    Tensor2 phi_a;
    Tensor2 phi_o;
    Tensor2 x;
};
InterventionalSample sample_do(const ScmTables& tables, const ScmConfig& cfg, int attr, int obj,
                               int n, Rng& rng);

// --- external interfaces -------------------------------------------------

// Feature CSV: header f0,...,f{d-1},attr,obj,split. Round-trips bit-exactly.
void export_features(const FeatureDataset& data, const PairVocabulary& vocab,
                     const std::string& csv_path);
void export_splits(const SplitSpec& split, const PairVocabulary& vocab,
                   const std::string& json_path);

struct ImportedData {
    PairVocabulary vocab;
    SplitSpec split;
    FeatureDataset data;
};
ImportedData import_features(const std::string& csv_path, const std::string& splits_path);

// SCM sidecar (ground-truth tables, joint, generator config) so interventional
// samples can be redrawn after a dataset round-trips through disk.
void export_scm(const ScmInstance& inst, const std::string& json_path);
ScmInstance import_scm(const std::string& csv_path, const std::string& splits_path,
                       const std::string& scm_path);

}  // namespace czsl

#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "czsl/model.hpp"
#include "czsl/scm.hpp"
#include "czsl/tensor.hpp"

namespace czsl {

// One point of the seen-unseen calibration sweep.
struct CurvePoint {
    double constant = 0.0;
    double seen_acc = 0.0;
    double unseen_acc = 0.0;
};

struct EvalReport {
    double unseen_acc = -1.0;
    double seen_acc = -1.0;
    double harmonic = -1.0;
    double closed_acc = -1.0;
    double ausuc = -1.0;
    std::map<int, double> per_pair_acc;   // pair id -> open accuracy
    std::vector<CurvePoint> curve;        // sorted by calibration constant
    double pida_attr = -1.0;
    double pida_obj = -1.0;
    double hsic_attr_residual = -1.0;     // held-out cond. HSIC(phi_a, 1hot_o | A)
    double hsic_obj_residual = -1.0;
    long confusion_unseen_to_seen = 0;    // unseen-truth samples predicted seen
    long confusion_unseen_wrong = 0;      // unseen-truth samples predicted unseen but wrong
    std::string split_tag;
    uint64_t seed = 0;
    int epoch = -1;

    std::string to_json_string() const;
};

// CSV summary schema shared by run_experiment and sweep.
std::string summary_csv_header();
std::string summary_csv_row(const EvalReport& r, const std::string& method,
                            const std::string& ratio, uint64_t split_seed, uint64_t model_seed);

// Mean over pairs (with at least one sample) of per-pair accuracy.
double balanced_accuracy(const std::vector<int>& preds, const std::vector<int>& truths,
                         const std::vector<int>& pair_set);
// Plain per-sample accuracy.
double accuracy(const std::vector<int>& preds, const std::vector<int>& truths);

// H = 2su/(s+u), with H = 0 when both are 0.
double harmonic_mean(double seen, double unseen);

struct OpenEval {
    double seen_acc = 0.0;
    double unseen_acc = 0.0;
    double harmonic = 0.0;
};
// Accuracy over samples with seen truths and over samples with unseen truths,
// computed from a score matrix over S (union) U. Throws DomainError when either
// group is empty (the harmonic is undefined).
OpenEval evaluate_open(const ScoreMatrix& scores, const std::vector<int>& truths,
                       const SplitSpec& split, bool balanced);

// Accuracy of unseen-truth samples against unseen candidates only.
double evaluate_closed(const ScoreMatrix& scores, const std::vector<int>& truths,
                       const SplitSpec& split, bool balanced);

struct AusucResult {
    double area = 0.0;
    std::vector<CurvePoint> curve;
    bool degenerate = false;
};
// Seen-score calibration sweep: num_points constants over [-delta, +delta]
// with delta = max - min score, plus the two infinite endpoints appended
// analytically. Area by trapezoid over the curve sorted by seen accuracy.
AusucResult ausuc(const ScoreMatrix& scores, const std::vector<int>& truths,
                  const SplitSpec& split, bool balanced, int num_points = 201);

// Extracts (phi_a, phi_o) estimates from raw features; eval-mode everywhere.
using CoreExtractor = std::function<CoreBatch(const Tensor2& x)>;
// Model-appropriate extractor (recovered cores for the causal methods, the
// classifiers' last hidden activations for VisProd). Throws for LE.
CoreExtractor core_extractor(Model& model);

struct PidaResult {
    double pida_attr = 0.0;
    double pida_obj = 0.0;
};
// Post-interventional disagreement: distance between E^{do(a)}[phi_a] (object
// marginalized over its training distribution) and E^{do(a,o)}[phi_a],
// averaged over all pairs; likewise for objects. Fresh interventional samples
// are drawn from the SCM, so this is only defined for SCM-provenance data.
PidaResult pida(const CoreExtractor& extract, const ScmInstance& inst, int samples_per_do,
                uint64_t seed);

struct EvalOptions {
    bool balanced = true;
    bool with_ausuc = true;
    int ausuc_points = 201;
    bool with_hsic = true;
    bool with_pida = false;
    int pida_samples = 500;
    uint64_t pida_seed = 0;
};

// Full evaluation of a model on one split tag. Candidates are S plus the
// tag-appropriate unseen pairs. `inst` may be null unless with_pida is set.
EvalReport evaluate_model(Model& model, const FeatureDataset& data, const SplitSpec& split,
                          SplitTag tag, const LossWeights& weights, const EvalOptions& opts,
                          const ScmInstance* inst = nullptr);

}  // namespace czsl

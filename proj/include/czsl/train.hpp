#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "czsl/metrics.hpp"
#include "czsl/model.hpp"
#include "czsl/optim.hpp"
#include "czsl/scm.hpp"

namespace czsl {

enum class Schedule { Joint, Alternating };
Schedule schedule_from_string(const std::string& s);
std::string to_string(Schedule s);

enum class StopCriterion { Harmonic, Closed, Ausuc };
StopCriterion criterion_from_string(const std::string& s);
std::string to_string(StopCriterion c);

struct TrainConfig {
    Method method = Method::Causal;
    ModelConfig model;
    OptimizerSpec optimizer;        // joint schedule, or the attribute phase
    OptimizerSpec optimizer_obj;    // object phase (alternating); defaults to `optimizer`
    LossWeights weights;
    int batch_size = 2048;
    int max_epochs = 300;           // desk-scale default; paper scale is 1000
    StopCriterion criterion = StopCriterion::Harmonic;
    Schedule schedule = Schedule::Joint;
    uint64_t model_seed = 0;
    uint64_t split_seed = 0;        // recorded for reporting; the split travels with the data
    bool balanced_eval = true;
    int pida_samples = 500;

    void validate() const;
    static TrainConfig from_json_file(const std::string& path);
    static TrainConfig from_json_string(const std::string& text);
    std::string to_json_string() const;
};

struct EpochRecord {
    int epoch = 0;           // 1-based
    double train_loss = 0.0;
    EvalReport val;
};

struct TrainResult {
    Model model;                       // parameters restored to the selected epoch
    std::vector<EpochRecord> history;  // one validation report per epoch
    int selected_epoch = 0;            // 1-based, argmax of the stop criterion
    double train_seconds = 0.0;
};

double criterion_value(const EvalReport& r, StopCriterion c);

// Epoch (1-based) maximizing the criterion; ties break toward the earliest.
int early_stop(const std::vector<EpochRecord>& history, StopCriterion c);

TrainResult train(const TrainConfig& config, const FeatureDataset& data, const SplitSpec& split,
                  const PairVocabulary& vocab);

// --- experiment orchestration ----------------------------------------------

struct DataSource {
    // Either an in-memory SCM instance or a plain imported dataset.
    const ScmInstance* scm = nullptr;
    const ImportedData* imported = nullptr;

    const PairVocabulary& vocab() const;
    const SplitSpec& split() const;
    const FeatureDataset& data() const;
};

struct ExperimentResult {
    TrainResult trained;
    EvalReport test;
    std::string csv_row;
    std::string manifest_path;
};

// Train, early-stop on validation, evaluate the selected model on test, and
// write manifest.json / report.json / summary.csv / curve.csv under out_dir.
// Partial outputs are removed if anything throws.
ExperimentResult run_experiment(const TrainConfig& config, const DataSource& source,
                                const std::string& out_dir);

// --- sweep -------------------------------------------------------------------

struct SweepGrid {
    std::vector<std::string> methods;
    std::vector<std::string> ratios;       // "u:s" tags
    std::vector<uint64_t> split_seeds;
    std::vector<uint64_t> model_seeds;
    TrainConfig base;                      // method/seeds overridden per cell
    ScmConfig scm;
    SplitMode mode = SplitMode::Overlapping;

    static SweepGrid from_json_file(const std::string& path);
    void validate() const;
};

struct SweepCell {
    std::string method;
    std::string ratio;
    uint64_t split_seed = 0;
    uint64_t model_seed = 0;
    bool ok = false;
    std::string error;
    EvalReport report;
    std::string csv_row;
};

struct SweepAggregate {
    std::string method;
    std::string ratio;
    int count = 0;
    double unseen_mean = 0, unseen_sem = 0;
    double seen_mean = 0, seen_sem = 0;
    double harmonic_mean_v = 0, harmonic_sem = 0;
    bool degenerate_sem = false;  // single completed run
};

struct SweepResult {
    std::vector<SweepCell> cells;
    std::vector<SweepAggregate> aggregates;
};

// Runs every (method, ratio, split_seed, model_seed) cell; failures are
// recorded and skipped in aggregation. threads > 1 parallelizes across cells.
SweepResult sweep(const SweepGrid& grid, const std::string& out_dir, int threads = 1);

// --- data generation entry point ---------------------------------------------

struct GenConfig {
    ScmConfig scm;
    std::string ratio = "5:5";
    SplitMode mode = SplitMode::Overlapping;
    uint64_t seed = 0;
    int num_attrs = 8;
    int num_objs = 3;

    static GenConfig from_json_file(const std::string& path);
    void validate() const;
};

// Builds the vocabulary (AO-CLEVr names for 8x3, synthetic labels otherwise),
// samples a split, generates the dataset, and writes features.csv /
// splits.json / scm.json under out_dir.
ScmInstance run_gen(const GenConfig& config, const std::string& out_dir);

// Loads a generated directory; the SCM sidecar is picked up when present.
struct LoadedData {
    ScmInstance scm;        // valid when has_scm
    ImportedData imported;  // valid otherwise
    bool has_scm = false;

    DataSource source() const;
};
LoadedData load_data_dir(const std::string& dir);

// FNV-1a over a file's bytes, for manifest provenance.
uint64_t file_hash(const std::string& path);

}  // namespace czsl

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "czsl/error.hpp"
#include "czsl/metrics.hpp"
#include "czsl/train.hpp"

namespace fs = std::filesystem;

int main(int argc, char** argv) {
    CLI::App app{"Compositional zero-shot learning with causal embedding models"};
    app.require_subcommand(1);

    uint64_t seed = 0;
    bool seed_set = false;
    int threads = 1;
    bool deterministic = false;
    app.add_option("--seed", seed, "Override the config seed")->each([&](const std::string&) {
        seed_set = true;
    });
    app.add_option("--threads", threads, "Worker threads (sweep-level parallelism only)");
    app.add_flag("--deterministic", deterministic, "Force single-threaded execution");

    std::string config_path, data_dir, out_dir, grid_path, model_path;

    CLI::App* gen = app.add_subcommand("gen", "Generate a synthetic SCM dataset");
    gen->add_option("--config", config_path, "Generator config (JSON)")->required();
    gen->add_option("--out", out_dir, "Output directory")->required();

    CLI::App* train_cmd = app.add_subcommand("train", "Train a model and report test metrics");
    train_cmd->add_option("--config", config_path, "Train config (JSON)")->required();
    train_cmd->add_option("--data", data_dir, "Dataset directory (from gen)")->required();
    train_cmd->add_option("--out", out_dir, "Output directory")->required();

    CLI::App* eval_cmd = app.add_subcommand("eval", "Evaluate a saved model checkpoint");
    eval_cmd->add_option("--model", model_path, "Checkpoint path (model.ckpt)")->required();
    eval_cmd->add_option("--data", data_dir, "Dataset directory")->required();

    CLI::App* sweep_cmd = app.add_subcommand("sweep", "Run a grid of experiments");
    sweep_cmd->add_option("--grid", grid_path, "Sweep grid config (JSON)")->required();
    sweep_cmd->add_option("--out", out_dir, "Output directory")->required();

    CLI11_PARSE(app, argc, argv);
    if (deterministic) threads = 1;

    try {
        if (gen->parsed()) {
            czsl::GenConfig cfg = czsl::GenConfig::from_json_file(config_path);
            if (seed_set) cfg.seed = seed;
            czsl::ScmInstance inst = czsl::run_gen(cfg, out_dir);
            std::cout << "wrote " << inst.data.size() << " samples ("
                      << inst.split.seen.size() << " seen / " << inst.split.unseen.size()
                      << " unseen pairs) to " << out_dir << "\n";
        } else if (train_cmd->parsed()) {
            czsl::TrainConfig cfg = czsl::TrainConfig::from_json_file(config_path);
            if (seed_set) cfg.model_seed = seed;
            czsl::LoadedData data = czsl::load_data_dir(data_dir);
            czsl::ExperimentResult res = czsl::run_experiment(cfg, data.source(), out_dir);
            std::cout << czsl::summary_csv_header() << "\n" << res.csv_row << "\n";
        } else if (eval_cmd->parsed()) {
            std::string sidecar = model_path;
            const auto dot = sidecar.rfind(".ckpt");
            if (dot != std::string::npos)
                sidecar = sidecar.substr(0, dot) + ".json";
            else
                sidecar += ".json";
            czsl::LossWeights weights;
            czsl::Model model = czsl::Model::load(model_path, sidecar, &weights);
            czsl::LoadedData data = czsl::load_data_dir(data_dir);
            czsl::EvalOptions opts;
            opts.with_pida = data.has_scm && model.method != czsl::Method::LE;
            if (seed_set) opts.pida_seed = seed;
            czsl::EvalReport report = czsl::evaluate_model(
                model, data.source().data(), data.source().split(), czsl::SplitTag::Test,
                weights, opts, data.has_scm ? &data.scm : nullptr);
            std::cout << report.to_json_string() << "\n";
        } else if (sweep_cmd->parsed()) {
            czsl::SweepGrid grid = czsl::SweepGrid::from_json_file(grid_path);
            czsl::SweepResult res = czsl::sweep(grid, out_dir, threads);
            int failed = 0;
            for (const auto& c : res.cells) failed += !c.ok;
            std::cout << res.cells.size() << " cells, " << failed << " failed; results in "
                      << out_dir << "\n";
            if (failed > 0) {
                std::cerr << "warning: aggregation covers completed cells only (see failures.txt)\n";
            }
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}

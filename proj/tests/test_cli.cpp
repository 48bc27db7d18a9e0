#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace fs = std::filesystem;

namespace {

std::string cli_path() {
    const char* p = std::getenv("CZSL_CLI");
    REQUIRE_MESSAGE(p != nullptr, "CZSL_CLI must point at the built binary");
    return p;
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

struct RunResult {
    int exit_code = -1;
    std::string output;  // stdout and stderr combined
};

RunResult run_cli(const std::string& args, const fs::path& scratch) {
    const fs::path out = scratch / "cli_output.txt";
    const std::string cmd = cli_path() + " " + args + " >" + out.string() + " 2>&1";
    const int status = std::system(cmd.c_str());
    RunResult r;
    r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    std::ifstream is(out);
    std::ostringstream ss;
    ss << is.rdbuf();
    r.output = ss.str();
    return r;
}

void write_file(const fs::path& path, const std::string& text) {
    std::ofstream os(path);
    REQUIRE(os);
    os << text;
}

const char* kGenConfig = R"({
  "ratio": "5:5",
  "seed": 31,
  "num_attrs": 2,
  "num_objs": 2,
  "scm": {
    "core_dim_attr": 2, "core_dim_obj": 2, "feature_dim": 6, "gen_hidden": 8,
    "train_per_pair": 8, "val_per_pair": 4, "test_per_pair": 4
  }
})";

const char* kTrainConfig = R"({
  "method": "visprod",
  "max_epochs": 2,
  "batch_size": 16,
  "model_seed": 33,
  "pida_samples": 10,
  "model": {"hidden_dim": 8},
  "optimizer": {"learning_rate": 0.01}
})";

}  // namespace

TEST_CASE("usage errors exit nonzero") {
    TempDir d("czsl_cli_usage");
    CHECK(run_cli("", d.path).exit_code != 0);
    CHECK(run_cli("frobnicate", d.path).exit_code != 0);
    CHECK(run_cli("gen --out somewhere", d.path).exit_code != 0);  // --config is required
}

TEST_CASE("runtime failures report an error and exit 1") {
    TempDir d("czsl_cli_fail");
    RunResult r = run_cli("gen --config " + (d.path / "missing.json").string() + " --out " +
                              (d.path / "out").string(),
                          d.path);
    CHECK(r.exit_code == 1);
    CHECK(r.output.find("error:") != std::string::npos);

    write_file(d.path / "bad.json", R"({"num_attrz": 2})");
    RunResult bad = run_cli("gen --config " + (d.path / "bad.json").string() + " --out " +
                                (d.path / "out").string(),
                            d.path);
    CHECK(bad.exit_code == 1);
    CHECK(bad.output.find("error:") != std::string::npos);
}

TEST_CASE("gen, train, and eval chain end to end") {
    TempDir d("czsl_cli_chain");
    const fs::path data = d.path / "data";
    const fs::path out = d.path / "run";
    write_file(d.path / "gen.json", kGenConfig);
    write_file(d.path / "train.json", kTrainConfig);

    RunResult gen = run_cli(
        "gen --config " + (d.path / "gen.json").string() + " --out " + data.string(), d.path);
    REQUIRE_MESSAGE(gen.exit_code == 0, gen.output);
    CHECK(gen.output.find("wrote") != std::string::npos);
    for (const char* f : {"features.csv", "splits.json", "scm.json"}) CHECK(fs::exists(data / f));

    RunResult train = run_cli("train --config " + (d.path / "train.json").string() + " --data " +
                                  data.string() + " --out " + out.string(),
                              d.path);
    REQUIRE_MESSAGE(train.exit_code == 0, train.output);
    CHECK(train.output.find("method,ratio,split_seed,model_seed") != std::string::npos);
    CHECK(train.output.find("visprod,5:5,31,33") != std::string::npos);
    for (const char* f : {"summary.csv", "report.json", "curve.csv", "model.ckpt", "manifest.json"})
        CHECK(fs::exists(out / f));

    RunResult eval = run_cli(
        "eval --model " + (out / "model.ckpt").string() + " --data " + data.string(), d.path);
    REQUIRE_MESSAGE(eval.exit_code == 0, eval.output);
    CHECK(eval.output.find("\"harmonic\"") != std::string::npos);
    CHECK(eval.output.find("\"split_tag\": \"test\"") != std::string::npos);

    // --seed overrides the model seed recorded in the summary row.
    RunResult reseeded = run_cli("--seed 99 train --config " + (d.path / "train.json").string() +
                                     " --data " + data.string() + " --out " +
                                     (d.path / "run99").string(),
                                 d.path);
    REQUIRE_MESSAGE(reseeded.exit_code == 0, reseeded.output);
    CHECK(reseeded.output.find("visprod,5:5,31,99") != std::string::npos);
}

TEST_CASE("sweep runs a small grid from json") {
    TempDir d("czsl_cli_sweep");
    write_file(d.path / "grid.json", R"({
      "methods": ["visprod"],
      "ratios": ["5:5"],
      "split_seeds": [1],
      "model_seeds": [2],
      "base": {
        "max_epochs": 1, "batch_size": 32, "pida_samples": 10,
        "model": {"hidden_dim": 8},
        "optimizer": {"learning_rate": 0.01}
      },
      "scm": {
        "core_dim_attr": 2, "core_dim_obj": 2, "feature_dim": 6, "gen_hidden": 8,
        "train_per_pair": 4, "val_per_pair": 2, "test_per_pair": 2
      }
    })");
    RunResult r = run_cli("--deterministic sweep --grid " + (d.path / "grid.json").string() +
                              " --out " + (d.path / "out").string(),
                          d.path);
    REQUIRE_MESSAGE(r.exit_code == 0, r.output);
    CHECK(r.output.find("1 cells, 0 failed") != std::string::npos);
    CHECK(fs::exists(d.path / "out" / "summary.csv"));
    CHECK(fs::exists(d.path / "out" / "aggregate.csv"));
}

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "czsl/error.hpp"
#include "czsl/hsic.hpp"
#include "czsl/metrics.hpp"
#include "czsl/train.hpp"

namespace py = pybind11;
using namespace czsl;

namespace {

Tensor2 tensor_from_array(const py::array_t<double, py::array::c_style | py::array::forcecast>& a) {
    if (a.ndim() != 2) throw ConfigError("expected a 2-d array");
    Tensor2 t(static_cast<int>(a.shape(0)), static_cast<int>(a.shape(1)));
    std::copy(a.data(), a.data() + t.size(), t.d.begin());
    return t;
}

py::array_t<double> array_from_tensor(const Tensor2& t) {
    py::array_t<double> a({t.rows, t.cols});
    std::copy(t.d.begin(), t.d.end(), a.mutable_data());
    return a;
}

}  // namespace

PYBIND11_MODULE(_czsl, m) {
    m.doc() = "compositional zero-shot learning core (HSIC, SCM data, training, metrics)";

    m.def(
        "hsic_linear",
        [](py::array_t<double, py::array::c_style | py::array::forcecast> u,
           py::array_t<double, py::array::c_style | py::array::forcecast> v) {
            return hsic_linear(tensor_from_array(u), tensor_from_array(v));
        },
        py::arg("u"), py::arg("v"),
        "Linear-kernel HSIC estimate between two n x d sample matrices.");

    m.def(
        "conditional_hsic",
        [](py::array_t<double, py::array::c_style | py::array::forcecast> u,
           py::array_t<double, py::array::c_style | py::array::forcecast> v,
           const std::vector<int>& labels) {
            return conditional_hsic(tensor_from_array(u), tensor_from_array(v), labels);
        },
        py::arg("u"), py::arg("v"), py::arg("labels"),
        "HSIC averaged over the sample groups sharing a conditioning label.");

    m.def("harmonic_mean", &harmonic_mean, py::arg("seen"), py::arg("unseen"));

    m.def(
        "balanced_accuracy",
        [](const std::vector<int>& preds, const std::vector<int>& truths,
           const std::vector<int>& pair_set) {
            return balanced_accuracy(preds, truths, pair_set);
        },
        py::arg("preds"), py::arg("truths"), py::arg("pair_set"));

    m.def("summary_csv_header", &summary_csv_header);

    m.def(
        "generate",
        [](const std::string& config_path, const std::string& out_dir) {
            GenConfig cfg = config_path.empty() ? GenConfig{} : GenConfig::from_json_file(config_path);
            ScmInstance inst = run_gen(cfg, out_dir);
            py::dict d;
            d["num_pairs"] = inst.vocab.num_pairs();
            d["num_rows"] = inst.data.size();
            d["seen_pairs"] = inst.split.seen;
            d["unseen_pairs"] = inst.split.unseen;
            return d;
        },
        py::arg("config_path"), py::arg("out_dir"),
        "Generate an SCM dataset directory (features.csv / splits.json / scm.json). "
        "An empty config path uses the defaults.");

    m.def(
        "run_experiment",
        [](const std::string& config_path, const std::string& data_dir,
           const std::string& out_dir) {
            TrainConfig cfg = TrainConfig::from_json_file(config_path);
            LoadedData data = load_data_dir(data_dir);
            ExperimentResult res = run_experiment(cfg, data.source(), out_dir);
            py::dict d;
            d["csv_row"] = res.csv_row;
            d["selected_epoch"] = res.trained.selected_epoch;
            d["unseen_acc"] = res.test.unseen_acc;
            d["seen_acc"] = res.test.seen_acc;
            d["harmonic"] = res.test.harmonic;
            d["closed_acc"] = res.test.closed_acc;
            d["ausuc"] = res.test.ausuc;
            return d;
        },
        py::arg("config_path"), py::arg("data_dir"), py::arg("out_dir"),
        "Train + early-stop + test-evaluate; writes the artifact files under out_dir.");

    m.def(
        "recover_cores",
        [](const std::string& checkpoint, const std::string& sidecar,
           py::array_t<double, py::array::c_style | py::array::forcecast> x) {
            Model model = Model::load(checkpoint, sidecar);
            CoreBatch cores = recover_cores(model, tensor_from_array(x));
            return py::make_tuple(array_from_tensor(cores.phi_a), array_from_tensor(cores.phi_o));
        },
        py::arg("checkpoint"), py::arg("sidecar"), py::arg("x"),
        "Load a saved model and return (phi_a, phi_o) for a feature matrix.");
}

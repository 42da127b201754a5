#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "eloc/gradcheck.hpp"
#include "eloc/pipeline.hpp"

namespace py = pybind11;
using namespace eloc;

namespace {

Tensor tensor_from_array(const py::array_t<double, py::array::c_style | py::array::forcecast>& a) {
    std::vector<int> shape;
    for (py::ssize_t i = 0; i < a.ndim(); ++i) shape.push_back(static_cast<int>(a.shape(i)));
    std::vector<double> values(a.data(), a.data() + a.size());
    return Tensor::from(std::move(shape), std::move(values));
}

py::array_t<double> array_from_tensor(const Tensor& t) {
    std::vector<py::ssize_t> shape;
    for (int d : t.shape()) shape.push_back(d);
    py::array_t<double> out(shape);
    std::copy(t.data(), t.data() + t.size(), out.mutable_data());
    return out;
}

py::array_t<double> stack_matrices(const std::vector<Tensor>& mats) {
    const int t_count = static_cast<int>(mats.size());
    const int n = mats.empty() ? 0 : mats[0].dim(0);
    py::array_t<double> out({t_count, n, n});
    double* dst = out.mutable_data();
    for (const Tensor& m : mats) {
        std::copy(m.data(), m.data() + m.size(), dst);
        dst += m.size();
    }
    return out;
}

TumorMask mask_from_list(const std::vector<int>& indices) {
    return TumorMask{indices};
}

py::dict patient_to_dict(const SynthPatient& p) {
    py::dict d;
    d["id"] = p.id;
    d["time_series"] = array_from_tensor(p.time_series.data);
    d["tumor_mask"] = p.tumor_mask.region_indices;
    d["bilateral"] = p.bilateral;
    d["hemisphere_split"] = p.hemisphere_split;
    py::dict labels;
    for (int k = 0; k < kNumTasks; ++k) {
        if (p.labels.has(k)) {
            labels[kTaskNames[k]] = p.labels.tasks[static_cast<size_t>(k)]->class_ids();
        }
    }
    d["labels"] = labels;
    py::dict communities;
    for (int k = 0; k < kNumTasks; ++k) {
        communities[kTaskNames[k]] = p.communities[static_cast<size_t>(k)];
    }
    d["communities"] = communities;
    return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Dynamic-connectivity multi-task eloquent-cortex localization (native core)";

    py::register_exception<config_error>(m, "ConfigError");
    py::register_exception<dimension_error>(m, "DimensionError");
    py::register_exception<data_error>(m, "DataError");
    py::register_exception<numeric_error>(m, "NumericError");

    py::class_<WindowConfig>(m, "WindowConfig")
        .def(py::init<>())
        .def_readwrite("window_length", &WindowConfig::window_length)
        .def_readwrite("stride", &WindowConfig::stride)
        .def_readwrite("epsilon", &WindowConfig::epsilon);

    py::class_<SynthConfig>(m, "SynthConfig")
        .def(py::init<>())
        .def_readwrite("regions", &SynthConfig::regions)
        .def_readwrite("frames", &SynthConfig::frames)
        .def_readwrite("patients", &SynthConfig::patients)
        .def_readwrite("task_presence", &SynthConfig::task_presence)
        .def_readwrite("language_size", &SynthConfig::language_size)
        .def_readwrite("distractor_size", &SynthConfig::distractor_size)
        .def_readwrite("motor_sizes", &SynthConfig::motor_sizes)
        .def_readwrite("bilateral_fraction", &SynthConfig::bilateral_fraction)
        .def_readwrite("tumor_size", &SynthConfig::tumor_size)
        .def_readwrite("interval_length", &SynthConfig::interval_length)
        .def_readwrite("rest_length", &SynthConfig::rest_length)
        .def_readwrite("corr_active", &SynthConfig::corr_active)
        .def_readwrite("corr_idle", &SynthConfig::corr_idle)
        .def_readwrite("noise", &SynthConfig::noise)
        .def_readwrite("seed", &SynthConfig::seed);

    py::class_<ModelConfig>(m, "ModelConfig")
        .def(py::init<>())
        .def_readwrite("regions", &ModelConfig::regions)
        .def_readwrite("filters", &ModelConfig::filters)
        .def_readwrite("fc_dims", &ModelConfig::fc_dims)
        .def_readwrite("lstm_hidden", &ModelConfig::lstm_hidden)
        .def_readwrite("leaky_slope", &ModelConfig::leaky_slope)
        .def_property(
            "variant", [](const ModelConfig& c) { return std::string(variant_name(c.variant)); },
            [](ModelConfig& c, const std::string& name) { c.variant = variant_from_name(name); });

    py::class_<TrainConfig>(m, "TrainConfig")
        .def(py::init<>())
        .def_readwrite("learning_rate", &TrainConfig::learning_rate)
        .def_readwrite("momentum", &TrainConfig::momentum)
        .def_readwrite("weight_decay", &TrainConfig::weight_decay)
        .def_readwrite("epochs", &TrainConfig::epochs)
        .def_readwrite("folds", &TrainConfig::folds)
        .def_readwrite("seed", &TrainConfig::seed)
        .def_readwrite("batch_size", &TrainConfig::batch_size)
        .def_readwrite("threads", &TrainConfig::threads)
        .def_property(
            "loss_mode", [](const TrainConfig& c) { return std::string(loss_mode_name(c.loss_mode)); },
            [](TrainConfig& c, const std::string& name) { c.loss_mode = loss_mode_from_name(name); });

    m.def(
        "similarity_matrix",
        [](const py::array_t<double, py::array::c_style | py::array::forcecast>& window,
           double epsilon) { return array_from_tensor(similarity_matrix(tensor_from_array(window), epsilon)); },
        py::arg("window"), py::arg("epsilon") = 1.0,
        "Masked-free similarity matrix of one D x N window (columns z-scored, "
        "exp((rho-1)/epsilon)).");

    m.def(
        "build_dynamic_connectivity",
        [](const py::array_t<double, py::array::c_style | py::array::forcecast>& series,
           const WindowConfig& window, const std::vector<int>& tumor_mask) {
            const TimeSeries ts(tensor_from_array(series));
            return stack_matrices(
                build_dynamic_connectivity(ts, window, mask_from_list(tumor_mask)).matrices);
        },
        py::arg("time_series"), py::arg("window") = WindowConfig{},
        py::arg("tumor_mask") = std::vector<int>{},
        "Stacked masked similarity matrices, shape (T, N, N).");

    m.def(
        "generate_cohort",
        [](const SynthConfig& cfg) {
            py::list out;
            for (const auto& p : generate_cohort(cfg)) out.append(patient_to_dict(p));
            return out;
        },
        py::arg("config"));

    m.def("simulate", &run_simulate, py::arg("config"), py::arg("out_dir"),
          "Write a synthetic cohort (patient files + index + manifest).");

    m.def(
        "train",
        [](const fs::path& cohort_dir, const fs::path& out_dir, const WindowConfig& window,
           const ModelConfig& model, const TrainConfig& train_cfg) {
            RunOptions opts;
            opts.window = window;
            opts.model = model;
            opts.train = train_cfg;
            TrainResult result = run_train(cohort_dir, opts, out_dir);
            py::dict d;
            d["checkpoint"] = (out_dir / "checkpoint.bin").string();
            d["epoch_mean_loss"] = result.epoch_mean_loss;
            return d;
        },
        py::arg("cohort_dir"), py::arg("out_dir"), py::arg("window") = WindowConfig{},
        py::arg("model") = ModelConfig{}, py::arg("train") = TrainConfig{});

    m.def(
        "cross_validate",
        [](const fs::path& cohort_dir, const fs::path& out_dir, const WindowConfig& window,
           const ModelConfig& model, const TrainConfig& train_cfg) {
            RunOptions opts;
            opts.window = window;
            opts.model = model;
            opts.train = train_cfg;
            const CvResult result = run_crossval(cohort_dir, opts, out_dir);
            py::dict summary;
            for (int k = 0; k < kNumTasks; ++k) {
                const auto& s = result.summary[static_cast<size_t>(k)];
                py::dict entry;
                entry["absent"] = s.absent;
                if (!s.absent) {
                    entry["folds"] = s.folds;
                    entry["eloquent_accuracy"] = s.eloquent_accuracy;
                    entry["overall_accuracy"] = s.overall_accuracy;
                    if (s.auc.has_value()) entry["auc"] = *s.auc;
                }
                summary[kTaskNames[k]] = entry;
            }
            return summary;
        },
        py::arg("cohort_dir"), py::arg("out_dir"), py::arg("window") = WindowConfig{},
        py::arg("model") = ModelConfig{}, py::arg("train") = TrainConfig{});

    m.def(
        "predict",
        [](const fs::path& checkpoint, const fs::path& patient, const fs::path& out_dir) {
            const PredictResult result = run_predict(checkpoint, patient, out_dir);
            py::dict d;
            py::dict labels, scores;
            for (int k = 0; k < kNumTasks; ++k) {
                labels[kTaskNames[k]] = result.labels[static_cast<size_t>(k)];
                scores[kTaskNames[k]] = array_from_tensor(result.scores[static_cast<size_t>(k)]);
            }
            d["labels"] = labels;
            d["scores"] = scores;
            d["attention_language"] = result.attention_language;
            d["attention_motor"] = result.attention_motor;
            return d;
        },
        py::arg("checkpoint"), py::arg("patient"), py::arg("out_dir"));

    m.attr("task_names") = std::vector<std::string>{kTaskNames.begin(), kTaskNames.end()};
    m.attr("__version__") = kArtifactVersion;
}

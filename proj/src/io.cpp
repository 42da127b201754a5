#include "eloc/io.hpp"

#include <chrono>
#include <cstring>
#include <fstream>

namespace eloc {

namespace {

void require_little_endian() {
    const uint32_t probe = 1;
    char byte;
    std::memcpy(&byte, &probe, 1);
    if (byte != 1) throw data_error("binary containers require a little-endian host");
}

json intervals_to_json(const IntervalList& list) {
    json out = json::array();
    for (const auto& [s, e] : list) out.push_back(json::array({s, e}));
    return out;
}

IntervalList intervals_from_json(const json& j) {
    IntervalList list;
    for (const auto& pair : j) {
        list.emplace_back(pair.at(0).get<int>(), pair.at(1).get<int>());
    }
    return list;
}

}  // namespace

// --- configs -----------------------------------------------------------------

json to_json(const WindowConfig& cfg) {
    return json{{"window_length", cfg.window_length},
                {"stride", cfg.stride},
                {"epsilon", cfg.epsilon},
                {"on_zero_variance",
                 cfg.on_zero_variance == ZeroVariancePolicy::error ? "error" : "mask-window"}};
}

WindowConfig window_config_from_json(const json& j) {
    WindowConfig cfg;
    cfg.window_length = j.value("window_length", cfg.window_length);
    cfg.stride = j.value("stride", cfg.stride);
    cfg.epsilon = j.value("epsilon", cfg.epsilon);
    const std::string policy = j.value("on_zero_variance", std::string("error"));
    if (policy == "error") {
        cfg.on_zero_variance = ZeroVariancePolicy::error;
    } else if (policy == "mask-window") {
        cfg.on_zero_variance = ZeroVariancePolicy::mask_window;
    } else {
        throw config_error("unknown zero-variance policy '" + policy + "'");
    }
    return cfg;
}

json to_json(const SynthConfig& cfg) {
    return json{{"regions", cfg.regions},
                {"frames", cfg.frames},
                {"patients", cfg.patients},
                {"task_presence", cfg.task_presence},
                {"language_size", cfg.language_size},
                {"distractor_size", cfg.distractor_size},
                {"motor_sizes", cfg.motor_sizes},
                {"bilateral_fraction", cfg.bilateral_fraction},
                {"tumor_size", cfg.tumor_size},
                {"interval_length", cfg.interval_length},
                {"rest_length", cfg.rest_length},
                {"corr_active", cfg.corr_active},
                {"corr_idle", cfg.corr_idle},
                {"noise", cfg.noise},
                {"seed", cfg.seed}};
}

SynthConfig synth_config_from_json(const json& j) {
    SynthConfig cfg;
    cfg.regions = j.value("regions", cfg.regions);
    cfg.frames = j.value("frames", cfg.frames);
    cfg.patients = j.value("patients", cfg.patients);
    cfg.task_presence = j.value("task_presence", cfg.task_presence);
    cfg.language_size = j.value("language_size", cfg.language_size);
    cfg.distractor_size = j.value("distractor_size", cfg.distractor_size);
    cfg.motor_sizes = j.value("motor_sizes", cfg.motor_sizes);
    cfg.bilateral_fraction = j.value("bilateral_fraction", cfg.bilateral_fraction);
    cfg.tumor_size = j.value("tumor_size", cfg.tumor_size);
    cfg.interval_length = j.value("interval_length", cfg.interval_length);
    cfg.rest_length = j.value("rest_length", cfg.rest_length);
    cfg.corr_active = j.value("corr_active", cfg.corr_active);
    cfg.corr_idle = j.value("corr_idle", cfg.corr_idle);
    cfg.noise = j.value("noise", cfg.noise);
    cfg.seed = j.value("seed", cfg.seed);
    return cfg;
}

json to_json(const ModelConfig& cfg) {
    return json{{"regions", cfg.regions},
                {"filters", cfg.filters},
                {"fc_dims", cfg.fc_dims},
                {"lstm_hidden", cfg.lstm_hidden},
                {"leaky_slope", cfg.leaky_slope},
                {"variant", variant_name(cfg.variant)},
                {"e2n_channel_mix", cfg.e2n_channel_mix},
                {"ann_hidden1", cfg.ann_hidden1},
                {"ann_hidden2", cfg.ann_hidden2}};
}

ModelConfig model_config_from_json(const json& j) {
    ModelConfig cfg;
    cfg.regions = j.value("regions", cfg.regions);
    cfg.filters = j.value("filters", cfg.filters);
    cfg.fc_dims = j.value("fc_dims", cfg.fc_dims);
    cfg.lstm_hidden = j.value("lstm_hidden", cfg.lstm_hidden);
    cfg.leaky_slope = j.value("leaky_slope", cfg.leaky_slope);
    cfg.variant = variant_from_name(j.value("variant", std::string("proposed")));
    cfg.e2n_channel_mix = j.value("e2n_channel_mix", cfg.e2n_channel_mix);
    cfg.ann_hidden1 = j.value("ann_hidden1", cfg.ann_hidden1);
    cfg.ann_hidden2 = j.value("ann_hidden2", cfg.ann_hidden2);
    return cfg;
}

json to_json(const TrainConfig& cfg) {
    return json{{"learning_rate", cfg.learning_rate},
                {"momentum", cfg.momentum},
                {"weight_decay", cfg.weight_decay},
                {"epochs", cfg.epochs},
                {"folds", cfg.folds},
                {"seed", cfg.seed},
                {"loss_mode", loss_mode_name(cfg.loss_mode)},
                {"batch_size", cfg.batch_size},
                {"threads", cfg.threads}};
}

TrainConfig train_config_from_json(const json& j) {
    TrainConfig cfg;
    cfg.learning_rate = j.value("learning_rate", cfg.learning_rate);
    cfg.momentum = j.value("momentum", cfg.momentum);
    cfg.weight_decay = j.value("weight_decay", cfg.weight_decay);
    cfg.epochs = j.value("epochs", cfg.epochs);
    cfg.folds = j.value("folds", cfg.folds);
    cfg.seed = j.value("seed", cfg.seed);
    cfg.loss_mode = loss_mode_from_name(j.value("loss_mode", std::string("literal")));
    cfg.batch_size = j.value("batch_size", cfg.batch_size);
    cfg.threads = j.value("threads", cfg.threads);
    return cfg;
}

json to_json(const RiskWeights& w) {
    return json{{"language", w.language}, {"motor", w.motor}};
}

RiskWeights risk_weights_from_json(const json& j) {
    RiskWeights w;
    w.language = j.value("language", w.language);
    w.motor = j.value("motor", w.motor);
    return w;
}

// --- atomic writes ------------------------------------------------------------

namespace {

void atomic_write_impl(const fs::path& path, const char* data, size_t size) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    const fs::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw data_error("cannot write to " + tmp.string());
        out.write(data, static_cast<std::streamsize>(size));
        if (!out) throw data_error("short write to " + tmp.string());
    }
    fs::rename(tmp, path);
}

}  // namespace

void atomic_write_text(const fs::path& path, const std::string& text) {
    atomic_write_impl(path, text.data(), text.size());
}

void atomic_write_bytes(const fs::path& path, const std::vector<char>& bytes) {
    atomic_write_impl(path, bytes.data(), bytes.size());
}

// --- patient container ----------------------------------------------------------

void write_patient(const SynthPatient& patient, const fs::path& path) {
    require_little_endian();
    const int frames = patient.time_series.frames();
    const int regions = patient.time_series.regions();
    const size_t bytes = static_cast<size_t>(frames) * regions * sizeof(double);

    json header{{"id", patient.id},
                {"regions", regions},
                {"frames", frames},
                {"timeseries_bytes", bytes},
                {"format_version", 1}};

    json labels = json::object();
    for (int k = 0; k < kNumTasks; ++k) {
        if (patient.labels.has(k)) {
            labels[kTaskNames[k]] = patient.labels.tasks[static_cast<size_t>(k)]->class_ids();
        }
    }
    json communities = json::object();
    for (int k = 0; k < kNumTasks; ++k) {
        communities[kTaskNames[k]] = patient.communities[static_cast<size_t>(k)];
    }
    json meta{{"tumor_mask", patient.tumor_mask.region_indices},
              {"bilateral", patient.bilateral},
              {"hemisphere_split", patient.hemisphere_split},
              {"labels", labels},
              {"communities", communities},
              {"distractor", patient.distractor_community},
              {"schedule",
               {{"language", intervals_to_json(patient.schedule.language)},
                {"motor", intervals_to_json(patient.schedule.motor)},
                {"distractor", intervals_to_json(patient.schedule.distractor)}}}};

    std::string blob = "ELOC-PATIENT 1\n" + header.dump() + "\n";
    const size_t prefix = blob.size();
    std::vector<char> out(prefix + bytes);
    std::memcpy(out.data(), blob.data(), prefix);
    std::memcpy(out.data() + prefix, patient.time_series.data.data(), bytes);
    const std::string tail = "\nMETA\n" + meta.dump() + "\n";
    out.insert(out.end(), tail.begin(), tail.end());
    atomic_write_bytes(path, out);
}

SynthPatient read_patient(const fs::path& path) {
    require_little_endian();
    std::ifstream in(path, std::ios::binary);
    if (!in) throw data_error("cannot open patient file " + path.string());

    std::string magic;
    std::getline(in, magic);
    if (magic != "ELOC-PATIENT 1") {
        throw data_error("bad patient file magic in " + path.string());
    }
    std::string header_line;
    std::getline(in, header_line);
    json header = json::parse(header_line);
    const int regions = header.at("regions").get<int>();
    const int frames = header.at("frames").get<int>();
    const size_t bytes = header.at("timeseries_bytes").get<size_t>();
    if (bytes != static_cast<size_t>(frames) * regions * sizeof(double)) {
        throw data_error("patient file size mismatch in " + path.string());
    }

    Tensor data({frames, regions});
    in.read(reinterpret_cast<char*>(data.data()), static_cast<std::streamsize>(bytes));
    if (!in) throw data_error("truncated time series in " + path.string());

    std::string sep, marker, meta_line;
    std::getline(in, sep);
    std::getline(in, marker);
    if (marker != "META") throw data_error("missing META section in " + path.string());
    std::getline(in, meta_line);
    json meta = json::parse(meta_line);

    SynthPatient patient;
    patient.id = header.at("id").get<std::string>();
    patient.time_series = TimeSeries(std::move(data));
    patient.tumor_mask.region_indices = meta.at("tumor_mask").get<std::vector<int>>();
    patient.bilateral = meta.at("bilateral").get<bool>();
    patient.hemisphere_split = meta.at("hemisphere_split").get<int>();
    for (int k = 0; k < kNumTasks; ++k) {
        if (meta.at("labels").contains(kTaskNames[k])) {
            patient.labels.tasks[static_cast<size_t>(k)] = TaskLabels::from_class_ids(
                meta.at("labels").at(kTaskNames[k]).get<std::vector<int>>());
        }
        patient.communities[static_cast<size_t>(k)] =
            meta.at("communities").at(kTaskNames[k]).get<std::vector<int>>();
    }
    patient.schedule.language = intervals_from_json(meta.at("schedule").at("language"));
    patient.schedule.motor = intervals_from_json(meta.at("schedule").at("motor"));
    patient.schedule.distractor = intervals_from_json(meta.at("schedule").at("distractor"));
    patient.distractor_community = meta.at("distractor").get<std::vector<int>>();
    return patient;
}

// --- cohort ------------------------------------------------------------------------

void write_cohort(const std::vector<SynthPatient>& cohort, const SynthConfig& cfg,
                  const fs::path& dir) {
    fs::create_directories(dir);
    json index{{"format_version", 1}, {"config", to_json(cfg)}, {"patients", json::array()}};
    for (const auto& patient : cohort) {
        const std::string filename = patient.id + ".pat";
        write_patient(patient, dir / filename);
        json tasks = json::array();
        for (int k = 0; k < kNumTasks; ++k) {
            if (patient.labels.has(k)) tasks.push_back(kTaskNames[k]);
        }
        index["patients"].push_back(json{{"id", patient.id},
                                         {"file", filename},
                                         {"bilateral", patient.bilateral},
                                         {"tasks", tasks}});
    }
    atomic_write_text(dir / "cohort.json", index.dump(2) + "\n");
}

CohortOnDisk read_cohort(const fs::path& dir) {
    const fs::path index_path = dir / "cohort.json";
    std::ifstream in(index_path);
    if (!in) throw data_error("cannot open cohort index " + index_path.string());
    json index = json::parse(in);

    CohortOnDisk cohort;
    cohort.config = synth_config_from_json(index.at("config"));
    for (const auto& entry : index.at("patients")) {
        cohort.patients.push_back(read_patient(dir / entry.at("file").get<std::string>()));
    }
    return cohort;
}

// --- checkpoint ----------------------------------------------------------------------

void save_checkpoint(const ModelState& state, const WindowConfig& window, const fs::path& path) {
    require_little_endian();
    const auto params = state.parameters();
    json param_index = json::array();
    size_t total_values = 0;
    for (const auto& p : params) {
        param_index.push_back(json{{"name", p.name}, {"shape", p.tensor.shape()}});
        total_values += static_cast<size_t>(p.tensor.size());
    }
    json header{{"format_version", 1},
                {"artifact_version", kArtifactVersion},
                {"model_config", to_json(state.config)},
                {"window_config", to_json(window)},
                {"params", param_index}};
    const std::string header_text = header.dump();

    std::vector<char> out;
    out.reserve(16 + header_text.size() + total_values * sizeof(double));
    const char magic[8] = {'E', 'L', 'O', 'C', 'C', 'K', 'P', '1'};
    out.insert(out.end(), magic, magic + 8);
    const uint64_t header_len = header_text.size();
    const char* len_bytes = reinterpret_cast<const char*>(&header_len);
    out.insert(out.end(), len_bytes, len_bytes + 8);
    out.insert(out.end(), header_text.begin(), header_text.end());
    for (const auto& p : params) {
        const char* raw = reinterpret_cast<const char*>(p.tensor.data());
        out.insert(out.end(), raw, raw + static_cast<size_t>(p.tensor.size()) * sizeof(double));
    }
    atomic_write_bytes(path, out);
}

Checkpoint load_checkpoint(const fs::path& path) {
    require_little_endian();
    std::ifstream in(path, std::ios::binary);
    if (!in) throw data_error("cannot open checkpoint " + path.string());

    char magic[8];
    in.read(magic, 8);
    if (!in || std::string(magic, 8) != "ELOCCKP1") {
        throw data_error("bad checkpoint magic in " + path.string());
    }
    uint64_t header_len = 0;
    in.read(reinterpret_cast<char*>(&header_len), 8);
    std::string header_text(header_len, '\0');
    in.read(header_text.data(), static_cast<std::streamsize>(header_len));
    if (!in) throw data_error("truncated checkpoint header in " + path.string());
    json header = json::parse(header_text);

    Checkpoint ckpt;
    ckpt.window = window_config_from_json(header.at("window_config"));
    const ModelConfig cfg = model_config_from_json(header.at("model_config"));
    ckpt.state = build_variant(cfg, 0);

    auto params = ckpt.state.parameters();
    size_t cursor = 0;
    for (const auto& entry : header.at("params")) {
        const std::string name = entry.at("name").get<std::string>();
        const std::vector<int> shape = entry.at("shape").get<std::vector<int>>();
        if (cursor >= params.size() || params[cursor].name != name ||
            params[cursor].tensor.shape() != shape) {
            throw data_error("checkpoint parameter mismatch at '" + name + "' in " +
                             path.string());
        }
        Tensor t = params[cursor].tensor;
        in.read(reinterpret_cast<char*>(t.data()),
                static_cast<std::streamsize>(t.size() * sizeof(double)));
        if (!in) throw data_error("truncated checkpoint values in " + path.string());
        ++cursor;
    }
    if (cursor != params.size()) {
        throw data_error("checkpoint is missing parameters in " + path.string());
    }
    return ckpt;
}

// --- manifest -----------------------------------------------------------------------------

json make_manifest(const std::string& command, const json& config, uint64_t seed,
                   const std::vector<std::string>& inputs,
                   const std::vector<std::string>& outputs) {
    const auto now = std::chrono::system_clock::now();
    const std::time_t tt = std::chrono::system_clock::to_time_t(now);
    char stamp[32];
    std::strftime(stamp, sizeof(stamp), "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&tt));
    return json{{"artifact_version", kArtifactVersion},
                {"command", command},
                {"seed", seed},
                {"config", config},
                {"inputs", inputs},
                {"outputs", outputs},
                {"created_utc", stamp}};
}

void write_manifest(const fs::path& out_dir, const json& manifest) {
    atomic_write_text(out_dir / "manifest.json", manifest.dump(2) + "\n");
}

}  // namespace eloc

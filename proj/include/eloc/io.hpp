#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "eloc/model.hpp"
#include "eloc/synthdata.hpp"
#include "eloc/training.hpp"

namespace eloc {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

// --- config <-> json (partial objects allowed; missing keys keep defaults) --
json to_json(const WindowConfig& cfg);
WindowConfig window_config_from_json(const json& j);
json to_json(const SynthConfig& cfg);
SynthConfig synth_config_from_json(const json& j);
json to_json(const ModelConfig& cfg);
ModelConfig model_config_from_json(const json& j);
json to_json(const TrainConfig& cfg);
TrainConfig train_config_from_json(const json& j);
json to_json(const RiskWeights& w);
RiskWeights risk_weights_from_json(const json& j);

// --- atomic file output (temp + rename) ------------------------------------
void atomic_write_text(const fs::path& path, const std::string& text);
void atomic_write_bytes(const fs::path& path, const std::vector<char>& bytes);

// --- patient container ------------------------------------------------------
// Text header and metadata around a raw little-endian float64 block:
//   ELOC-PATIENT 1
//   {"id":...,"regions":N,"frames":D,"timeseries_bytes":M}
//   <M raw bytes, row-major frames x regions>
//   META
//   {...labels/mask/communities/schedule...}
void write_patient(const SynthPatient& patient, const fs::path& path);
SynthPatient read_patient(const fs::path& path);

// --- cohort directory --------------------------------------------------------
// One .pat file per patient plus cohort.json (config echo + index).
void write_cohort(const std::vector<SynthPatient>& cohort, const SynthConfig& cfg,
                  const fs::path& dir);

struct CohortOnDisk {
    SynthConfig config;
    std::vector<SynthPatient> patients;
};

CohortOnDisk read_cohort(const fs::path& dir);

// --- checkpoint ---------------------------------------------------------------
// Versioned binary container: magic, JSON header (config echo + parameter
// shapes), then raw 64-bit values. save->load->forward is bit-identical.
struct Checkpoint {
    ModelState state;
    WindowConfig window;
};

void save_checkpoint(const ModelState& state, const WindowConfig& window, const fs::path& path);
Checkpoint load_checkpoint(const fs::path& path);

// --- run manifest ---------------------------------------------------------------
// Every command writes manifest.json with enough to reproduce the run.
json make_manifest(const std::string& command, const json& config, uint64_t seed,
                   const std::vector<std::string>& inputs, const std::vector<std::string>& outputs);
void write_manifest(const fs::path& out_dir, const json& manifest);

}  // namespace eloc

#pragma once

#include <array>
#include <string>
#include <utility>
#include <vector>

#include "eloc/connectivity.hpp"
#include "eloc/loss.hpp"
#include "eloc/rng.hpp"

namespace eloc {

// Frame intervals [start, end), non-overlapping, ascending.
using IntervalList = std::vector<std::pair<int, int>>;

struct Schedule {
    IntervalList language;
    IntervalList motor;       // shared by the three motor sub-networks
    IntervalList distractor;  // independent of the language/motor alternation
};

struct SynthConfig {
    int regions = 90;
    int frames = 150;
    int patients = 56;
    // Presence probability per task (language, finger, foot, tongue),
    // mirroring cohort task counts 56/36/17/39 out of 56.
    std::array<double, kNumTasks> task_presence{1.0, 36.0 / 56.0, 17.0 / 56.0, 39.0 / 56.0};
    int language_size = 10;
    std::array<int, 3> motor_sizes{10, 10, 10};
    // A left-hemisphere community with its own spontaneous schedule. It looks
    // identical to the language network in static connectivity; only the
    // timing relative to the motor system tells them apart.
    int distractor_size = 10;
    double bilateral_fraction = 0.0;  // fraction of patients with a bilateral language plant
    std::array<int, 2> tumor_size{4, 8};         // inclusive range
    std::array<int, 2> interval_length{50, 70};  // active-interval frames, inclusive range
    std::array<int, 2> rest_length{25, 40};      // idle frames between active intervals
    double corr_active = 0.9;  // within-network correlation while active
    double corr_idle = 0.0;    // while idle
    double noise = 1.0;         // scales the independent noise component
    uint64_t seed = 1;

    void validate() const;
};

struct SynthPatient {
    std::string id;
    TimeSeries time_series;
    TumorMask tumor_mask;
    LabelTensor labels;  // present tasks only
    // Planted community per task (always known, independent of label presence).
    std::array<std::vector<int>, kNumTasks> communities;
    std::vector<int> distractor_community;  // labeled background everywhere
    Schedule schedule;
    bool bilateral = false;
    int hemisphere_split = 0;  // left hemisphere is [0, split)
};

struct PatientPlan {
    bool bilateral = false;
    std::array<bool, kNumTasks> tasks_present{true, true, true, true};
};

// Deterministic function of (cfg, patient_seed, plan).
SynthPatient generate_patient(const SynthConfig& cfg, uint64_t patient_seed,
                              const PatientPlan& plan, const std::string& id);

// Samples presence/bilateral state from rng, then generates the patient.
SynthPatient generate_patient(const SynthConfig& cfg, Rng& rng);

// Bilateral patients are round(bilateral_fraction * patients), chosen by a
// seeded shuffle; every patient has at least one present task.
std::vector<SynthPatient> generate_cohort(const SynthConfig& cfg);

// Brute-force mean within-community Pearson correlation per sliding window,
// per task network. Degenerate (constant) pairs are excluded and counted.
struct SynchronyProfile {
    std::array<std::vector<double>, kNumTasks> per_task;
    long excluded_pairs = 0;
};

SynchronyProfile oracle_window_synchrony(const SynthPatient& patient, const WindowConfig& cfg);

// Fraction of the window [start, start+length) covered by the intervals.
double interval_overlap_fraction(const IntervalList& intervals, int start, int length);

}  // namespace eloc

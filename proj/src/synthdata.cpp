#include "eloc/synthdata.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <set>

namespace eloc {

void SynthConfig::validate() const {
    if (regions < 8) throw config_error("synthetic cohort needs at least 8 regions");
    if (frames < 2) throw config_error("synthetic cohort needs at least 2 frames");
    if (patients < 1) throw config_error("patient count must be >= 1");
    for (double p : task_presence) {
        if (p < 0.0 || p > 1.0) throw config_error("task presence probabilities must be in [0,1]");
    }
    double total_presence = 0.0;
    for (double p : task_presence) total_presence += p;
    if (total_presence <= 0.0) {
        throw config_error("at least one task presence probability must be positive");
    }
    if (language_size < 1) throw config_error("language community size must be >= 1");
    for (int s : motor_sizes) {
        if (s < 1) throw config_error("motor community sizes must be >= 1");
    }
    if (bilateral_fraction < 0.0 || bilateral_fraction > 1.0) {
        throw config_error("bilateral fraction must be in [0,1]");
    }
    if (tumor_size[0] < 1 || tumor_size[1] < tumor_size[0]) {
        throw config_error("tumor size range invalid");
    }
    if (interval_length[0] < 1 || interval_length[1] < interval_length[0]) {
        throw config_error("interval length range invalid");
    }
    if (rest_length[0] < 0 || rest_length[1] < rest_length[0]) {
        throw config_error("rest length range invalid");
    }
    if (!(corr_active > 0.0 && corr_active < 1.0) || !(corr_idle >= 0.0 && corr_idle < 1.0)) {
        throw config_error("correlation levels must lie in (0,1)");
    }
    if (noise <= 0.0) throw config_error("noise level must be positive");

    // Motor blocks sit at fixed indices from the hemisphere split; the
    // language and distractor communities must fit in the left half.
    const int split = regions / 2;
    int motor_span = 0;
    for (int s : motor_sizes) motor_span += s;
    if (split + motor_span > regions) {
        throw config_error("motor communities do not fit in the right hemisphere");
    }
    if (distractor_size < 0) throw config_error("distractor size must be >= 0");
    if (language_size + distractor_size + tumor_size[1] > split) {
        throw config_error("left-hemisphere communities plus tumor exceed the left hemisphere");
    }
}

namespace {

std::array<std::vector<int>, 3> motor_blocks(const SynthConfig& cfg) {
    std::array<std::vector<int>, 3> blocks;
    int start = cfg.regions / 2;
    for (int k = 0; k < 3; ++k) {
        for (int i = 0; i < cfg.motor_sizes[static_cast<size_t>(k)]; ++i) {
            blocks[static_cast<size_t>(k)].push_back(start + i);
        }
        start += cfg.motor_sizes[static_cast<size_t>(k)];
    }
    return blocks;
}

Schedule make_schedule(const SynthConfig& cfg, Rng& rng) {
    // Active intervals alternate between the two systems with idle stretches
    // in between, so each system is synchronous for only part of the scan.
    Schedule schedule;
    bool language_turn = rng.uniform() < 0.5;
    int pos = 0;
    while (pos < cfg.frames) {
        const int len = rng.uniform_int(cfg.interval_length[0], cfg.interval_length[1]);
        const int end = std::min(pos + len, cfg.frames);
        (language_turn ? schedule.language : schedule.motor).emplace_back(pos, end);
        language_turn = !language_turn;
        pos = end;
        if (pos < cfg.frames && cfg.rest_length[1] > 0) {
            pos += rng.uniform_int(cfg.rest_length[0], cfg.rest_length[1]);
        }
    }
    // Distractor intervals are drawn independently and may overlap either
    // system's active stretches.
    int dpos = rng.uniform_int(0, cfg.rest_length[1]);
    while (dpos < cfg.frames) {
        const int len = rng.uniform_int(cfg.interval_length[0], cfg.interval_length[1]);
        const int end = std::min(dpos + len, cfg.frames);
        schedule.distractor.emplace_back(dpos, end);
        dpos = end + rng.uniform_int(cfg.rest_length[0] + 1, cfg.rest_length[1] + 20);
    }
    return schedule;
}

bool in_intervals(const IntervalList& intervals, int frame) {
    for (const auto& [s, e] : intervals) {
        if (frame >= s && frame < e) return true;
    }
    return false;
}

}  // namespace

double interval_overlap_fraction(const IntervalList& intervals, int start, int length) {
    int covered = 0;
    for (const auto& [s, e] : intervals) {
        covered += std::max(0, std::min(e, start + length) - std::max(s, start));
    }
    return static_cast<double>(covered) / static_cast<double>(length);
}

SynthPatient generate_patient(const SynthConfig& cfg, uint64_t patient_seed,
                              const PatientPlan& plan, const std::string& id) {
    cfg.validate();
    Rng rng(patient_seed);
    SynthPatient patient;
    patient.id = id;
    patient.bilateral = plan.bilateral;
    patient.hemisphere_split = cfg.regions / 2;
    const int n = cfg.regions;
    const int split = patient.hemisphere_split;

    // Motor communities sit at fixed index blocks (stable anatomy); the
    // language community placement varies per patient.
    const auto blocks = motor_blocks(cfg);
    patient.communities[1] = blocks[0];
    patient.communities[2] = blocks[1];
    patient.communities[3] = blocks[2];

    std::set<int> occupied;
    for (int k = 1; k < kNumTasks; ++k) {
        occupied.insert(patient.communities[static_cast<size_t>(k)].begin(),
                        patient.communities[static_cast<size_t>(k)].end());
    }

    // Contiguous tumor block avoiding the motor communities; placed before
    // the language community so scattered language indices cannot starve it
    // of free runs.
    const int tumor_len = rng.uniform_int(cfg.tumor_size[0], cfg.tumor_size[1]);
    std::vector<int> starts;
    for (int s = 0; s + tumor_len <= n; ++s) {
        bool clear = true;
        for (int i = s; i < s + tumor_len && clear; ++i) clear = !occupied.count(i);
        if (clear) starts.push_back(s);
    }
    if (starts.empty()) {
        throw config_error("tumor placement infeasible: no free block of " +
                           std::to_string(tumor_len) + " regions");
    }
    const int tumor_start = starts[static_cast<size_t>(
        rng.uniform_int(0, static_cast<int>(starts.size()) - 1))];
    for (int i = 0; i < tumor_len; ++i) {
        patient.tumor_mask.region_indices.push_back(tumor_start + i);
        occupied.insert(tumor_start + i);
    }

    std::vector<int> left_slots, right_slots;
    for (int i = 0; i < split; ++i) {
        if (!occupied.count(i)) left_slots.push_back(i);
    }
    for (int i = split; i < n; ++i) {
        if (!occupied.count(i)) right_slots.push_back(i);
    }
    rng.shuffle(left_slots);
    rng.shuffle(right_slots);

    std::vector<int>& language = patient.communities[0];
    const int right_count = plan.bilateral ? cfg.language_size / 2 : 0;
    const int left_count = cfg.language_size - right_count;
    if (left_count > static_cast<int>(left_slots.size()) ||
        right_count > static_cast<int>(right_slots.size())) {
        throw config_error("language community does not fit around the tumor and motor plants");
    }
    language.assign(left_slots.begin(), left_slots.begin() + left_count);
    language.insert(language.end(), right_slots.begin(), right_slots.begin() + right_count);
    std::sort(language.begin(), language.end());
    if (left_count + cfg.distractor_size > static_cast<int>(left_slots.size())) {
        throw config_error("distractor community does not fit in the left hemisphere");
    }
    patient.distractor_community.assign(left_slots.begin() + left_count,
                                        left_slots.begin() + left_count + cfg.distractor_size);
    std::sort(patient.distractor_community.begin(), patient.distractor_community.end());

    patient.schedule = make_schedule(cfg, rng);

    // Signals: independent unit noise everywhere; community members share a
    // latent series scaled to the active/idle correlation target.
    // network index: 0..3 task communities, 4 distractor, -1 none
    std::vector<int> network_of(static_cast<size_t>(n), -1);
    for (int k = 0; k < kNumTasks; ++k) {
        for (int r : patient.communities[static_cast<size_t>(k)]) {
            network_of[static_cast<size_t>(r)] = k;
        }
    }
    for (int r : patient.distractor_community) network_of[static_cast<size_t>(r)] = kNumTasks;
    for (int r : patient.tumor_mask.region_indices) network_of[static_cast<size_t>(r)] = -1;

    std::array<std::vector<double>, kNumTasks + 1> latents;
    for (int k = 0; k <= kNumTasks; ++k) {
        latents[static_cast<size_t>(k)].resize(static_cast<size_t>(cfg.frames));
        for (int t = 0; t < cfg.frames; ++t) {
            latents[static_cast<size_t>(k)][static_cast<size_t>(t)] = rng.normal();
        }
    }

    Tensor data({cfg.frames, n});
    for (int t = 0; t < cfg.frames; ++t) {
        for (int r = 0; r < n; ++r) {
            const double eps = rng.normal() * cfg.noise;
            const int k = network_of[static_cast<size_t>(r)];
            if (k < 0) {
                data.at(t, r) = eps;
                continue;
            }
            const IntervalList& active = k == 0   ? patient.schedule.language
                                         : k == kNumTasks ? patient.schedule.distractor
                                                          : patient.schedule.motor;
            const double w = in_intervals(active, t) ? cfg.corr_active : cfg.corr_idle;
            data.at(t, r) = std::sqrt(w) * latents[static_cast<size_t>(k)][static_cast<size_t>(t)] +
                            std::sqrt(1.0 - w) * eps;
        }
    }
    patient.time_series = TimeSeries(std::move(data));

    for (int k = 0; k < kNumTasks; ++k) {
        if (!plan.tasks_present[static_cast<size_t>(k)]) continue;
        std::vector<int> ids(static_cast<size_t>(n), static_cast<int>(NodeClass::background));
        for (int r : patient.communities[static_cast<size_t>(k)]) {
            ids[static_cast<size_t>(r)] = static_cast<int>(NodeClass::eloquent);
        }
        for (int r : patient.tumor_mask.region_indices) {
            ids[static_cast<size_t>(r)] = static_cast<int>(NodeClass::tumor);
        }
        patient.labels.tasks[static_cast<size_t>(k)] = TaskLabels::from_class_ids(ids);
    }
    return patient;
}

SynthPatient generate_patient(const SynthConfig& cfg, Rng& rng) {
    cfg.validate();
    PatientPlan plan;
    plan.bilateral = rng.uniform() < cfg.bilateral_fraction;
    bool any = false;
    while (!any) {
        for (int k = 0; k < kNumTasks; ++k) {
            plan.tasks_present[static_cast<size_t>(k)] =
                rng.uniform() < cfg.task_presence[static_cast<size_t>(k)];
            any = any || plan.tasks_present[static_cast<size_t>(k)];
        }
    }
    return generate_patient(cfg, rng.next_u64(), plan, "patient");
}

std::vector<SynthPatient> generate_cohort(const SynthConfig& cfg) {
    cfg.validate();
    Rng rng(cfg.seed);

    const int bilateral_count = static_cast<int>(
        std::llround(cfg.bilateral_fraction * static_cast<double>(cfg.patients)));
    std::vector<int> order(static_cast<size_t>(cfg.patients));
    std::iota(order.begin(), order.end(), 0);
    rng.shuffle(order);
    std::vector<char> bilateral(static_cast<size_t>(cfg.patients), 0);
    for (int i = 0; i < bilateral_count; ++i) bilateral[static_cast<size_t>(order[i])] = 1;

    std::vector<SynthPatient> cohort;
    cohort.reserve(static_cast<size_t>(cfg.patients));
    for (int p = 0; p < cfg.patients; ++p) {
        PatientPlan plan;
        plan.bilateral = bilateral[static_cast<size_t>(p)] != 0;
        bool any = false;
        while (!any) {
            for (int k = 0; k < kNumTasks; ++k) {
                plan.tasks_present[static_cast<size_t>(k)] =
                    rng.uniform() < cfg.task_presence[static_cast<size_t>(k)];
                any = any || plan.tasks_present[static_cast<size_t>(k)];
            }
        }
        char id[16];
        std::snprintf(id, sizeof(id), "p%03d", p);
        cohort.push_back(
            generate_patient(cfg, Rng::mix(cfg.seed, static_cast<uint64_t>(p)), plan, id));
    }
    return cohort;
}

SynchronyProfile oracle_window_synchrony(const SynthPatient& patient, const WindowConfig& cfg) {
    cfg.validate();
    const TimeSeries& ts = patient.time_series;
    const int t_count = window_count_for(ts.frames(), cfg.window_length, cfg.stride);
    if (t_count == 0) throw data_error("scan too short for the window configuration");

    SynchronyProfile profile;
    const int d = cfg.window_length;
    for (int k = 0; k < kNumTasks; ++k) {
        const std::vector<int>& community = patient.communities[static_cast<size_t>(k)];
        auto& series = profile.per_task[static_cast<size_t>(k)];
        series.assign(static_cast<size_t>(t_count), 0.0);
        for (int t = 0; t < t_count; ++t) {
            const int start = t * cfg.stride;
            double corr_sum = 0.0;
            long pairs = 0;
            for (size_t a = 0; a < community.size(); ++a) {
                for (size_t b = a + 1; b < community.size(); ++b) {
                    const int ra = community[a], rb = community[b];
                    double ma = 0.0, mb = 0.0;
                    for (int i = 0; i < d; ++i) {
                        ma += ts.data.at(start + i, ra);
                        mb += ts.data.at(start + i, rb);
                    }
                    ma /= d;
                    mb /= d;
                    double num = 0.0, va = 0.0, vb = 0.0;
                    for (int i = 0; i < d; ++i) {
                        const double da = ts.data.at(start + i, ra) - ma;
                        const double db = ts.data.at(start + i, rb) - mb;
                        num += da * db;
                        va += da * da;
                        vb += db * db;
                    }
                    if (va <= 0.0 || vb <= 0.0) {
                        ++profile.excluded_pairs;
                        continue;
                    }
                    corr_sum += num / std::sqrt(va * vb);
                    ++pairs;
                }
            }
            series[static_cast<size_t>(t)] = pairs > 0 ? corr_sum / static_cast<double>(pairs)
                                                       : 0.0;
        }
    }
    return profile;
}

}  // namespace eloc

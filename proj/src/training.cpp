#include "eloc/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <thread>

namespace eloc {

void TrainConfig::validate() const {
    if (!(learning_rate > 0.0)) throw config_error("learning rate must be positive");
    if (momentum < 0.0 || momentum >= 1.0) throw config_error("momentum must lie in [0,1)");
    if (weight_decay < 0.0) throw config_error("weight decay must be >= 0");
    if (epochs < 1) throw config_error("epoch count must be >= 1");
    if (folds < 2) throw config_error("fold count must be >= 2");
    if (batch_size < 0) throw config_error("batch size must be >= 0");
    if (threads < 0) throw config_error("thread count must be >= 0");
}

PreparedPatient prepare_patient(const SynthPatient& patient, const WindowConfig& window,
                                Variant variant) {
    PreparedPatient prepared;
    prepared.id = patient.id;
    prepared.labels = patient.labels;
    if (variant == Variant::mt_gnn_static) {
        // Whole scan as one window: static connectivity.
        WindowConfig whole = window;
        whole.window_length = patient.time_series.frames();
        whole.stride = patient.time_series.frames();
        prepared.connectivity =
            build_dynamic_connectivity(patient.time_series, whole, patient.tumor_mask);
    } else {
        prepared.connectivity =
            build_dynamic_connectivity(patient.time_series, window, patient.tumor_mask);
    }
    return prepared;
}

std::vector<PreparedPatient> prepare_cohort(const std::vector<SynthPatient>& cohort,
                                            const WindowConfig& window, Variant variant) {
    std::vector<PreparedPatient> prepared;
    prepared.reserve(cohort.size());
    for (const auto& p : cohort) prepared.push_back(prepare_patient(p, window, variant));
    return prepared;
}

OptState::OptState(const std::vector<ModelState::ParamRef>& params) {
    velocity.reserve(params.size());
    for (const auto& p : params) {
        velocity.emplace_back(static_cast<size_t>(p.tensor.size()), 0.0);
    }
}

void sgd_step(std::vector<ModelState::ParamRef>& params, OptState& opt, const TrainConfig& cfg) {
    if (params.size() != opt.velocity.size()) {
        throw dimension_error("optimizer state does not match parameter list");
    }
    for (size_t k = 0; k < params.size(); ++k) {
        Tensor t = params[k].tensor;
        auto& grad = t.grad();
        auto& vel = opt.velocity[k];
        double* theta = t.data();
        const double wd = params[k].decay ? cfg.weight_decay : 0.0;
        for (size_t i = 0; i < grad.size(); ++i) {
            if (!std::isfinite(grad[i])) {
                throw numeric_error("non-finite gradient in parameter '" + params[k].name + "'");
            }
            vel[i] = cfg.momentum * vel[i] + (grad[i] + wd * theta[i]);
            theta[i] -= cfg.learning_rate * vel[i];
        }
        t.zero_grad();
    }
}

namespace {

// Worker w handles iterations w, w+workers, ... so each worker's scratch
// state is never shared across threads.
void parallel_for_workers(int count, int workers, const std::function<void(int, int)>& fn) {
    workers = std::max(1, std::min(workers, count));
    if (workers == 1) {
        for (int i = 0; i < count; ++i) fn(0, i);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(static_cast<size_t>(workers));
    for (int w = 0; w < workers; ++w) {
        pool.emplace_back([&, w, workers]() {
            for (int i = w; i < count; i += workers) fn(w, i);
        });
    }
    for (auto& t : pool) t.join();
}

void copy_values(const std::vector<ModelState::ParamRef>& from,
                 std::vector<ModelState::ParamRef>& to) {
    for (size_t k = 0; k < from.size(); ++k) {
        Tensor dst = to[k].tensor;
        std::copy(from[k].tensor.values().begin(), from[k].tensor.values().end(), dst.data());
    }
}

}  // namespace

TrainResult train(const std::vector<PreparedPatient>& patients, const TrainConfig& cfg,
                  const ModelConfig& mcfg, const RiskWeights& risk) {
    cfg.validate();
    risk.validate();
    if (patients.empty()) throw config_error("training set is empty");
    bool any_supervised = false;
    for (const auto& p : patients) any_supervised = any_supervised || p.labels.any_present();
    if (!any_supervised) {
        throw config_error("no patient has a supervised task; nothing to train");
    }

    ModelState master = build_variant(mcfg, cfg.seed);
    auto master_params = master.parameters();

    // Branches of tasks absent from every training patient are frozen
    // outright: no gradient and no optimizer step (weight decay included),
    // so they remain bit-identical to their initialization.
    std::array<bool, kNumTasks> task_seen{};
    for (const auto& p : patients) {
        for (int k = 0; k < kNumTasks; ++k) {
            task_seen[static_cast<size_t>(k)] = task_seen[static_cast<size_t>(k)] || p.labels.has(k);
        }
    }
    std::vector<ModelState::ParamRef> step_params;
    for (const auto& p : master_params) {
        bool frozen = false;
        for (int k = 0; k < kNumTasks; ++k) {
            if (task_seen[static_cast<size_t>(k)]) continue;
            for (const auto& head : master.head_parameters(k)) {
                frozen = frozen || head.name == p.name;
            }
        }
        if (!frozen) step_params.push_back(p);
    }
    OptState opt(step_params);
    Rng shuffle_rng(Rng::mix(cfg.seed, 0x9a7cull));

    const int patient_count = static_cast<int>(patients.size());
    const int threads = cfg.threads;

    // Per-worker scratch model, refreshed from the master before each use.
    const int pool_size =
        std::max(1, std::min(threads <= 0 ? static_cast<int>(std::thread::hardware_concurrency())
                                          : threads,
                             patient_count));
    std::vector<ModelState> scratch;
    std::vector<std::vector<ModelState::ParamRef>> scratch_params;
    for (int w = 0; w < pool_size; ++w) {
        scratch.push_back(master.clone(true));
        scratch_params.push_back(scratch.back().parameters());
    }

    TrainResult result;
    result.epoch_mean_loss.reserve(static_cast<size_t>(cfg.epochs));

    std::vector<std::vector<std::vector<double>>> patient_grads(
        static_cast<size_t>(patient_count));
    std::vector<double> patient_loss(static_cast<size_t>(patient_count), 0.0);

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::vector<int> order(static_cast<size_t>(patient_count));
        std::iota(order.begin(), order.end(), 0);
        if (cfg.batch_size > 0) shuffle_rng.shuffle(order);
        const int batch_span = cfg.batch_size > 0 ? cfg.batch_size : patient_count;

        for (int batch_start = 0; batch_start < patient_count; batch_start += batch_span) {
            const int batch_end = std::min(batch_start + batch_span, patient_count);
            const int batch_count = batch_end - batch_start;

            parallel_for_workers(batch_count, pool_size, [&](int worker, int bi) {
                const int pi = order[static_cast<size_t>(batch_start + bi)];
                auto& local = scratch_params[static_cast<size_t>(worker)];
                copy_values(master_params, local);
                for (auto& p : local) p.tensor.zero_grad();

                Graph graph;
                const PreparedPatient& patient = patients[static_cast<size_t>(pi)];
                HeadOutputs outputs =
                    forward(graph, patient.connectivity, scratch[static_cast<size_t>(worker)]);
                TotalLoss loss = training_loss(graph, outputs, patient.labels, risk, cfg.loss_mode);
                patient_loss[static_cast<size_t>(pi)] = loss.total.at(0);
                Tensor scaled = graph.scale(loss.total, 1.0 / static_cast<double>(batch_count));
                graph.backward(scaled);

                auto& grads = patient_grads[static_cast<size_t>(pi)];
                grads.resize(local.size());
                for (size_t k = 0; k < local.size(); ++k) {
                    grads[k] = local[k].tensor.has_grad()
                                   ? local[k].tensor.grad()
                                   : std::vector<double>(
                                         static_cast<size_t>(local[k].tensor.size()), 0.0);
                }
            });

            // Fixed-order reduction keeps results independent of thread count.
            for (int bi = 0; bi < batch_count; ++bi) {
                const int pi = order[static_cast<size_t>(batch_start + bi)];
                const auto& grads = patient_grads[static_cast<size_t>(pi)];
                for (size_t k = 0; k < master_params.size(); ++k) {
                    auto& acc = master_params[k].tensor.grad();
                    const auto& g = grads[k];
                    for (size_t i = 0; i < acc.size(); ++i) acc[i] += g[i];
                }
            }
            sgd_step(step_params, opt, cfg);
        }

        double mean_loss = 0.0;
        for (int pi = 0; pi < patient_count; ++pi) {
            mean_loss += patient_loss[static_cast<size_t>(pi)];
        }
        mean_loss /= static_cast<double>(patient_count);
        result.epoch_mean_loss.push_back(mean_loss);
        if ((epoch + 1) % 50 == 0 || epoch == 0) {
            log_debug("epoch " + std::to_string(epoch + 1) + "/" + std::to_string(cfg.epochs) +
                      " mean loss " + std::to_string(mean_loss));
        }
    }

    result.state = std::move(master);
    return result;
}

std::vector<std::vector<int>> make_folds(const std::vector<std::string>& ids, int folds,
                                         uint64_t seed) {
    const int patient_count = static_cast<int>(ids.size());
    if (folds < 2) throw config_error("fold count must be >= 2");
    if (patient_count < folds) {
        throw config_error("cannot split " + std::to_string(patient_count) + " patients into " +
                           std::to_string(folds) + " folds");
    }
    // Sort by id so the assignment depends only on the id set and the seed.
    std::vector<int> order(static_cast<size_t>(patient_count));
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](int a, int b) { return ids[static_cast<size_t>(a)] < ids[static_cast<size_t>(b)]; });
    Rng rng(seed);
    rng.shuffle(order);

    std::vector<std::vector<int>> result(static_cast<size_t>(folds));
    const int base = patient_count / folds;
    const int extra = patient_count % folds;
    int cursor = 0;
    for (int f = 0; f < folds; ++f) {
        const int size = base + (f < extra ? 1 : 0);
        for (int i = 0; i < size; ++i) {
            result[static_cast<size_t>(f)].push_back(order[static_cast<size_t>(cursor++)]);
        }
        std::sort(result[static_cast<size_t>(f)].begin(), result[static_cast<size_t>(f)].end());
    }
    return result;
}

PatientEvaluation evaluate_patient(const ModelState& state, const PreparedPatient& patient) {
    ModelState eval_state = state.clone(false);
    Graph graph;
    HeadOutputs outputs = forward(graph, patient.connectivity, eval_state);
    std::array<Tensor, kNumTasks> aggregated = aggregate_scores(graph, outputs);

    PatientEvaluation eval;
    eval.id = patient.id;
    eval.attention_language = outputs.attention.language.values();
    eval.attention_motor = outputs.attention.motor.values();
    for (int k = 0; k < kNumTasks; ++k) {
        eval.predicted[static_cast<size_t>(k)] =
            predict_labels(aggregated[static_cast<size_t>(k)]);
        if (patient.labels.has(k)) {
            eval.metrics[static_cast<size_t>(k)] =
                compute_metrics(eval.predicted[static_cast<size_t>(k)],
                                aggregated[static_cast<size_t>(k)],
                                *patient.labels.tasks[static_cast<size_t>(k)]);
        }
    }
    return eval;
}

CvResult cross_validate(const std::vector<PreparedPatient>& patients, const TrainConfig& cfg,
                        const ModelConfig& mcfg, const RiskWeights& risk) {
    cfg.validate();
    if (static_cast<int>(patients.size()) < cfg.folds) {
        throw config_error("cannot cross-validate " + std::to_string(patients.size()) +
                           " patients with " + std::to_string(cfg.folds) + " folds");
    }
    std::vector<std::string> ids;
    ids.reserve(patients.size());
    for (const auto& p : patients) ids.push_back(p.id);
    const auto folds = make_folds(ids, cfg.folds, cfg.seed);

    CvResult result;
    for (int f = 0; f < cfg.folds; ++f) {
        const auto& test_indices = folds[static_cast<size_t>(f)];
        std::vector<char> is_test(patients.size(), 0);
        for (int idx : test_indices) is_test[static_cast<size_t>(idx)] = 1;

        std::vector<PreparedPatient> train_set;
        for (size_t i = 0; i < patients.size(); ++i) {
            if (!is_test[i]) train_set.push_back(patients[i]);
        }

        TrainConfig fold_cfg = cfg;
        fold_cfg.seed = Rng::mix(cfg.seed, static_cast<uint64_t>(f) + 1);
        log_info("fold " + std::to_string(f + 1) + "/" + std::to_string(cfg.folds) + ": training on " +
                 std::to_string(train_set.size()) + " patients");
        TrainResult trained = train(train_set, fold_cfg, mcfg, risk);

        FoldResult fold;
        fold.test_indices = test_indices;
        fold.epoch_mean_loss = trained.epoch_mean_loss;
        for (int idx : test_indices) {
            fold.patients.push_back(
                evaluate_patient(trained.state, patients[static_cast<size_t>(idx)]));
        }

        for (int k = 0; k < kNumTasks; ++k) {
            FoldTaskMetrics& ftm = fold.tasks[static_cast<size_t>(k)];
            double auc_sum = 0.0;
            for (const auto& pe : fold.patients) {
                const auto& maybe = pe.metrics[static_cast<size_t>(k)];
                if (!maybe.has_value()) continue;
                ++ftm.patients;
                ftm.eloquent_accuracy += maybe->eloquent_accuracy;
                ftm.overall_accuracy += maybe->overall_accuracy;
                if (maybe->auc.has_value()) {
                    ++ftm.auc_defined;
                    auc_sum += *maybe->auc;
                }
            }
            if (ftm.patients > 0) {
                ftm.eloquent_accuracy /= ftm.patients;
                ftm.overall_accuracy /= ftm.patients;
            }
            if (ftm.auc_defined > 0) ftm.auc = auc_sum / ftm.auc_defined;
        }
        result.folds.push_back(std::move(fold));
    }

    for (int k = 0; k < kNumTasks; ++k) {
        std::vector<FoldTaskMetrics> per_fold;
        per_fold.reserve(result.folds.size());
        for (const auto& fold : result.folds) {
            per_fold.push_back(fold.tasks[static_cast<size_t>(k)]);
        }
        result.summary[static_cast<size_t>(k)] = aggregate_cv(per_fold);
    }
    return result;
}

}  // namespace eloc

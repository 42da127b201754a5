#include "eloc/pipeline.hpp"

#include <sstream>

namespace eloc {

json to_json(const RunOptions& opts) {
    return json{{"window", to_json(opts.window)},
                {"model", to_json(opts.model)},
                {"train", to_json(opts.train)},
                {"risk_weights", to_json(opts.risk)}};
}

RunOptions run_options_from_json(const json& j) {
    RunOptions opts;
    if (j.contains("window")) opts.window = window_config_from_json(j.at("window"));
    if (j.contains("model")) opts.model = model_config_from_json(j.at("model"));
    if (j.contains("train")) opts.train = train_config_from_json(j.at("train"));
    if (j.contains("risk_weights")) opts.risk = risk_weights_from_json(j.at("risk_weights"));
    return opts;
}

void run_simulate(const SynthConfig& cfg, const fs::path& out_dir) {
    cfg.validate();
    const auto cohort = generate_cohort(cfg);
    write_cohort(cohort, cfg, out_dir);
    std::vector<std::string> outputs{"cohort.json"};
    for (const auto& p : cohort) outputs.push_back(p.id + ".pat");
    write_manifest(out_dir, make_manifest("simulate", json{{"synth", to_json(cfg)}}, cfg.seed, {},
                                          outputs));
    log_info("simulated " + std::to_string(cohort.size()) + " patients into " + out_dir.string());
}

namespace {

std::string format_double(double v) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
}

void write_attention_tsv(const fs::path& path, const std::vector<double>& language,
                         const std::vector<double>& motor) {
    std::string text = "window\ta_language\ta_motor\n";
    for (size_t t = 0; t < language.size(); ++t) {
        text += std::to_string(t) + "\t" + format_double(language[t]) + "\t" +
                format_double(motor[t]) + "\n";
    }
    atomic_write_text(path, text);
}

json fold_task_record(int fold, int task, const FoldTaskMetrics& m) {
    json rec{{"record", "fold_task"},
             {"fold", fold},
             {"task", kTaskNames[task]},
             {"patients", m.patients},
             {"eloquent_accuracy", m.eloquent_accuracy},
             {"overall_accuracy", m.overall_accuracy},
             {"auc_defined", m.auc_defined}};
    if (m.auc.has_value()) rec["auc"] = *m.auc;
    return rec;
}

json summary_record(int task, const TaskSummary& s) {
    json rec{{"record", "cv_task"}, {"task", kTaskNames[task]}, {"absent", s.absent}};
    if (!s.absent) {
        rec["folds"] = s.folds;
        rec["eloquent_accuracy"] = s.eloquent_accuracy;
        rec["overall_accuracy"] = s.overall_accuracy;
        rec["auc_folds"] = s.auc_folds;
        if (s.auc.has_value()) rec["auc"] = *s.auc;
    }
    return rec;
}

}  // namespace

TrainResult run_train(const fs::path& cohort_dir, const RunOptions& opts,
                      const fs::path& out_dir) {
    const CohortOnDisk cohort = read_cohort(cohort_dir);
    const auto prepared = prepare_cohort(cohort.patients, opts.window, opts.model.variant);
    TrainResult result = train(prepared, opts.train, opts.model, opts.risk);

    fs::create_directories(out_dir);
    save_checkpoint(result.state, opts.window, out_dir / "checkpoint.bin");
    std::string history = "epoch\tmean_loss\n";
    for (size_t e = 0; e < result.epoch_mean_loss.size(); ++e) {
        history += std::to_string(e) + "\t" + format_double(result.epoch_mean_loss[e]) + "\n";
    }
    atomic_write_text(out_dir / "loss_history.tsv", history);
    write_manifest(out_dir, make_manifest("train", to_json(opts), opts.train.seed,
                                          {cohort_dir.string()},
                                          {"checkpoint.bin", "loss_history.tsv"}));
    return result;
}

CvResult run_crossval(const fs::path& cohort_dir, const RunOptions& opts,
                      const fs::path& out_dir) {
    const CohortOnDisk cohort = read_cohort(cohort_dir);
    const auto prepared = prepare_cohort(cohort.patients, opts.window, opts.model.variant);
    CvResult result = cross_validate(prepared, opts.train, opts.model, opts.risk);

    fs::create_directories(out_dir / "attention");
    std::string metrics;
    for (size_t f = 0; f < result.folds.size(); ++f) {
        for (int k = 0; k < kNumTasks; ++k) {
            metrics += fold_task_record(static_cast<int>(f), k,
                                        result.folds[f].tasks[static_cast<size_t>(k)])
                           .dump() +
                       "\n";
        }
        for (const auto& pe : result.folds[f].patients) {
            write_attention_tsv(out_dir / "attention" / (pe.id + ".tsv"), pe.attention_language,
                                pe.attention_motor);
        }
    }
    for (int k = 0; k < kNumTasks; ++k) {
        metrics += summary_record(k, result.summary[static_cast<size_t>(k)]).dump() + "\n";
    }
    atomic_write_text(out_dir / "metrics.jsonl", metrics);
    write_manifest(out_dir, make_manifest("crossval", to_json(opts), opts.train.seed,
                                          {cohort_dir.string()},
                                          {"metrics.jsonl", "attention/"}));
    return result;
}

BilateralReport run_bilateral(const fs::path& cohort_dir, const RunOptions& opts,
                              const fs::path& out_dir) {
    const CohortOnDisk cohort = read_cohort(cohort_dir);
    std::vector<SynthPatient> unilateral, bilateral;
    for (const auto& p : cohort.patients) {
        (p.bilateral ? bilateral : unilateral).push_back(p);
    }
    if (bilateral.empty()) {
        throw config_error("bilateral experiment needs at least one bilateral patient");
    }
    if (unilateral.empty()) {
        throw config_error("bilateral experiment needs unilateral training patients");
    }

    const auto train_set = prepare_cohort(unilateral, opts.window, opts.model.variant);
    const auto test_set = prepare_cohort(bilateral, opts.window, opts.model.variant);
    TrainResult trained = train(train_set, opts.train, opts.model, opts.risk);

    BilateralReport report;
    std::string records;
    for (size_t i = 0; i < test_set.size(); ++i) {
        PatientEvaluation eval = evaluate_patient(trained.state, test_set[i]);
        const SynthPatient& patient = bilateral[i];
        const auto& pred = eval.predicted[0];  // language head
        bool right_detected = false;
        for (int r = patient.hemisphere_split; r < static_cast<int>(pred.size()); ++r) {
            if (pred[static_cast<size_t>(r)] == static_cast<int>(NodeClass::eloquent)) {
                right_detected = true;
                break;
            }
        }
        const double acc =
            eval.metrics[0].has_value() ? eval.metrics[0]->eloquent_accuracy : 0.0;
        report.test_ids.push_back(eval.id);
        report.language_accuracy.push_back(acc);
        report.right_hemisphere_detected.push_back(right_detected);
        report.mean_language_accuracy += acc;
        if (right_detected) ++report.detected_count;
        records += json{{"record", "bilateral_patient"},
                        {"id", eval.id},
                        {"language_accuracy", acc},
                        {"right_hemisphere_detected", right_detected}}
                       .dump() +
                   "\n";
    }
    report.mean_language_accuracy /= static_cast<double>(test_set.size());
    records += json{{"record", "bilateral_summary"},
                    {"test_patients", test_set.size()},
                    {"mean_language_accuracy", report.mean_language_accuracy},
                    {"right_hemisphere_detected", report.detected_count}}
                   .dump() +
               "\n";
    fs::create_directories(out_dir);
    atomic_write_text(out_dir / "bilateral.jsonl", records);
    write_manifest(out_dir, make_manifest("bilateral", to_json(opts), opts.train.seed,
                                          {cohort_dir.string()}, {"bilateral.jsonl"}));
    return report;
}

PredictResult run_predict(const fs::path& checkpoint_path, const fs::path& patient_path,
                          const fs::path& out_dir) {
    Checkpoint ckpt = load_checkpoint(checkpoint_path);
    SynthPatient patient = read_patient(patient_path);
    if (patient.time_series.regions() != ckpt.state.config.regions) {
        throw dimension_error("patient has " + std::to_string(patient.time_series.regions()) +
                              " regions, checkpoint expects " +
                              std::to_string(ckpt.state.config.regions));
    }
    const PreparedPatient prepared =
        prepare_patient(patient, ckpt.window, ckpt.state.config.variant);

    Graph graph;
    ModelState eval_state = ckpt.state.clone(false);
    HeadOutputs outputs = forward(graph, prepared.connectivity, eval_state);
    std::array<Tensor, kNumTasks> aggregated = aggregate_scores(graph, outputs);

    PredictResult result;
    result.attention_language = outputs.attention.language.values();
    result.attention_motor = outputs.attention.motor.values();
    json scores_json = json::object();
    json labels_json = json::object();
    for (int k = 0; k < kNumTasks; ++k) {
        result.scores[static_cast<size_t>(k)] = aggregated[static_cast<size_t>(k)];
        result.labels[static_cast<size_t>(k)] =
            predict_labels(aggregated[static_cast<size_t>(k)]);
        labels_json[kTaskNames[k]] = result.labels[static_cast<size_t>(k)];
        scores_json[kTaskNames[k]] = aggregated[static_cast<size_t>(k)].values();
    }

    fs::create_directories(out_dir);
    atomic_write_text(out_dir / "prediction.json",
                      json{{"patient", patient.id},
                           {"windows", prepared.connectivity.window_count()},
                           {"labels", labels_json},
                           {"scores", scores_json}}
                              .dump(2) +
                          "\n");
    write_attention_tsv(out_dir / "attention.tsv", result.attention_language,
                        result.attention_motor);
    write_manifest(out_dir,
                   make_manifest("predict",
                                 json{{"checkpoint", checkpoint_path.string()},
                                      {"window", to_json(ckpt.window)},
                                      {"model", to_json(ckpt.state.config)}},
                                 0, {checkpoint_path.string(), patient_path.string()},
                                 {"prediction.json", "attention.tsv"}));
    return result;
}

}  // namespace eloc

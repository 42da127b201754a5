#include <CLI11.hpp>

#include <fstream>
#include <iostream>

#include "eloc/pipeline.hpp"

namespace {

using eloc::json;

// Accepts either a plain config file or a manifest (config nested under
// "config"), so a run can be reproduced straight from its manifest.
json load_config_file(const std::string& path) {
    if (path.empty()) return json::object();
    std::ifstream in(path);
    if (!in) throw eloc::config_error("cannot open config file " + path);
    json j = json::parse(in);
    if (j.contains("config")) return j.at("config");
    return j;
}

struct CommonFlags {
    std::string config_path;
    std::string out_dir;
    uint64_t seed = 0;
    bool seed_set = false;
    std::string variant;
    std::string loss_mode;
    int folds = 0;
    int epochs = 0;
    int threads = -1;
};

void add_common(CLI::App* cmd, CommonFlags& flags, bool with_model_flags) {
    cmd->add_option("--config", flags.config_path, "JSON config (or manifest) file");
    cmd->add_option("--out", flags.out_dir, "output directory")->required();
    auto* seed = cmd->add_option("--seed", flags.seed, "seed override");
    seed->each([&flags](const std::string&) { flags.seed_set = true; });
    if (with_model_flags) {
        cmd->add_option("--variant", flags.variant,
                        "model variant: proposed|mt-ann|mt-gnn-static");
        cmd->add_option("--loss-mode", flags.loss_mode, "loss mode: literal|softmax-ce");
        cmd->add_option("--folds", flags.folds, "cross-validation fold count");
        cmd->add_option("--epochs", flags.epochs, "training epoch count");
        cmd->add_option("--threads", flags.threads, "worker threads (0 = all cores)");
    }
}

eloc::RunOptions options_from(const json& cfg, const CommonFlags& flags) {
    eloc::RunOptions opts = eloc::run_options_from_json(cfg);
    if (flags.seed_set) opts.train.seed = flags.seed;
    if (!flags.variant.empty()) opts.model.variant = eloc::variant_from_name(flags.variant);
    if (!flags.loss_mode.empty()) opts.train.loss_mode = eloc::loss_mode_from_name(flags.loss_mode);
    if (flags.folds > 0) opts.train.folds = flags.folds;
    if (flags.epochs > 0) opts.train.epochs = flags.epochs;
    if (flags.threads >= 0) opts.train.threads = flags.threads;
    return opts;
}

void print_summary(const eloc::CvResult& result) {
    for (int k = 0; k < eloc::kNumTasks; ++k) {
        const auto& s = result.summary[static_cast<size_t>(k)];
        std::cout << eloc::kTaskNames[k] << ": ";
        if (s.absent) {
            std::cout << "absent\n";
            continue;
        }
        std::cout << "eloquent_acc=" << s.eloquent_accuracy
                  << " overall_acc=" << s.overall_accuracy;
        if (s.auc.has_value()) {
            std::cout << " auc=" << *s.auc << " (over " << s.auc_folds << " folds)";
        } else {
            std::cout << " auc=undefined";
        }
        std::cout << "\n";
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Multi-task dynamic-connectivity localization of eloquent cortex"};
    app.require_subcommand(1);

    CommonFlags sim_flags, train_flags, cv_flags, bi_flags;
    std::string cohort_dir_train, cohort_dir_cv, cohort_dir_bi;
    std::string checkpoint_path, patient_path, predict_out;

    auto* sim = app.add_subcommand("simulate", "generate a synthetic cohort");
    add_common(sim, sim_flags, false);

    auto* tr = app.add_subcommand("train", "train on a full cohort and save a checkpoint");
    tr->add_option("--cohort", cohort_dir_train, "cohort directory")->required();
    add_common(tr, train_flags, true);

    auto* cv = app.add_subcommand("crossval", "k-fold cross-validation with metrics export");
    cv->add_option("--cohort", cohort_dir_cv, "cohort directory")->required();
    add_common(cv, cv_flags, true);

    auto* bi = app.add_subcommand("bilateral",
                                  "train on unilateral patients, test on bilateral ones");
    bi->add_option("--cohort", cohort_dir_bi, "cohort directory")->required();
    add_common(bi, bi_flags, true);

    auto* pred = app.add_subcommand("predict", "predict labels for one patient file");
    pred->add_option("--checkpoint", checkpoint_path, "checkpoint file")->required();
    pred->add_option("--patient", patient_path, "patient file")->required();
    pred->add_option("--out", predict_out, "output directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);  // --help
        std::cerr << json{{"error", "usage"}, {"detail", e.what()}}.dump() << "\n";
        return 2;
    }

    try {
        if (sim->parsed()) {
            json cfg = load_config_file(sim_flags.config_path);
            eloc::SynthConfig synth = cfg.contains("synth")
                                          ? eloc::synth_config_from_json(cfg.at("synth"))
                                          : eloc::SynthConfig{};
            if (sim_flags.seed_set) synth.seed = sim_flags.seed;
            eloc::run_simulate(synth, sim_flags.out_dir);
        } else if (tr->parsed()) {
            json cfg = load_config_file(train_flags.config_path);
            eloc::run_train(cohort_dir_train, options_from(cfg, train_flags), train_flags.out_dir);
        } else if (cv->parsed()) {
            json cfg = load_config_file(cv_flags.config_path);
            const auto result =
                eloc::run_crossval(cohort_dir_cv, options_from(cfg, cv_flags), cv_flags.out_dir);
            print_summary(result);
        } else if (bi->parsed()) {
            json cfg = load_config_file(bi_flags.config_path);
            const auto report =
                eloc::run_bilateral(cohort_dir_bi, options_from(cfg, bi_flags), bi_flags.out_dir);
            std::cout << "bilateral: mean_language_accuracy=" << report.mean_language_accuracy
                      << " right_hemisphere_detected=" << report.detected_count << "/"
                      << report.test_ids.size() << "\n";
        } else if (pred->parsed()) {
            eloc::run_predict(checkpoint_path, patient_path, predict_out);
        }
    } catch (const eloc::numeric_error& e) {
        std::cerr << json{{"error", "numeric"}, {"detail", e.what()}}.dump() << "\n";
        return 3;
    } catch (const eloc::error& e) {
        std::cerr << json{{"error", "config"}, {"detail", e.what()}}.dump() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << json{{"error", "runtime"}, {"detail", e.what()}}.dump() << "\n";
        return 3;
    }
    return 0;
}

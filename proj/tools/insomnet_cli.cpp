// Command-line driver: one subcommand per pipeline stage plus `run`.
#include "insomnet/error.hpp"
#include "insomnet/pipeline.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <functional>
#include <map>

using namespace insomnet;

namespace {

// Exit codes: 0 ok, 1 unexpected failure, 2 usage, 3 pipeline error.
constexpr int kPipelineFailure = 3;

std::string detail(const Error& e)
{
    std::string what = e.what();
    auto prefix = std::string(to_string(e.code())) + ": ";
    return what.rfind(prefix, 0) == 0 ? what.substr(prefix.size()) : what;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Insomnia identification from single-channel sleep EEG"};
    app.set_version_flag("--version", std::string(kVersion));
    app.set_config("--config", "", "TOML/INI file; every key mirrors a long flag");
    app.require_subcommand(1);

    PipelineConfig cfg;
    std::string channel = "fp2";
    std::string profiles;
    double lr = 0.0;
    bool rules = false;

    app.add_option("--out", cfg.out, "Output directory")->capture_default_str();
    app.add_option("--manifest", cfg.manifest, "Input manifest (subject_id,class,edf_path,hypnogram_path[,seed])");
    app.add_option("--seed", cfg.seed, "Global seed")->capture_default_str();
    app.add_option("--jobs", cfg.jobs, "Subjects processed in parallel")->capture_default_str()->check(CLI::PositiveNumber);
    app.add_option("--channel", channel, "fp2, c4 or both")->capture_default_str();

    app.add_option("--target-fs", cfg.target_fs, "Pipeline sampling rate (Hz)")->capture_default_str();
    app.add_option("--hp", cfg.filter.hp_cutoff, "High-pass cutoff (Hz)")->capture_default_str();
    app.add_option("--lp", cfg.filter.lp_cutoff, "Low-pass cutoff (Hz)")->capture_default_str();
    app.add_option("--order", cfg.filter.order, "Butterworth order of each half")->capture_default_str();
    app.add_flag("--zero-phase", cfg.filter.zero_phase, "Forward-backward filtering");
    app.add_option("--clip-uv", cfg.extract.clip_uv, "Epoch rejection threshold (uV)")->capture_default_str();
    app.add_flag("--slow-wave-gate", cfg.extract.slow_wave_gate, "Count slow-wave power only above 75 uV peak-to-peak");

    app.add_flag("--rules", rules, "Select features with the statistical rules instead of the fixed 20-name set");
    app.add_flag("--per-subject-means", cfg.per_subject_means, "Selection statistics over subject means");
    app.add_option("--alpha-top", cfg.selection.alpha_top)->capture_default_str();
    app.add_option("--p-optimal", cfg.selection.p_optimal)->capture_default_str();
    app.add_option("--r-top", cfg.selection.r_top)->capture_default_str();
    app.add_option("--r-optimal", cfg.selection.r_optimal)->capture_default_str();

    app.add_option("--lr", lr, "Learning rate (default 3e-4 Fp2/both, 2e-4 C4)");
    app.add_option("--weight-decay", cfg.train.weight_decay)->capture_default_str();
    app.add_option("--batch-size", cfg.train.batch_size)->capture_default_str();
    app.add_option("--max-epochs", cfg.train.max_epochs)->capture_default_str();
    app.add_option("--patience", cfg.train.early_stop_patience, "Early stopping patience (0 disables)")
        ->capture_default_str();
    app.add_option("--split", cfg.train.split, "Training share of subjects")->capture_default_str();
    app.add_flag("--epoch-split", cfg.train.epoch_split, "Early-stopping validation split by rows instead of subjects");

    app.add_option("--n-healthy", cfg.n_healthy)->capture_default_str();
    app.add_option("--n-insomnia", cfg.n_insomnia)->capture_default_str();
    app.add_option("--duration", cfg.cohort.duration, "Synthetic recording length (s)")->capture_default_str();
    app.add_option("--synth-fs", cfg.cohort.fs, "Synthetic sampling rate (Hz)")->capture_default_str();
    app.add_option("--profiles", profiles, "Synthetic class profiles ([healthy]/[insomnia] key = value)");

    const std::map<std::string, std::pair<std::string, std::function<void(const PipelineConfig&)>>> stages = {
        {"synth", {"Write a synthetic cohort (EDF + hypnograms + manifest)", [](const PipelineConfig& c) { cmd_synth(c); }}},
        {"ingest", {"Read EDF channels and resample", cmd_ingest}},
        {"preprocess", {"Band-pass filter and audit epoch rejection", cmd_preprocess}},
        {"features", {"Extract the 31 per-epoch features", cmd_features}},
        {"select", {"Split subjects and rank features", cmd_select}},
        {"train", {"Fit the CNN on the training subjects", cmd_train}},
        {"eval", {"Score held-out subjects", cmd_eval}},
        {"report", {"Collect result tables", cmd_report}},
        {"sleepstats", {"Per-class sleep parameter statistics", cmd_sleepstats}},
        {"run", {"All stages in order", cmd_run}},
    };
    for (const auto& [name, stage] : stages)
        app.add_subcommand(name, stage.first)->fallthrough();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    try {
        cfg.channel = parse_channel_mode(channel);
        cfg.selection.use_fixed_set = !rules;
        if (app.count("--lr"))
            cfg.learning_rate = lr;
        if (!profiles.empty())
            cfg.cohort.profiles = load_profiles(profiles);
        for (auto* sub : app.get_subcommands())
            stages.at(sub->get_name()).second(cfg);
    } catch (const Error& e) {
        std::fprintf(stderr, "ERROR %s %s\n", std::string(to_string(e.code())).c_str(), detail(e).c_str());
        return kPipelineFailure;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "ERROR Internal %s\n", e.what());
        return 1;
    }
    return 0;
}

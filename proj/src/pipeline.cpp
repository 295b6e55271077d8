#include "insomnet/pipeline.hpp"

#include "insomnet/csv.hpp"
#include "insomnet/edf.hpp"
#include "insomnet/error.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <exception>
#include <map>
#include <set>
#include <thread>

namespace insomnet {

namespace fs = std::filesystem;

namespace {

std::string lower(std::string_view s)
{
    std::string out(s);
    for (char& c : out)
        c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

void require(const fs::path& path, std::string_view producer)
{
    if (!fs::exists(path))
        throw Error(ErrorCode::StageOrderError,
                    "missing " + path.string() + "; run '" + std::string(producer) + "' first");
}

fs::path make_dir(const fs::path& dir)
{
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec)
        throw Error(ErrorCode::IoError, "cannot create " + dir.string());
    return dir;
}

fs::path input_manifest(const PipelineConfig& cfg)
{
    if (!cfg.manifest.empty()) {
        if (!fs::exists(cfg.manifest))
            throw Error(ErrorCode::ConfigError, "manifest " + cfg.manifest.string() + " does not exist");
        return cfg.manifest;
    }
    auto path = cfg.stage_dir("synth") / "manifest.csv";
    require(path, "synth");
    return path;
}

fs::path features_path(const PipelineConfig& cfg, Channel ch)
{
    return cfg.stage_dir("features") / ("features_" + lower(to_string(ch)) + ".csv");
}

std::vector<FeatureVector> load_features(const PipelineConfig& cfg, Channel ch)
{
    auto path = features_path(cfg, ch);
    require(path, "features");
    auto rows = read_features_csv(path);
    for (auto& r : rows)
        r.channel = ch;
    return rows;
}

struct SplitRow {
    std::string subject_id;
    Label label;
    bool train;
};

std::vector<SplitRow> read_split(const PipelineConfig& cfg)
{
    auto path = cfg.stage_dir("select") / "split.csv";
    require(path, "select");
    std::vector<SplitRow> out;
    for (const auto& row : csv::read_rows(path)) {
        if (row.size() < 3 || row[0] == "subject_id")
            continue;
        out.push_back({row[0], parse_label(row[1]), row[2] == "train"});
    }
    return out;
}

std::set<std::string> subjects_in(std::span<const SplitRow> split, bool train)
{
    std::set<std::string> out;
    for (const auto& s : split)
        if (s.train == train)
            out.insert(s.subject_id);
    return out;
}

std::vector<FeatureVector> rows_of(std::span<const FeatureVector> rows, const std::set<std::string>& subjects)
{
    std::vector<FeatureVector> out;
    for (const auto& r : rows)
        if (subjects.count(r.subject_id))
            out.push_back(r);
    return out;
}

void write_norm_csv(const std::vector<std::pair<Channel, ZNormParams>>& params, const fs::path& path,
                    const std::string& comment)
{
    csv::Writer out(path, comment);
    out.row({"channel", "feature", "mean", "std", "constant"});
    for (const auto& [ch, p] : params)
        for (std::size_t f = 0; f < kFeatureCount; ++f)
            out.row({std::string(to_string(ch)), std::string(feature_names()[f]), csv::format(p.mean[f]),
                     csv::format(p.std[f]), p.constant[f] ? "1" : "0"});
}

std::map<Channel, ZNormParams> read_norm_csv(const fs::path& path)
{
    std::map<Channel, ZNormParams> out;
    for (const auto& row : csv::read_rows(path)) {
        if (row.size() < 5 || row[0] == "channel")
            continue;
        auto& p = out[parse_channel(row[0])];
        auto f = static_cast<std::size_t>(feature_from_name(row[1]));
        p.mean[f] = csv::parse_double(row[2]);
        p.std[f] = csv::parse_double(row[3]);
        p.constant[f] = row[4] == "1";
    }
    return out;
}

std::string metric_channel(ChannelMode mode)
{
    return mode == ChannelMode::Both ? "both" : std::string(to_string(channels_of(mode).front()));
}

// Read, and per channel transform, every subject of a manifest into a new
// multi-signal EDF under `dir`; returns the new manifest rows.
template <typename Transform>
std::vector<ManifestEntry> map_recordings(const PipelineConfig& cfg, const std::vector<ManifestEntry>& entries,
                                          const fs::path& dir, Transform transform)
{
    std::vector<ManifestEntry> out(entries.size());
    parallel_for(entries.size(), cfg.jobs, [&](std::size_t i) {
        const auto& e = entries[i];
        std::vector<Recording> recs;
        for (Channel ch : channels_of(cfg.channel)) {
            auto rec = read_edf(e.edf_path, ch);
            rec.subject_id = e.subject_id;
            recs.push_back(transform(rec));
        }
        auto entry = e;
        entry.edf_path = e.subject_id + ".edf";
        entry.hypnogram_path = fs::absolute(e.hypnogram_path);
        write_edf(recs, dir / entry.edf_path);
        out[i] = std::move(entry);
    });
    write_manifest(out, dir / "manifest.csv");
    return out;
}

std::uint64_t fnv1a(std::string_view text)
{
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

} // namespace

std::string_view to_string(ChannelMode mode)
{
    switch (mode) {
    case ChannelMode::Fp2:
        return "fp2";
    case ChannelMode::C4:
        return "c4";
    case ChannelMode::Both:
        return "both";
    }
    return "?";
}

ChannelMode parse_channel_mode(std::string_view text)
{
    auto t = lower(text);
    if (t == "fp2")
        return ChannelMode::Fp2;
    if (t == "c4")
        return ChannelMode::C4;
    if (t == "both")
        return ChannelMode::Both;
    throw Error(ErrorCode::ConfigError, "channel must be fp2, c4 or both, got '" + std::string(text) + "'");
}

std::vector<Channel> channels_of(ChannelMode mode)
{
    switch (mode) {
    case ChannelMode::Fp2:
        return {Channel::Fp2};
    case ChannelMode::C4:
        return {Channel::C4};
    case ChannelMode::Both:
        break;
    }
    return {Channel::Fp2, Channel::C4};
}

void PipelineConfig::validate() const
{
    if (!(target_fs > 0.0) || std::abs(target_fs - std::round(target_fs)) > 1e-9)
        throw Error(ErrorCode::ConfigError, "target rate must be a positive integer number of Hz");
    if (!(filter.hp_cutoff > 0.0 && filter.hp_cutoff < filter.lp_cutoff && filter.lp_cutoff < target_fs / 2.0) ||
        filter.order < 1)
        throw Error(ErrorCode::ConfigError, "filter needs 0 < hp < lp < fs/2 and order >= 1");
    if (!(extract.epoch_len > 0.0) || !(extract.overlap >= 0.0 && extract.overlap < 1.0))
        throw Error(ErrorCode::ConfigError, "epoch length must be positive and overlap in [0, 1)");
    if (!(extract.clip_uv > 0.0))
        throw Error(ErrorCode::ConfigError, "clip threshold must be positive");
    selection.validate();
    effective_train_config().validate();
    if (jobs < 1)
        throw Error(ErrorCode::ConfigError, "jobs must be at least 1");
    if (n_healthy < 1 || n_insomnia < 1)
        throw Error(ErrorCode::ConfigError, "synthetic cohort needs at least one subject per class");
    if (!(cohort.duration >= 60.0) || !(cohort.fs > 0.0))
        throw Error(ErrorCode::ConfigError, "synthetic duration must be >= 60 s with a positive rate");
    for (const auto& p : cohort.profiles)
        p.validate();
}

double PipelineConfig::effective_learning_rate() const
{
    if (learning_rate)
        return *learning_rate;
    return channel == ChannelMode::C4 ? 2e-4 : 3e-4;
}

TrainConfig PipelineConfig::effective_train_config() const
{
    auto t = train;
    t.learning_rate = effective_learning_rate();
    t.seed = seed;
    return t;
}

std::string PipelineConfig::hash() const
{
    std::string s;
    auto add = [&](std::string_view key, const std::string& value) {
        s += key;
        s += '=';
        s += value;
        s += ';';
    };
    auto num = [](double v) { return csv::format(v); };
    add("channel", std::string(to_string(channel)));
    add("target_fs", num(target_fs));
    add("hp", num(filter.hp_cutoff));
    add("lp", num(filter.lp_cutoff));
    add("order", std::to_string(filter.order));
    add("zero_phase", std::to_string(filter.zero_phase));
    add("epoch_len", num(extract.epoch_len));
    add("overlap", num(extract.overlap));
    add("clip_uv", num(extract.clip_uv));
    for (const Band* b : {&extract.bands.delta, &extract.bands.theta, &extract.bands.alpha, &extract.bands.sigma,
                          &extract.bands.beta, &extract.bands.gamma, &extract.bands.slow_wave, &extract.bands.total})
        add("band", num(b->lo) + "-" + num(b->hi));
    add("slow_wave_gate", std::to_string(extract.slow_wave_gate));
    add("slow_wave_min_uv", num(extract.slow_wave_min_uv));
    add("alpha_top", num(selection.alpha_top));
    add("p_optimal", num(selection.p_optimal));
    add("r_top", num(selection.r_top));
    add("r_optimal", num(selection.r_optimal));
    add("fixed_set", std::to_string(selection.use_fixed_set));
    add("per_subject_means", std::to_string(per_subject_means));
    const auto t = effective_train_config();
    add("lr", num(t.learning_rate));
    add("weight_decay", num(t.weight_decay));
    add("batch", std::to_string(t.batch_size));
    add("max_epochs", std::to_string(t.max_epochs));
    add("patience", std::to_string(t.early_stop_patience));
    add("split", num(t.split));
    add("epoch_split", std::to_string(t.epoch_split));
    add("seed", std::to_string(seed));
    add("n_healthy", std::to_string(n_healthy));
    add("n_insomnia", std::to_string(n_insomnia));
    add("duration", num(cohort.duration));
    add("synth_fs", num(cohort.fs));
    add("jitter", num(cohort.amplitude_jitter));
    add("se_spread", num(cohort.healthy_se_spread) + "/" + num(cohort.insomnia_se_spread));
    for (const auto& p : cohort.profiles) {
        for (double a : p.band_amplitudes)
            s += num(a) + ",";
        add("profile", num(p.slow_wave_fraction) + "," + num(p.sleep_efficiency_target) + "," + num(p.noise_sigma));
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a(s)));
    return buf;
}

std::string PipelineConfig::comment() const
{
    return std::string("insomnet ") + kVersion + " config=" + hash() + " seed=" + std::to_string(seed);
}

void parallel_for(std::size_t n, unsigned jobs, const std::function<void(std::size_t)>& work)
{
    std::vector<std::exception_ptr> errors(n);
    const unsigned workers = static_cast<unsigned>(std::min<std::size_t>(std::max(1u, jobs), n));
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i)
            work(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> threads;
    for (unsigned w = 0; w < workers; ++w)
        threads.emplace_back([&] {
            for (std::size_t i = next++; i < n; i = next++) {
                try {
                    work(i);
                } catch (...) {
                    errors[i] = std::current_exception();
                }
            }
        });
    for (auto& t : threads)
        t.join();
    for (auto& e : errors)
        if (e)
            std::rethrow_exception(e);
}

std::vector<ManifestEntry> cmd_synth(const PipelineConfig& cfg)
{
    cfg.validate();
    return generate_cohort(cfg.n_healthy, cfg.n_insomnia, cfg.seed, cfg.stage_dir("synth"), cfg.cohort);
}

void cmd_ingest(const PipelineConfig& cfg)
{
    cfg.validate();
    auto entries = read_manifest(input_manifest(cfg));
    auto dir = make_dir(cfg.stage_dir("ingest"));
    map_recordings(cfg, entries, dir, [&](const Recording& rec) { return resample(rec, cfg.target_fs); });
}

void cmd_preprocess(const PipelineConfig& cfg)
{
    cfg.validate();
    auto manifest = cfg.stage_dir("ingest") / "manifest.csv";
    require(manifest, "ingest");
    auto entries = read_manifest(manifest);
    auto dir = make_dir(cfg.stage_dir("preprocess"));
    auto out = map_recordings(cfg, entries, dir, [&](const Recording& rec) { return filter_signal(rec, cfg.filter); });

    // Audit trail of the epoch grid and what the clipper removed.
    csv::Writer audit(dir / "epochs.csv", cfg.comment());
    audit.row({"subject_id", "channel", "epoch_index", "offset_s", "max_abs_uv", "rejected"});
    for (const auto& e : out)
        for (Channel ch : channels_of(cfg.channel)) {
            auto rec = read_edf(dir / e.edf_path, ch);
            rec.subject_id = e.subject_id;
            for (const auto& ep : prepare_epochs(rec, cfg.extract)) {
                double peak = 0.0;
                if (ep.rejected)
                    for (double v : ep.samples)
                        peak = std::max(peak, std::abs(v));
                audit.row({e.subject_id, std::string(to_string(ch)), std::to_string(ep.index), csv::format(ep.offset),
                           ep.rejected ? csv::format(peak) : "", ep.rejected ? "1" : "0"});
            }
        }
}

void cmd_features(const PipelineConfig& cfg)
{
    cfg.validate();
    auto manifest = cfg.stage_dir("preprocess") / "manifest.csv";
    require(manifest, "preprocess");
    auto entries = read_manifest(manifest);
    make_dir(cfg.stage_dir("features"));
    for (Channel ch : channels_of(cfg.channel)) {
        std::vector<std::vector<FeatureVector>> per_subject(entries.size());
        parallel_for(entries.size(), cfg.jobs, [&](std::size_t i) {
            const auto& e = entries[i];
            auto rec = read_edf(e.edf_path, ch);
            rec.subject_id = e.subject_id;
            auto hyp = read_hypnogram(e.hypnogram_path);
            hyp.subject_id = e.subject_id;
            per_subject[i] = extract_all(rec, hyp, cfg.extract, e.label);
            for (auto& v : per_subject[i])
                v.channel = ch;
        });
        std::vector<FeatureVector> all;
        for (auto& v : per_subject)
            all.insert(all.end(), v.begin(), v.end());
        write_features_csv(all, features_path(cfg, ch), cfg.comment());
    }
}

void cmd_select(const PipelineConfig& cfg)
{
    cfg.validate();
    std::vector<std::vector<FeatureVector>> per_channel;
    for (Channel ch : channels_of(cfg.channel))
        per_channel.push_back(load_features(cfg, ch));

    std::vector<std::string> subjects;
    std::vector<int> labels;
    std::set<std::string> seen;
    for (const auto& v : per_channel.front()) {
        if (!v.label)
            throw Error(ErrorCode::InsufficientData, "feature row of " + v.subject_id + " has no class label");
        if (seen.insert(v.subject_id).second) {
            subjects.push_back(v.subject_id);
            labels.push_back(*v.label == Label::Insomnia ? 1 : 0);
        }
    }
    const auto t = cfg.effective_train_config();
    const auto split = split_subjects(subjects, labels, t.split, t.seed);
    auto dir = make_dir(cfg.stage_dir("select"));
    {
        std::vector<bool> is_train(subjects.size(), false);
        for (auto i : split.train)
            is_train[i] = true;
        csv::Writer out(dir / "split.csv", cfg.comment());
        out.row({"subject_id", "class", "set"});
        for (std::size_t i = 0; i < subjects.size(); ++i)
            out.row({subjects[i], labels[i] ? "insomnia" : "healthy", is_train[i] ? "train" : "test"});
    }

    std::set<std::string> train_subjects;
    for (auto i : split.train)
        train_subjects.insert(subjects[i]);

    std::vector<FeatureStats> report;
    std::set<std::string> chosen;
    const auto channels = channels_of(cfg.channel);
    for (std::size_t c = 0; c < channels.size(); ++c) {
        auto rows = rows_of(per_channel[c], train_subjects);
        if (cfg.per_subject_means)
            rows = subject_means(rows);
        auto stats = compute_stats(rows);
        auto names = apply_rules(stats, cfg.selection);
        chosen.insert(names.begin(), names.end());
        for (auto s : stats) {
            if (channels.size() > 1)
                s.feature_name = std::string(to_string(channels[c])) + ":" + s.feature_name;
            report.push_back(std::move(s));
        }
    }
    std::vector<std::string> selected;
    for (auto name : feature_names())
        if (chosen.count(std::string(name)))
            selected.emplace_back(name);
    if (cfg.selection.use_fixed_set)
        selected = fixed_feature_set();
    write_feature_stats_csv(report, dir / "feature_stats.csv", cfg.comment());
    write_selected(selected, dir / "selected.txt");
}

std::vector<DesignRow> design_matrix(const std::vector<std::vector<FeatureVector>>& per_channel,
                                     std::span<const std::string> selected)
{
    if (per_channel.empty())
        throw Error(ErrorCode::ShapeError, "no channels given");
    std::vector<std::size_t> columns;
    for (const auto& name : selected)
        columns.push_back(static_cast<std::size_t>(feature_from_name(name)));

    std::vector<std::map<std::pair<std::string, std::size_t>, const FeatureVector*>> index(per_channel.size());
    for (std::size_t c = 1; c < per_channel.size(); ++c)
        for (const auto& v : per_channel[c])
            index[c][{v.subject_id, v.epoch_index}] = &v;

    std::vector<DesignRow> rows;
    for (const auto& v : per_channel.front()) {
        std::vector<const FeatureVector*> parts{&v};
        for (std::size_t c = 1; c < per_channel.size(); ++c) {
            auto it = index[c].find({v.subject_id, v.epoch_index});
            if (it == index[c].end())
                break;
            parts.push_back(it->second);
        }
        if (parts.size() != per_channel.size())
            continue;
        if (!v.label)
            throw Error(ErrorCode::InsufficientData, "feature row of " + v.subject_id + " has no class label");
        DesignRow row{v.subject_id, v.epoch_index, *v.label == Label::Insomnia ? 1 : 0, {}};
        row.x.reserve(columns.size() * parts.size());
        for (const auto* p : parts)
            for (auto col : columns)
                row.x.push_back(p->values[col]);
        rows.push_back(std::move(row));
    }
    return rows;
}

void cmd_train(const PipelineConfig& cfg)
{
    cfg.validate();
    auto selected_path = cfg.stage_dir("select") / "selected.txt";
    require(selected_path, "select");
    auto split = read_split(cfg);
    auto selected = read_selected(selected_path);
    auto train_subjects = subjects_in(split, true);

    const auto channels = channels_of(cfg.channel);
    if (selected.size() != kFeaturesPerChannel)
        throw Error(ErrorCode::ConfigError, "the classifier takes exactly " + std::to_string(kFeaturesPerChannel) +
                                                " features per channel, selection produced " +
                                                std::to_string(selected.size()));

    std::vector<std::vector<FeatureVector>> normalized;
    std::vector<std::pair<Channel, ZNormParams>> params;
    for (Channel ch : channels) {
        auto rows = rows_of(load_features(cfg, ch), train_subjects);
        auto p = fit_znorm(rows);
        for (auto& r : rows)
            r = p.apply(std::move(r));
        normalized.push_back(std::move(rows));
        params.emplace_back(ch, p);
    }
    std::vector<Example> examples;
    for (auto& r : design_matrix(normalized, selected))
        examples.push_back({std::move(r.x), r.label, r.subject_id});

    auto result = train(examples, cfg.effective_train_config());
    auto dir = make_dir(cfg.stage_dir("train"));
    save_model(result.model, dir / "model.bin");
    write_norm_csv(params, dir / "norm.csv", cfg.comment());
    write_history_csv(result.history, dir / "history.csv", cfg.comment());
}

void cmd_eval(const PipelineConfig& cfg)
{
    cfg.validate();
    auto model_path = cfg.stage_dir("train") / "model.bin";
    auto norm_path = cfg.stage_dir("train") / "norm.csv";
    require(model_path, "train");
    require(norm_path, "train");
    auto split = read_split(cfg);
    auto selected = read_selected(cfg.stage_dir("select") / "selected.txt");
    const auto channels = channels_of(cfg.channel);
    auto model = load_model(model_path, selected.size() * channels.size());
    auto params = read_norm_csv(norm_path);
    auto test_subjects = subjects_in(split, false);

    std::vector<std::vector<FeatureVector>> normalized;
    for (Channel ch : channels) {
        auto it = params.find(ch);
        if (it == params.end())
            throw Error(ErrorCode::IncompatibleModel, "no normalization for channel " + std::string(to_string(ch)));
        auto rows = rows_of(load_features(cfg, ch), test_subjects);
        for (auto& r : rows)
            r = it->second.apply(std::move(r));
        normalized.push_back(std::move(rows));
    }
    auto rows = design_matrix(normalized, selected);

    auto dir = make_dir(cfg.stage_dir("eval"));
    std::vector<int> truth, predicted;
    std::map<std::string, std::vector<std::array<double, 2>>> by_subject;
    {
        csv::Writer out(dir / "predictions_epoch.csv", cfg.comment());
        out.row({"subject_id", "epoch_index", "class", "p_insomnia", "predicted"});
        for (const auto& r : rows) {
            auto p = model.forward(r.x);
            const int pred = p[1] > p[0] ? 1 : 0;
            truth.push_back(r.label);
            predicted.push_back(pred);
            by_subject[r.subject_id].push_back(p);
            out.row({r.subject_id, std::to_string(r.epoch_index), r.label ? "insomnia" : "healthy", csv::format(p[1]),
                     pred ? "insomnia" : "healthy"});
        }
    }

    std::vector<int> subject_truth, subject_pred;
    {
        csv::Writer out(dir / "predictions_subject.csv", cfg.comment());
        out.row({"subject_id", "class", "insomnia_score", "predicted", "epochs"});
        for (const auto& s : split) {
            if (s.train)
                continue;
            auto it = by_subject.find(s.subject_id);
            if (it == by_subject.end())
                throw Error(ErrorCode::NoData, "test subject " + s.subject_id + " has no kept epochs");
            auto pred = aggregate_probabilities(it->second);
            subject_truth.push_back(s.label == Label::Insomnia);
            subject_pred.push_back(pred.label == Label::Insomnia);
            out.row({s.subject_id, std::string(to_string(s.label)), csv::format(pred.insomnia_score),
                     std::string(to_string(pred.label)), std::to_string(it->second.size())});
        }
    }

    const auto channel = metric_channel(cfg.channel);
    std::vector<MetricsEntry> metrics;
    for (auto [level, t, p] : {std::tuple{"epoch", &truth, &predicted}, std::tuple{"subject", &subject_truth, &subject_pred}}) {
        auto cm = confusion(*t, *p);
        metrics.push_back({level, channel, cm, all_metrics(cm)});
    }
    write_metrics_csv(metrics, dir / "metrics.csv", cfg.comment());
}

std::vector<SleepSummary> sleep_statistics(std::span<const Hypnogram> hypnograms, std::span<const Label> labels)
{
    if (hypnograms.size() != labels.size())
        throw Error(ErrorCode::ShapeError, "hypnogram and label counts differ");
    static constexpr std::array<const char*, 8> params = {"SE", "TST", "W", "S1", "S2", "S3", "S4", "REM"};
    std::vector<SleepSummary> out;
    for (Label label : {Label::Healthy, Label::Insomnia}) {
        std::array<std::vector<double>, 8> values;
        for (std::size_t i = 0; i < hypnograms.size(); ++i) {
            if (labels[i] != label)
                continue;
            const auto& h = hypnograms[i];
            if (h.stages.empty())
                throw Error(ErrorCode::InsufficientData, "empty hypnogram for " + h.subject_id);
            auto sf = sleep_features(h);
            values[0].push_back(sf.sleep_efficiency);
            values[1].push_back(sf.total_sleep_time);
            std::array<double, 6> stage_seconds{};
            for (Stage s : h.stages)
                stage_seconds[static_cast<std::size_t>(s)] += h.epoch_seconds;
            for (std::size_t s = 0; s < 6; ++s)
                values[2 + s].push_back(stage_seconds[s]);
        }
        if (values[0].empty())
            throw Error(ErrorCode::InsufficientData, "no hypnogram for class " + std::string(to_string(label)));
        for (std::size_t k = 0; k < params.size(); ++k) {
            const auto& v = values[k];
            SleepSummary row{label, params[k], v.size(), 0.0, 0.0, v.front(), v.front()};
            for (double x : v) {
                row.mean += x;
                row.min = std::min(row.min, x);
                row.max = std::max(row.max, x);
            }
            row.mean /= static_cast<double>(v.size());
            double ss = 0.0;
            for (double x : v)
                ss += (x - row.mean) * (x - row.mean);
            row.std = std::sqrt(ss / static_cast<double>(v.size()));
            out.push_back(std::move(row));
        }
    }
    return out;
}

void write_sleep_stats_csv(std::span<const SleepSummary> rows, const fs::path& path, const std::string& comment)
{
    csv::Writer out(path, comment);
    out.row({"class", "parameter", "n", "mean", "std", "min", "max"});
    for (const auto& r : rows)
        out.row({std::string(to_string(r.label)), r.parameter, std::to_string(r.n), csv::format(r.mean),
                 csv::format(r.std), csv::format(r.min), csv::format(r.max)});
}

void write_metrics_csv(std::span<const MetricsEntry> rows, const fs::path& path, const std::string& comment)
{
    csv::Writer out(path, comment);
    // table layout first, raw counts appended
    out.row({"level", "channel", "accuracy", "precision", "recall", "f1", "kappa", "tp", "tn", "fp", "fn"});
    for (const auto& r : rows)
        out.row({r.level, r.channel, format_metric(r.metrics.accuracy), format_metric(r.metrics.precision),
                 format_metric(r.metrics.recall), format_metric(r.metrics.f1), format_metric(r.metrics.kappa),
                 std::to_string(r.cm.tp), std::to_string(r.cm.tn), std::to_string(r.cm.fp), std::to_string(r.cm.fn)});
}

std::vector<MetricsEntry> read_metrics_csv(const fs::path& path)
{
    auto metric = [](const std::string& s) -> std::optional<double> {
        if (s == "undefined")
            return std::nullopt;
        return csv::parse_double(s);
    };
    auto count = [](const std::string& s) {
        std::uint64_t v = 0;
        auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
        if (ec != std::errc{} || end != s.data() + s.size())
            throw Error(ErrorCode::ParseError, "bad count '" + s + "'");
        return v;
    };
    std::vector<MetricsEntry> out;
    for (const auto& row : csv::read_rows(path)) {
        if (row.size() < 11 || row[0] == "level")
            continue;
        MetricsEntry e;
        e.level = row[0];
        e.channel = row[1];
        e.metrics = {metric(row[2]), metric(row[3]), metric(row[4]), metric(row[5]), metric(row[6])};
        e.cm = {count(row[7]), count(row[8]), count(row[9]), count(row[10])};
        out.push_back(std::move(e));
    }
    return out;
}

namespace {

void sleepstats_from(const PipelineConfig& cfg, const fs::path& manifest)
{
    auto entries = read_manifest(manifest);
    std::vector<Hypnogram> hyps;
    std::vector<Label> labels;
    for (const auto& e : entries) {
        hyps.push_back(read_hypnogram(e.hypnogram_path));
        hyps.back().subject_id = e.subject_id;
        labels.push_back(e.label);
    }
    auto dir = make_dir(cfg.stage_dir("report"));
    write_sleep_stats_csv(sleep_statistics(hyps, labels), dir / "sleep_stats.csv", cfg.comment());
}

} // namespace

void cmd_sleepstats(const PipelineConfig& cfg)
{
    cfg.validate();
    sleepstats_from(cfg, input_manifest(cfg));
}

void cmd_report(const PipelineConfig& cfg)
{
    cfg.validate();
    const std::array<std::pair<fs::path, const char*>, 3> inputs = {{
        {cfg.stage_dir("eval") / "metrics.csv", "eval"},
        {cfg.stage_dir("train") / "history.csv", "train"},
        {cfg.stage_dir("select") / "feature_stats.csv", "select"},
    }};
    auto manifest = cfg.stage_dir("ingest") / "manifest.csv";
    require(manifest, "ingest");
    for (const auto& [path, stage] : inputs)
        require(path, stage);
    auto dir = make_dir(cfg.stage_dir("report"));
    for (const auto& [path, stage] : inputs)
        fs::copy_file(path, dir / path.filename(), fs::copy_options::overwrite_existing);
    sleepstats_from(cfg, manifest);
}

void cmd_run(const PipelineConfig& cfg)
{
    if (cfg.manifest.empty())
        cmd_synth(cfg);
    cmd_ingest(cfg);
    cmd_preprocess(cfg);
    cmd_features(cfg);
    cmd_select(cfg);
    cmd_train(cfg);
    cmd_eval(cfg);
    cmd_report(cfg);
}

} // namespace insomnet

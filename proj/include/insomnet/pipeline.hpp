#pragma once

#include "insomnet/features.hpp"
#include "insomnet/metrics.hpp"
#include "insomnet/model.hpp"
#include "insomnet/select.hpp"
#include "insomnet/synth.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace insomnet {

inline constexpr const char* kVersion = "0.1.0";

enum class ChannelMode { Fp2, C4, Both };

std::string_view to_string(ChannelMode mode);
/// Accepts fp2, c4, both (any case).
ChannelMode parse_channel_mode(std::string_view text);
std::vector<Channel> channels_of(ChannelMode mode);

struct PipelineConfig {
    /// Input manifest for ingest; defaults to <out>/synth/manifest.csv.
    std::filesystem::path manifest;
    std::filesystem::path out = "out";
    ChannelMode channel = ChannelMode::Fp2;
    double target_fs = 128.0;
    FilterSpec filter;
    ExtractConfig extract;
    /// The fixed 20-name set is the default: the classifier input width is
    /// tied to it.
    SelectionConfig selection{0.05, 0.70, 0.5, 0.3, true};
    bool per_subject_means = false;
    TrainConfig train;
    /// Per-channel default (3e-4 for Fp2 and both, 2e-4 for C4) when unset.
    std::optional<double> learning_rate;
    std::uint64_t seed = 42;
    unsigned jobs = 1;

    // synthetic cohort
    std::size_t n_healthy = 10;
    std::size_t n_insomnia = 10;
    CohortOptions cohort;

    void validate() const;
    /// FNV-1a over every setting that changes results (paths and job count
    /// excluded), as 16 hex digits.
    std::string hash() const;
    /// First line of every CSV the pipeline writes.
    std::string comment() const;
    double effective_learning_rate() const;
    TrainConfig effective_train_config() const;
    std::filesystem::path stage_dir(std::string_view stage) const { return out / stage; }
};

// Each stage reads the previous stage's files under <out> and writes its
// own; a missing input raises StageOrderError.
std::vector<ManifestEntry> cmd_synth(const PipelineConfig& config);
void cmd_ingest(const PipelineConfig& config);
void cmd_preprocess(const PipelineConfig& config);
void cmd_features(const PipelineConfig& config);
void cmd_select(const PipelineConfig& config);
void cmd_train(const PipelineConfig& config);
void cmd_eval(const PipelineConfig& config);
void cmd_report(const PipelineConfig& config);
/// Writes <out>/report/sleep_stats.csv from a manifest's hypnograms.
void cmd_sleepstats(const PipelineConfig& config);
/// ingest through report; synth first when no manifest is configured.
void cmd_run(const PipelineConfig& config);

struct SleepSummary {
    Label label = Label::Healthy;
    std::string parameter; // SE, TST, W, S1, S2, S3, S4, REM
    std::size_t n = 0;
    double mean = 0.0, std = 0.0, min = 0.0, max = 0.0;
};

/// Per-class mean / population std / min / max of SE (%), TST (s) and the
/// seconds spent in each stage. Each class needs at least one hypnogram.
std::vector<SleepSummary> sleep_statistics(std::span<const Hypnogram> hypnograms, std::span<const Label> labels);
void write_sleep_stats_csv(std::span<const SleepSummary> rows, const std::filesystem::path& path,
                           const std::string& comment = {});

/// Joins per-channel selected columns into classifier inputs. Rows are
/// matched on (subject, epoch index); rows missing from any channel drop.
struct DesignRow {
    std::string subject_id;
    std::size_t epoch_index = 0;
    int label = 0;
    std::vector<double> x;
};
std::vector<DesignRow> design_matrix(const std::vector<std::vector<FeatureVector>>& per_channel,
                                     std::span<const std::string> selected);

struct MetricsEntry {
    std::string level; // epoch or subject
    std::string channel;
    ConfusionMatrix cm;
    MetricRow metrics;
};
void write_metrics_csv(std::span<const MetricsEntry> rows, const std::filesystem::path& path,
                       const std::string& comment = {});
std::vector<MetricsEntry> read_metrics_csv(const std::filesystem::path& path);

/// Runs `work(i)` for i in [0, n) on up to `jobs` threads. The first
/// exception (by index) is rethrown after all workers finish.
void parallel_for(std::size_t n, unsigned jobs, const std::function<void(std::size_t)>& work);

} // namespace insomnet

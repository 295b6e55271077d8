#pragma once

#include "insomnet/preprocess.hpp"

#include <array>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace insomnet {

inline constexpr std::size_t kFeatureCount = 31;

/// Canonical feature order; also the CSV column order.
enum class Feature : std::size_t {
    Mean,
    Std,
    Zcr,
    HjorthActivity,
    HjorthMobility,
    HjorthComplexity,
    TotalPower,
    SlowWavePower,
    RelDelta,
    RelTheta,
    RelAlpha,
    RelSigma,
    RelBeta,
    RelGamma,
    AbsDelta,
    AbsTheta,
    AbsAlpha,
    AbsBeta,
    AbsGamma,
    RatioDeltaTheta,
    RatioDeltaAlpha,
    RatioDeltaGamma,
    RatioDeltaBeta,
    RatioThetaAlpha,
    RatioThetaGamma,
    RatioThetaBeta,
    RatioAlphaGamma,
    RatioAlphaBeta,
    RatioGammaBeta,
    SleepEfficiency,
    TotalSleepTime,
};

const std::array<std::string_view, kFeatureCount>& feature_names();
std::string_view feature_name(Feature feature);
/// Throws ParseError for an unknown name.
Feature feature_from_name(std::string_view name);

struct Band {
    double lo = 0.0;
    double hi = 0.0;
};

struct BandSet {
    Band delta{0.5, 4.0};
    Band theta{4.0, 8.0};
    Band alpha{8.0, 13.0};
    Band sigma{12.0, 16.0};
    Band beta{13.0, 30.0};
    Band gamma{30.0, 45.0};
    Band slow_wave{0.5, 2.0};
    Band total{0.5, 45.0};
};

struct FeatureVector {
    std::string subject_id;
    Channel channel = Channel::Fp2;
    std::size_t epoch_index = 0;
    std::optional<Label> label;
    std::array<double, kFeatureCount> values{};

    double operator[](Feature f) const { return values[static_cast<std::size_t>(f)]; }
    double& operator[](Feature f) { return values[static_cast<std::size_t>(f)]; }
};

enum class Stage { W, S1, S2, S3, S4, REM };

std::string_view to_string(Stage stage);
Stage parse_stage(std::string_view text);

struct Hypnogram {
    std::string subject_id;
    double epoch_seconds = 30.0;
    std::vector<Stage> stages;
};

Hypnogram read_hypnogram(const std::filesystem::path& path);
void write_hypnogram(const Hypnogram& hypnogram, const std::filesystem::path& path);

struct TemporalFeatures {
    double mean = 0.0;
    double std = 0.0;
    double zcr = 0.0; // crossings per second
    double activity = 0.0;
    double mobility = 0.0;
    double complexity = 0.0;
};

TemporalFeatures temporal_features(std::span<const double> samples, double fs);

/// One-sided power spectral density (uV^2/Hz) on a uniform grid k * df.
struct Spectrum {
    double df = 0.0;
    std::vector<double> power;

    double frequency(std::size_t k) const { return static_cast<double>(k) * df; }
    /// Trapezoidal integral of the density over [lo, hi].
    double band_power(double lo, double hi) const;
};

/// Welch estimate: 4 s symmetric-Hann segments, 50 % overlap, per-segment
/// mean removal, averaged periodograms.
Spectrum psd(std::span<const double> samples, double fs, double segment_seconds = 4.0);

inline constexpr double kRatioFloor = 1e-12;

/// The 23 spectral values in canonical order (TOTAL_POWER .. RATIO_GAMMA_BETA).
std::array<double, 23> spectral_features(const Spectrum& spectrum, const BandSet& bands = {});

struct SleepFeatures {
    double total_sleep_time = 0.0; // seconds
    double sleep_efficiency = 0.0; // percent
};

SleepFeatures sleep_features(const Hypnogram& hypnogram);

struct ExtractConfig {
    double epoch_len = 30.0;
    double overlap = 0.5;
    double clip_uv = 260.0;
    BandSet bands;
    /// When set, slow-wave power counts only if the 0.5-2 Hz filtered epoch
    /// has a peak-to-peak amplitude above slow_wave_min_uv.
    bool slow_wave_gate = false;
    double slow_wave_min_uv = 75.0;
};

/// True when the slow-wave band component of the epoch exceeds the
/// peak-to-peak criterion.
bool passes_slow_wave_gate(std::span<const double> samples, double fs, const ExtractConfig& config);

/// Segments, flags and normalizes. Rejected epochs stay in the list with
/// their raw samples.
std::vector<Epoch> prepare_epochs(const Recording& filtered, const ExtractConfig& config);

/// Features of one kept, normalized epoch with the recording-level sleep
/// features broadcast in.
FeatureVector epoch_features(const Epoch& epoch, const SleepFeatures& sleep, const ExtractConfig& config);

/// One FeatureVector per kept epoch of a filtered recording.
std::vector<FeatureVector> extract_all(const Recording& filtered, const Hypnogram& hypnogram,
                                       const ExtractConfig& config = {},
                                       std::optional<Label> label = std::nullopt);

void write_features_csv(std::span<const FeatureVector> vectors, const std::filesystem::path& path,
                        const std::string& comment = {});
std::vector<FeatureVector> read_features_csv(const std::filesystem::path& path);

} // namespace insomnet

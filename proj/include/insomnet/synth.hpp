#pragma once

#include "insomnet/features.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

namespace insomnet {

/// Components summed by the generator; each has a frequency range from
/// which a fresh frequency is drawn for every 30 s stage block.
enum class SynthBand { SlowWave, Delta, Theta, Alpha, Sigma, Beta, Gamma };
inline constexpr std::size_t kSynthBands = 7;

std::string_view to_string(SynthBand band);

struct SubjectProfile {
    Label label = Label::Healthy;
    /// Base amplitude (uV) per SynthBand, before stage modulation.
    std::array<double, kSynthBands> band_amplitudes{};
    /// Share of sleep epochs spent in S3/S4.
    double slow_wave_fraction = 0.25;
    double sleep_efficiency_target = 90.0; // percent
    double noise_sigma = 3.0;              // uV
    std::uint64_t seed = 1;

    void validate() const;
};

/// Built-in defaults; config/profiles.toml ships the same tables.
SubjectProfile default_profile(Label label);

/// Overrides profile fields from a `[healthy]` / `[insomnia]` key = value
/// file (keys: slow_wave, delta, theta, alpha, sigma, beta, gamma,
/// slow_wave_fraction, sleep_efficiency, noise_sigma).
std::array<SubjectProfile, 2> load_profiles(const std::filesystem::path& path);

/// Stages drawn so the sleep efficiency matches the target to within one epoch.
Hypnogram generate_hypnogram(const SubjectProfile& profile, std::size_t epochs, std::uint64_t seed);

/// Sinusoid-per-band signal following the hypnogram, plus white noise.
Recording generate_signal(const SubjectProfile& profile, const Hypnogram& hypnogram, Channel channel, double fs,
                          std::uint64_t seed);

/// duration >= 60 s. Fully determined by profile.seed.
std::pair<Recording, Hypnogram> generate_subject(const SubjectProfile& profile, double duration, double fs,
                                                 Channel channel = Channel::Fp2);

struct CohortOptions {
    double duration = 3600.0; // seconds per subject
    double fs = 256.0;
    std::array<SubjectProfile, 2> profiles{default_profile(Label::Healthy), default_profile(Label::Insomnia)};
    /// Relative per-subject amplitude jitter and SE spread (percentage points).
    double amplitude_jitter = 0.15;
    double healthy_se_spread = 3.0;
    double insomnia_se_spread = 8.0;
};

struct ManifestEntry {
    std::string subject_id;
    Label label = Label::Healthy;
    std::filesystem::path edf_path;
    std::filesystem::path hypnogram_path;
    std::uint64_t seed = 0;
};

/// The per-subject profile used by generate_cohort for subject `index` of
/// class `label` (jittered copy of the class default).
SubjectProfile cohort_profile(const CohortOptions& options, Label label, std::uint64_t subject_seed);

/// Writes <dir>/<subject>.edf (Fp2 and C4 signals), <dir>/<subject>.hyp.csv
/// and <dir>/manifest.csv. Returns the manifest rows.
std::vector<ManifestEntry> generate_cohort(std::size_t n_healthy, std::size_t n_insomnia, std::uint64_t seed,
                                           const std::filesystem::path& dir, const CohortOptions& options = {});

/// Manifest CSV: subject_id,class,edf_path,hypnogram_path,seed. Relative
/// paths resolve against the manifest's directory.
std::vector<ManifestEntry> read_manifest(const std::filesystem::path& path);
void write_manifest(std::span<const ManifestEntry> entries, const std::filesystem::path& path);

} // namespace insomnet

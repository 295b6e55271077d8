#include "insomnet/synth.hpp"

#include "insomnet/csv.hpp"
#include "insomnet/error.hpp"
#include "insomnet/random.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>

namespace insomnet {

namespace {

constexpr std::array<Band, kSynthBands> kBandRanges = {{
    {0.5, 2.0},   // slow wave
    {2.0, 4.0},   // delta above the slow-wave range
    {4.0, 8.0},   // theta
    {8.0, 13.0},  // alpha
    {12.0, 16.0}, // sigma
    {16.0, 30.0}, // beta
    {30.0, 45.0}, // gamma
}};

// Amplitude multiplier per stage (rows: W, S1, S2, S3, S4, REM) and band.
constexpr std::array<std::array<double, kSynthBands>, 6> kStageGain = {{
    {0.3, 0.5, 0.8, 2.0, 0.6, 1.5, 1.5},
    {0.6, 0.8, 1.5, 0.8, 0.8, 1.0, 1.0},
    {1.0, 1.0, 1.0, 0.6, 1.6, 0.9, 0.9},
    {1.8, 1.5, 0.9, 0.5, 1.0, 0.7, 0.7},
    {2.2, 1.8, 0.8, 0.4, 0.8, 0.6, 0.6},
    {0.5, 0.7, 1.5, 0.9, 0.6, 1.2, 1.2},
}};

// Central-site montage: slightly weaker slow waves, stronger alpha/sigma.
constexpr std::array<double, kSynthBands> kC4Gain = {0.85, 0.9, 1.0, 1.25, 1.2, 1.0, 1.0};

constexpr double kRemShare = 0.2;
constexpr double kS1Share = 0.05;
constexpr double kBlockSeconds = 30.0;

std::string trim(std::string s)
{
    auto first = s.find_first_not_of(" \t\r");
    if (first == std::string::npos)
        return {};
    auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& field)
{
    std::filesystem::path p(field);
    return p.is_absolute() ? p : base / p;
}

} // namespace

std::string_view to_string(SynthBand band)
{
    static constexpr std::array<std::string_view, kSynthBands> names = {"slow_wave", "delta", "theta", "alpha",
                                                                        "sigma",     "beta",  "gamma"};
    return names[static_cast<std::size_t>(band)];
}

void SubjectProfile::validate() const
{
    for (double a : band_amplitudes)
        if (!(a >= 0.0))
            throw Error(ErrorCode::ConfigError, "band amplitudes must be non-negative");
    if (!(slow_wave_fraction >= 0.0 && slow_wave_fraction <= 1.0))
        throw Error(ErrorCode::ConfigError, "slow_wave_fraction must lie in [0, 1]");
    if (!(sleep_efficiency_target >= 0.0 && sleep_efficiency_target <= 100.0))
        throw Error(ErrorCode::ConfigError, "sleep efficiency target must lie in [0, 100]");
    if (!(noise_sigma >= 0.0))
        throw Error(ErrorCode::ConfigError, "noise sigma must be non-negative");
}

SubjectProfile default_profile(Label label)
{
    SubjectProfile p;
    p.label = label;
    if (label == Label::Healthy) {
        p.band_amplitudes = {40.0, 20.0, 12.0, 8.0, 6.0, 4.0, 2.0};
        p.slow_wave_fraction = 0.27;
        p.sleep_efficiency_target = 90.0;
    } else {
        p.band_amplitudes = {12.0, 14.0, 12.0, 10.0, 7.0, 10.0, 5.0};
        p.slow_wave_fraction = 0.15;
        p.sleep_efficiency_target = 65.0;
    }
    p.noise_sigma = 3.0;
    return p;
}

std::array<SubjectProfile, 2> load_profiles(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in)
        throw Error(ErrorCode::IoError, "cannot open " + path.string());
    std::array<SubjectProfile, 2> profiles{default_profile(Label::Healthy), default_profile(Label::Insomnia)};
    SubjectProfile* current = nullptr;
    std::string line;
    while (std::getline(in, line)) {
        line = trim(line.substr(0, line.find('#')));
        if (line.empty())
            continue;
        if (line.front() == '[') {
            auto name = trim(line.substr(1, line.find(']') - 1));
            if (name == "healthy")
                current = &profiles[0];
            else if (name == "insomnia")
                current = &profiles[1];
            else
                throw Error(ErrorCode::ConfigError, "unknown profile section [" + name + "]");
            continue;
        }
        auto eq = line.find('=');
        if (eq == std::string::npos || !current)
            throw Error(ErrorCode::ConfigError, "bad profile line '" + line + "'");
        auto key = trim(line.substr(0, eq));
        auto value = csv::parse_double(trim(line.substr(eq + 1)));
        bool matched = false;
        for (std::size_t b = 0; b < kSynthBands; ++b)
            if (key == to_string(static_cast<SynthBand>(b))) {
                current->band_amplitudes[b] = value;
                matched = true;
            }
        if (key == "slow_wave_fraction")
            current->slow_wave_fraction = value;
        else if (key == "sleep_efficiency")
            current->sleep_efficiency_target = value;
        else if (key == "noise_sigma")
            current->noise_sigma = value;
        else if (!matched)
            throw Error(ErrorCode::ConfigError, "unknown profile key '" + key + "'");
    }
    for (const auto& p : profiles)
        p.validate();
    return profiles;
}

Hypnogram generate_hypnogram(const SubjectProfile& profile, std::size_t epochs, std::uint64_t seed)
{
    profile.validate();
    Rng rng(seed);
    Hypnogram h;
    h.epoch_seconds = kBlockSeconds;
    h.stages.assign(epochs, Stage::S2);
    if (epochs == 0)
        return h;

    const auto n = static_cast<double>(epochs);
    auto wake = static_cast<std::size_t>(std::llround(n * (1.0 - profile.sleep_efficiency_target / 100.0)));
    wake = std::min(wake, epochs);
    std::vector<bool> is_wake(epochs, false);

    // Sleep-onset latency takes part of the wake budget; the rest becomes
    // short awakenings scattered over the night.
    const auto latency = static_cast<std::size_t>(std::llround(0.4 * static_cast<double>(wake)));
    for (std::size_t i = 0; i < latency; ++i)
        is_wake[i] = true;
    std::size_t remaining = wake - latency;
    while (remaining > 0) {
        std::size_t start = static_cast<std::size_t>(rng.below(epochs));
        std::size_t run = 1 + static_cast<std::size_t>(rng.below(3));
        for (std::size_t i = start; i < epochs && run > 0 && remaining > 0; ++i, --run)
            if (!is_wake[i]) {
                is_wake[i] = true;
                --remaining;
            }
    }

    // Sleep stages with persistence: deep sleep concentrated early in the
    // night, REM later.
    Stage held = Stage::S2;
    std::size_t hold = 0;
    for (std::size_t i = 0; i < epochs; ++i) {
        if (is_wake[i]) {
            h.stages[i] = Stage::W;
            continue;
        }
        if (hold == 0) {
            const double pos = (static_cast<double>(i) + 0.5) / n;
            const double deep = std::min(0.9, 2.0 * profile.slow_wave_fraction * (1.0 - pos));
            const double rem = std::min(0.9 - deep, 2.0 * kRemShare * pos);
            const double u = rng.uniform();
            if (u < deep)
                held = rng.uniform() < 0.5 ? Stage::S3 : Stage::S4;
            else if (u < deep + rem)
                held = Stage::REM;
            else if (u < deep + rem + kS1Share)
                held = Stage::S1;
            else
                held = Stage::S2;
            hold = 1 + static_cast<std::size_t>(rng.below(4));
        }
        h.stages[i] = held;
        --hold;
    }
    return h;
}

Recording generate_signal(const SubjectProfile& profile, const Hypnogram& hypnogram, Channel channel, double fs,
                          std::uint64_t seed)
{
    profile.validate();
    if (!(fs > 0.0))
        throw Error(ErrorCode::InvalidSpec, "sampling rate must be positive");
    Rng rng(seed);
    const auto block = static_cast<std::size_t>(std::llround(hypnogram.epoch_seconds * fs));
    const std::size_t total = block * hypnogram.stages.size();

    Recording rec;
    rec.subject_id = hypnogram.subject_id;
    rec.channel = channel;
    rec.fs = fs;
    rec.samples.assign(total, 0.0);

    for (std::size_t b = 0; b < hypnogram.stages.size(); ++b) {
        const auto& gain = kStageGain[static_cast<std::size_t>(hypnogram.stages[b])];
        for (std::size_t band = 0; band < kSynthBands; ++band) {
            double amplitude = profile.band_amplitudes[band] * gain[band];
            if (channel == Channel::C4)
                amplitude *= kC4Gain[band];
            const double freq = rng.uniform(kBandRanges[band].lo, kBandRanges[band].hi);
            const double phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
            if (amplitude == 0.0)
                continue;
            const double w = 2.0 * std::numbers::pi * freq / fs;
            for (std::size_t i = 0; i < block; ++i)
                rec.samples[b * block + i] += amplitude * std::sin(w * static_cast<double>(i) + phase);
        }
    }
    for (double& v : rec.samples)
        v += profile.noise_sigma * rng.normal();
    rec.duration = static_cast<double>(total) / fs;
    return rec;
}

std::pair<Recording, Hypnogram> generate_subject(const SubjectProfile& profile, double duration, double fs,
                                                 Channel channel)
{
    if (!(duration >= 60.0))
        throw Error(ErrorCode::InvalidSpec, "synthetic recordings must last at least 60 s");
    const auto epochs = static_cast<std::size_t>(std::ceil(duration / kBlockSeconds));
    auto hyp = generate_hypnogram(profile, epochs, splitmix64(profile.seed));
    auto rec = generate_signal(profile, hyp, channel, fs,
                               splitmix64(profile.seed ^ (0x100ULL + static_cast<std::uint64_t>(channel))));
    rec.samples.resize(static_cast<std::size_t>(std::llround(duration * fs)));
    rec.duration = static_cast<double>(rec.samples.size()) / fs;
    return {std::move(rec), std::move(hyp)};
}

SubjectProfile cohort_profile(const CohortOptions& options, Label label, std::uint64_t subject_seed)
{
    auto p = options.profiles[label == Label::Healthy ? 0 : 1];
    p.label = label;
    p.seed = subject_seed;
    Rng rng(subject_seed ^ 0xc0407ULL);
    for (double& a : p.band_amplitudes)
        a *= 1.0 + options.amplitude_jitter * rng.uniform(-1.0, 1.0);
    const double spread = label == Label::Healthy ? options.healthy_se_spread : options.insomnia_se_spread;
    p.sleep_efficiency_target = std::clamp(p.sleep_efficiency_target + spread * rng.normal(), 35.0, 99.0);
    return p;
}

std::vector<ManifestEntry> generate_cohort(std::size_t n_healthy, std::size_t n_insomnia, std::uint64_t seed,
                                           const std::filesystem::path& dir, const CohortOptions& options)
{
    if (n_healthy < 1 || n_insomnia < 1)
        throw Error(ErrorCode::ConfigError, "a cohort needs at least one subject of each class");
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec)
        throw Error(ErrorCode::IoError, "cannot create " + dir.string());

    std::vector<ManifestEntry> entries;
    std::uint64_t k = 0;
    for (Label label : {Label::Healthy, Label::Insomnia}) {
        const std::size_t count = label == Label::Healthy ? n_healthy : n_insomnia;
        for (std::size_t i = 0; i < count; ++i, ++k) {
            const std::uint64_t subject_seed = splitmix64(seed + k);
            char id[32];
            std::snprintf(id, sizeof id, "%s%03zu", label == Label::Healthy ? "H" : "I", i + 1);

            const auto profile = cohort_profile(options, label, subject_seed);
            const auto epochs = static_cast<std::size_t>(std::ceil(options.duration / kBlockSeconds));
            auto hyp = generate_hypnogram(profile, epochs, splitmix64(subject_seed));
            hyp.subject_id = id;
            Rng clock(subject_seed ^ 0xc10cULL);
            const int start = 22 * 3600 + static_cast<int>(clock.below(3600));

            std::vector<Recording> channels;
            for (Channel ch : {Channel::Fp2, Channel::C4}) {
                auto rec = generate_signal(profile, hyp, ch, options.fs,
                                           splitmix64(subject_seed ^ (0x100ULL + static_cast<std::uint64_t>(ch))));
                rec.samples.resize(static_cast<std::size_t>(std::llround(options.duration * options.fs)));
                rec.duration = static_cast<double>(rec.samples.size()) / options.fs;
                rec.start_time = {start / 3600, (start / 60) % 60, start % 60};
                channels.push_back(std::move(rec));
            }

            ManifestEntry e;
            e.subject_id = id;
            e.label = label;
            e.edf_path = std::string(id) + ".edf";
            e.hypnogram_path = std::string(id) + ".hyp.csv";
            e.seed = subject_seed;
            write_edf(channels, dir / e.edf_path);
            write_hypnogram(hyp, dir / e.hypnogram_path);
            entries.push_back(std::move(e));
        }
    }
    // manifest paths stay relative so the directory can be moved
    write_manifest(entries, dir / "manifest.csv");
    for (auto& e : entries) {
        e.edf_path = dir / e.edf_path;
        e.hypnogram_path = dir / e.hypnogram_path;
    }
    return entries;
}

std::vector<ManifestEntry> read_manifest(const std::filesystem::path& path)
{
    auto rows = csv::read_rows(path);
    const auto base = path.parent_path();
    std::vector<ManifestEntry> entries;
    for (const auto& row : rows) {
        if (row.empty() || row[0] == "subject_id")
            continue;
        if (row.size() < 4)
            throw Error(ErrorCode::ParseError, "manifest rows need subject_id,class,edf_path,hypnogram_path");
        ManifestEntry e;
        e.subject_id = row[0];
        e.label = parse_label(row[1]);
        e.edf_path = resolve(base, row[2]);
        e.hypnogram_path = resolve(base, row[3]);
        if (row.size() > 4 && !row[4].empty())
        {
            auto [ptr, ec] = std::from_chars(row[4].data(), row[4].data() + row[4].size(), e.seed);
            if (ec != std::errc() || ptr != row[4].data() + row[4].size())
                throw Error(ErrorCode::ParseError, "bad seed '" + row[4] + "'");
        }
        entries.push_back(std::move(e));
    }
    if (entries.empty())
        throw Error(ErrorCode::InsufficientData, "empty manifest " + path.string());
    return entries;
}

void write_manifest(std::span<const ManifestEntry> entries, const std::filesystem::path& path)
{
    csv::Writer out(path, {});
    out.row({"subject_id", "class", "edf_path", "hypnogram_path", "seed"});
    for (const auto& e : entries)
        out.row({e.subject_id, std::string(to_string(e.label)), e.edf_path.string(), e.hypnogram_path.string(),
                 std::to_string(e.seed)});
}

} // namespace insomnet

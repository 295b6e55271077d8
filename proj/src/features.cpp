#include "insomnet/features.hpp"

#include "insomnet/csv.hpp"
#include "insomnet/error.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <numeric>

namespace insomnet {

namespace {

constexpr std::array<std::string_view, kFeatureCount> kNames = {
    "MEAN",
    "STD",
    "ZCR",
    "HJORTH_ACTIVITY",
    "HJORTH_MOBILITY",
    "HJORTH_COMPLEXITY",
    "TOTAL_POWER",
    "SLOW_WAVE_POWER",
    "REL_DELTA",
    "REL_THETA",
    "REL_ALPHA",
    "REL_SIGMA",
    "REL_BETA",
    "REL_GAMMA",
    "ABS_DELTA",
    "ABS_THETA",
    "ABS_ALPHA",
    "ABS_BETA",
    "ABS_GAMMA",
    "RATIO_DELTA_THETA",
    "RATIO_DELTA_ALPHA",
    "RATIO_DELTA_GAMMA",
    "RATIO_DELTA_BETA",
    "RATIO_THETA_ALPHA",
    "RATIO_THETA_GAMMA",
    "RATIO_THETA_BETA",
    "RATIO_ALPHA_GAMMA",
    "RATIO_ALPHA_BETA",
    "RATIO_GAMMA_BETA",
    "SLEEP_EFFICIENCY",
    "TOTAL_SLEEP_TIME",
};

double population_variance(std::span<const double> x)
{
    const double n = static_cast<double>(x.size());
    const double mean = std::accumulate(x.begin(), x.end(), 0.0) / n;
    double acc = 0.0;
    for (double v : x)
        acc += (v - mean) * (v - mean);
    return acc / n;
}

std::vector<double> first_difference(std::span<const double> x)
{
    std::vector<double> d(x.size() > 0 ? x.size() - 1 : 0);
    for (std::size_t i = 0; i + 1 < x.size(); ++i)
        d[i] = x[i + 1] - x[i];
    return d;
}

/* FFTW plans are created once per length under a lock (the planner is not
 * thread-safe) with FFTW_ESTIMATE so the chosen algorithm, and therefore
 * every rounding, is identical from run to run. Execution uses the
 * new-array interface on fftw_malloc'd buffers and is safe to share. */
struct FftBuffers {
    double* in = nullptr;
    fftw_complex* out = nullptr;
    explicit FftBuffers(std::size_t n)
        : in(static_cast<double*>(fftw_malloc(sizeof(double) * n))),
          out(static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * (n / 2 + 1))))
    {
    }
    ~FftBuffers()
    {
        fftw_free(in);
        fftw_free(out);
    }
    FftBuffers(const FftBuffers&) = delete;
    FftBuffers& operator=(const FftBuffers&) = delete;
};

fftw_plan real_plan(std::size_t n)
{
    static std::mutex lock;
    static std::map<std::size_t, fftw_plan> plans;
    std::scoped_lock guard(lock);
    auto it = plans.find(n);
    if (it != plans.end())
        return it->second;
    FftBuffers scratch(n);
    auto plan = fftw_plan_dft_r2c_1d(static_cast<int>(n), scratch.in, scratch.out, FFTW_ESTIMATE);
    plans.emplace(n, plan);
    return plan;
}

} // namespace

const std::array<std::string_view, kFeatureCount>& feature_names()
{
    return kNames;
}

std::string_view feature_name(Feature feature)
{
    return kNames[static_cast<std::size_t>(feature)];
}

Feature feature_from_name(std::string_view name)
{
    auto it = std::find(kNames.begin(), kNames.end(), name);
    if (it == kNames.end())
        throw Error(ErrorCode::ParseError, "unknown feature '" + std::string(name) + "'");
    return static_cast<Feature>(it - kNames.begin());
}

std::string_view to_string(Stage stage)
{
    switch (stage) {
    case Stage::W: return "W";
    case Stage::S1: return "S1";
    case Stage::S2: return "S2";
    case Stage::S3: return "S3";
    case Stage::S4: return "S4";
    case Stage::REM: return "REM";
    }
    return "W";
}

Stage parse_stage(std::string_view text)
{
    std::string s(text);
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
    if (s == "W" || s == "WAKE" || s == "S0")
        return Stage::W;
    if (s == "S1" || s == "N1")
        return Stage::S1;
    if (s == "S2" || s == "N2")
        return Stage::S2;
    if (s == "S3" || s == "N3")
        return Stage::S3;
    if (s == "S4")
        return Stage::S4;
    if (s == "REM" || s == "R")
        return Stage::REM;
    throw Error(ErrorCode::ParseError, "unknown sleep stage '" + std::string(text) + "'");
}

Hypnogram read_hypnogram(const std::filesystem::path& path)
{
    Hypnogram h;
    h.subject_id = path.stem().string();
    for (const auto& row : csv::read_rows(path)) {
        if (row.size() < 2)
            throw Error(ErrorCode::ParseError, "hypnogram rows need epoch_index,stage");
        if (row[0] == "epoch_index")
            continue;
        auto index = csv::parse_int(row[0]);
        if (index != static_cast<long long>(h.stages.size()))
            throw Error(ErrorCode::ParseError, "hypnogram epoch indices must be consecutive from 0");
        h.stages.push_back(parse_stage(row[1]));
    }
    if (h.stages.empty())
        throw Error(ErrorCode::ParseError, "empty hypnogram " + path.string());
    return h;
}

void write_hypnogram(const Hypnogram& hypnogram, const std::filesystem::path& path)
{
    csv::Writer out(path, {});
    out.row({"epoch_index", "stage"});
    for (std::size_t i = 0; i < hypnogram.stages.size(); ++i)
        out.row({std::to_string(i), std::string(to_string(hypnogram.stages[i]))});
}

TemporalFeatures temporal_features(std::span<const double> samples, double fs)
{
    if (samples.size() < 3 || !(fs > 0.0))
        throw Error(ErrorCode::DegenerateSignal, "epoch too short for temporal features");
    TemporalFeatures t;
    const double n = static_cast<double>(samples.size());
    t.mean = std::accumulate(samples.begin(), samples.end(), 0.0) / n;
    t.activity = population_variance(samples);
    t.std = std::sqrt(t.activity);

    // Sign changes; exact zeros carry the previous sign forward.
    int last_sign = 0;
    std::size_t crossings = 0;
    for (double v : samples) {
        int sign = (v > 0.0) - (v < 0.0);
        if (sign == 0)
            continue;
        if (last_sign != 0 && sign != last_sign)
            ++crossings;
        last_sign = sign;
    }
    t.zcr = static_cast<double>(crossings) / (n / fs);

    const auto d1 = first_difference(samples);
    const auto d2 = first_difference(d1);
    const double var_d1 = population_variance(d1);
    const double var_d2 = population_variance(d2);
    if (!(t.activity > 0.0) || !(var_d1 > 0.0))
        throw Error(ErrorCode::DegenerateSignal, "zero-variance epoch");
    t.mobility = std::sqrt(var_d1 / t.activity);
    t.complexity = std::sqrt(var_d2 / var_d1) / t.mobility;
    return t;
}

double Spectrum::band_power(double lo, double hi) const
{
    if (power.empty() || !(hi > lo))
        return 0.0;
    auto value_at = [&](double f) {
        double pos = f / df;
        auto k = static_cast<std::size_t>(std::floor(pos));
        if (k + 1 >= power.size())
            return power.back();
        double frac = pos - static_cast<double>(k);
        return power[k] * (1.0 - frac) + power[k + 1] * frac;
    };
    const double f_max = frequency(power.size() - 1);
    lo = std::clamp(lo, 0.0, f_max);
    hi = std::clamp(hi, 0.0, f_max);
    if (!(hi > lo))
        return 0.0;

    double total = 0.0;
    double f_prev = lo;
    double p_prev = value_at(lo);
    auto k = static_cast<std::size_t>(std::floor(lo / df)) + 1;
    for (; k < power.size() && frequency(k) < hi; ++k) {
        const double f = frequency(k);
        if (f <= f_prev)
            continue;
        total += 0.5 * (p_prev + power[k]) * (f - f_prev);
        f_prev = f;
        p_prev = power[k];
    }
    total += 0.5 * (p_prev + value_at(hi)) * (hi - f_prev);
    return total;
}

Spectrum psd(std::span<const double> samples, double fs, double segment_seconds)
{
    auto seg = static_cast<std::size_t>(std::llround(segment_seconds * fs));
    seg = std::min(seg, samples.size());
    if (seg < 2)
        throw Error(ErrorCode::DegenerateSignal, "epoch too short for a spectrum");
    const std::size_t hop = seg / 2;
    const std::size_t bins = seg / 2 + 1;

    std::vector<double> window(seg);
    double window_power = 0.0;
    for (std::size_t i = 0; i < seg; ++i) {
        window[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(seg - 1));
        window_power += window[i] * window[i];
    }

    auto plan = real_plan(seg);
    FftBuffers buf(seg);
    Spectrum spec;
    spec.df = fs / static_cast<double>(seg);
    spec.power.assign(bins, 0.0);

    std::size_t segments = 0;
    for (std::size_t start = 0; start + seg <= samples.size(); start += hop) {
        const auto piece = samples.subspan(start, seg);
        const double mean = std::accumulate(piece.begin(), piece.end(), 0.0) / static_cast<double>(seg);
        for (std::size_t i = 0; i < seg; ++i)
            buf.in[i] = (piece[i] - mean) * window[i];
        fftw_execute_dft_r2c(plan, buf.in, buf.out);
        for (std::size_t k = 0; k < bins; ++k) {
            double mag2 = buf.out[k][0] * buf.out[k][0] + buf.out[k][1] * buf.out[k][1];
            const bool edge = k == 0 || (seg % 2 == 0 && k == bins - 1);
            spec.power[k] += (edge ? 1.0 : 2.0) * mag2;
        }
        ++segments;
    }
    const double scale = 1.0 / (fs * window_power * static_cast<double>(segments));
    for (double& p : spec.power)
        p *= scale;
    return spec;
}

std::array<double, 23> spectral_features(const Spectrum& spectrum, const BandSet& bands)
{
    auto power = [&](Band b) { return spectrum.band_power(b.lo, b.hi); };
    const double total = power(bands.total);
    if (!(total >= kRatioFloor))
        throw Error(ErrorCode::DegenerateSignal, "total power below floor");

    const double delta = power(bands.delta);
    const double theta = power(bands.theta);
    const double alpha = power(bands.alpha);
    const double sigma = power(bands.sigma);
    const double beta = power(bands.beta);
    const double gamma = power(bands.gamma);
    auto ratio = [](double num, double den) { return num / std::max(den, kRatioFloor); };

    return {
        total,
        power(bands.slow_wave),
        delta / total,
        theta / total,
        alpha / total,
        sigma / total,
        beta / total,
        gamma / total,
        delta,
        theta,
        alpha,
        beta,
        gamma,
        ratio(delta, theta),
        ratio(delta, alpha),
        ratio(delta, gamma),
        ratio(delta, beta),
        ratio(theta, alpha),
        ratio(theta, gamma),
        ratio(theta, beta),
        ratio(alpha, gamma),
        ratio(alpha, beta),
        ratio(gamma, beta),
    };
}

SleepFeatures sleep_features(const Hypnogram& hypnogram)
{
    if (hypnogram.stages.empty())
        return {};
    const auto asleep = std::count_if(hypnogram.stages.begin(), hypnogram.stages.end(),
                                      [](Stage s) { return s != Stage::W; });
    SleepFeatures out;
    out.total_sleep_time = hypnogram.epoch_seconds * static_cast<double>(asleep);
    out.sleep_efficiency = 100.0 * static_cast<double>(asleep) / static_cast<double>(hypnogram.stages.size());
    return out;
}

bool passes_slow_wave_gate(std::span<const double> samples, double fs, const ExtractConfig& config)
{
    FilterSpec band{config.bands.slow_wave.lo, config.bands.slow_wave.hi, 4, true};
    auto filtered = apply_filter(design_butterworth(band, fs), samples, true);
    auto [lo, hi] = std::minmax_element(filtered.begin(), filtered.end());
    return (*hi - *lo) > config.slow_wave_min_uv;
}

std::vector<Epoch> prepare_epochs(const Recording& filtered, const ExtractConfig& config)
{
    auto epochs = segment(filtered, config.epoch_len, config.overlap);
    reject_artifacts(epochs, config.clip_uv);
    for (auto& e : epochs)
        if (!e.rejected)
            e = normalize_epoch(std::move(e));
    return epochs;
}

FeatureVector epoch_features(const Epoch& epoch, const SleepFeatures& sleep, const ExtractConfig& config)
{
    FeatureVector fv;
    fv.subject_id = epoch.subject_id;
    fv.channel = epoch.channel;
    fv.epoch_index = epoch.index;
    fv.label = epoch.label;

    const auto t = temporal_features(epoch.samples, epoch.fs);
    fv[Feature::Mean] = t.mean;
    fv[Feature::Std] = t.std;
    fv[Feature::Zcr] = t.zcr;
    fv[Feature::HjorthActivity] = t.activity;
    fv[Feature::HjorthMobility] = t.mobility;
    fv[Feature::HjorthComplexity] = t.complexity;

    const auto spectral = spectral_features(psd(epoch.samples, epoch.fs), config.bands);
    std::copy(spectral.begin(), spectral.end(), fv.values.begin() + static_cast<std::ptrdiff_t>(Feature::TotalPower));
    if (config.slow_wave_gate && !passes_slow_wave_gate(epoch.samples, epoch.fs, config))
        fv[Feature::SlowWavePower] = 0.0;

    fv[Feature::SleepEfficiency] = sleep.sleep_efficiency;
    fv[Feature::TotalSleepTime] = sleep.total_sleep_time;
    return fv;
}

std::vector<FeatureVector> extract_all(const Recording& filtered, const Hypnogram& hypnogram,
                                       const ExtractConfig& config, std::optional<Label> label)
{
    if (hypnogram.stages.empty())
        throw Error(ErrorCode::AlignmentError, "empty hypnogram");
    const double scored = hypnogram.epoch_seconds * static_cast<double>(hypnogram.stages.size());
    const double duration = static_cast<double>(filtered.samples.size()) / filtered.fs;
    if (std::abs(scored - duration) > hypnogram.epoch_seconds)
        throw Error(ErrorCode::AlignmentError, "hypnogram covers " + std::to_string(scored) +
                                                   " s but recording lasts " + std::to_string(duration) + " s");

    const auto sleep = sleep_features(hypnogram);
    std::vector<FeatureVector> out;
    for (auto& epoch : prepare_epochs(filtered, config)) {
        if (epoch.rejected)
            continue;
        epoch.label = label;
        try {
            out.push_back(epoch_features(epoch, sleep, config));
        } catch (const Error& e) {
            // Flat-lined epochs (electrode off) carry no features.
            if (e.code() != ErrorCode::DegenerateSignal)
                throw;
        }
    }
    return out;
}

void write_features_csv(std::span<const FeatureVector> vectors, const std::filesystem::path& path,
                        const std::string& comment)
{
    csv::Writer out(path, comment);
    std::vector<std::string> header{"subject_id", "epoch_index", "label"};
    for (auto name : kNames)
        header.emplace_back(name);
    out.row(header);
    for (const auto& v : vectors) {
        std::vector<std::string> row{v.subject_id, std::to_string(v.epoch_index),
                                     v.label ? std::string(to_string(*v.label)) : "unknown"};
        for (double x : v.values)
            row.push_back(csv::format(x));
        out.row(row);
    }
}

std::vector<FeatureVector> read_features_csv(const std::filesystem::path& path)
{
    auto rows = csv::read_rows(path);
    if (rows.empty() || rows.front().size() != 3 + kFeatureCount || rows.front()[0] != "subject_id")
        throw Error(ErrorCode::ParseError, "bad feature table header in " + path.string());
    for (std::size_t i = 0; i < kFeatureCount; ++i)
        if (rows.front()[3 + i] != kNames[i])
            throw Error(ErrorCode::ParseError, "unexpected feature column " + rows.front()[3 + i]);

    std::vector<FeatureVector> out;
    for (std::size_t r = 1; r < rows.size(); ++r) {
        const auto& row = rows[r];
        if (row.size() != 3 + kFeatureCount)
            throw Error(ErrorCode::ParseError, "feature row with wrong column count");
        FeatureVector v;
        v.subject_id = row[0];
        v.epoch_index = static_cast<std::size_t>(csv::parse_int(row[1]));
        if (row[2] != "unknown")
            v.label = parse_label(row[2]);
        for (std::size_t i = 0; i < kFeatureCount; ++i)
            v.values[i] = csv::parse_double(row[3 + i]);
        out.push_back(std::move(v));
    }
    return out;
}

} // namespace insomnet

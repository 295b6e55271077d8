#include "insomnet/edf.hpp"
#include "insomnet/error.hpp"

#include <cmath>
#include <numbers>
#include <numeric>

namespace insomnet {

namespace {

constexpr double kStopbandDb = 80.0;
// Transition band as a fraction of the lower Nyquist frequency; the
// stopband starts exactly at that Nyquist.
constexpr double kTransition = 0.2;

double kaiser_beta(double attenuation_db)
{
    if (attenuation_db > 50.0)
        return 0.1102 * (attenuation_db - 8.7);
    if (attenuation_db >= 21.0)
        return 0.5842 * std::pow(attenuation_db - 21.0, 0.4) + 0.07886 * (attenuation_db - 21.0);
    return 0.0;
}

double sinc(double x)
{
    if (std::abs(x) < 1e-12)
        return 1.0;
    return std::sin(std::numbers::pi * x) / (std::numbers::pi * x);
}

/* Low-pass prototype at the upsampled rate, split into `up` phases so each
 * output sample is a contiguous dot product. */
struct PolyphaseFilter {
    std::int64_t half = 0;
    std::int64_t up = 1;
    std::vector<std::vector<double>> phases;
};

PolyphaseFilter design_filter(Ratio ratio)
{
    const double nyquist = 0.5 / static_cast<double>(std::max(ratio.up, ratio.down));
    const double width = kTransition * nyquist;
    const double cutoff = nyquist - 0.5 * width;
    const double order = (kStopbandDb - 7.95) / (2.285 * 2.0 * std::numbers::pi * width);
    const auto half = static_cast<std::int64_t>(std::ceil(order / 2.0));
    const double beta = kaiser_beta(kStopbandDb);
    const double norm = std::cyl_bessel_i(0.0, beta);

    PolyphaseFilter filter;
    filter.half = half;
    filter.up = ratio.up;
    filter.phases.resize(static_cast<std::size_t>(ratio.up));
    const std::int64_t taps = 2 * half + 1;
    for (std::int64_t k = 0; k < taps; ++k) {
        const double n = static_cast<double>(k - half);
        const double x = n / static_cast<double>(half);
        const double window = std::cyl_bessel_i(0.0, beta * std::sqrt(std::max(0.0, 1.0 - x * x))) / norm;
        const double h = 2.0 * cutoff * sinc(2.0 * cutoff * n) * window * static_cast<double>(ratio.up);
        filter.phases[static_cast<std::size_t>(k % ratio.up)].push_back(h);
    }
    return filter;
}

} // namespace

Ratio rational_ratio(double source_fs, double target_fs, std::int64_t max_term)
{
    if (!(source_fs > 0.0) || !(target_fs > 0.0) || !std::isfinite(source_fs) || !std::isfinite(target_fs))
        throw Error(ErrorCode::UnsupportedRate, "sampling rates must be positive");
    const double ratio = target_fs / source_fs;

    // Continued-fraction convergents of target/source.
    std::int64_t p_prev = 1, p = static_cast<std::int64_t>(std::floor(ratio));
    std::int64_t q_prev = 0, q = 1;
    double rest = ratio - std::floor(ratio);
    for (int iter = 0; iter < 64; ++iter) {
        if (p > 0 && std::abs(static_cast<double>(p) / static_cast<double>(q) - ratio) <= 1e-9 * ratio) {
            if (p > max_term || q > max_term)
                break;
            auto g = std::gcd(p, q);
            return {p / g, q / g};
        }
        if (rest < 1e-15)
            break;
        const double inv = 1.0 / rest;
        const auto a = static_cast<std::int64_t>(std::floor(inv));
        rest = inv - std::floor(inv);
        std::int64_t p_next = a * p + p_prev;
        std::int64_t q_next = a * q + q_prev;
        p_prev = p;
        q_prev = q;
        p = p_next;
        q = q_next;
        if (p > max_term || q > max_term)
            break;
    }
    throw Error(ErrorCode::UnsupportedRate, "rate ratio " + std::to_string(target_fs) + "/" +
                                                std::to_string(source_fs) + " is not a small rational");
}

std::vector<double> resample_poly(std::span<const double> input, Ratio ratio)
{
    if (ratio.up <= 0 || ratio.down <= 0)
        throw Error(ErrorCode::UnsupportedRate, "resampling factors must be positive");
    if (ratio.up == ratio.down)
        return {input.begin(), input.end()};

    const auto filter = design_filter(ratio);
    const auto n_in = static_cast<std::int64_t>(input.size());
    const std::int64_t n_out = (n_in * ratio.up + ratio.down - 1) / ratio.down;
    std::vector<double> output(static_cast<std::size_t>(n_out), 0.0);

    for (std::int64_t m = 0; m < n_out; ++m) {
        // Upsampled-domain position, shifted by the filter half-length so the
        // linear-phase delay cancels.
        const std::int64_t t = m * ratio.down + filter.half;
        const std::int64_t phase = t % ratio.up;
        const std::int64_t base = t / ratio.up;
        const auto& h = filter.phases[static_cast<std::size_t>(phase)];
        const auto taps = static_cast<std::int64_t>(h.size());
        // output = sum_j h[j] * x[base - j]
        std::int64_t j_lo = std::max<std::int64_t>(0, base - (n_in - 1));
        std::int64_t j_hi = std::min<std::int64_t>(taps - 1, base);
        double acc = 0.0;
        for (std::int64_t j = j_lo; j <= j_hi; ++j)
            acc += h[static_cast<std::size_t>(j)] * input[static_cast<std::size_t>(base - j)];
        output[static_cast<std::size_t>(m)] = acc;
    }
    return output;
}

Recording resample(const Recording& recording, double target_fs)
{
    if (!(target_fs > 0.0))
        throw Error(ErrorCode::UnsupportedRate, "target rate must be positive");
    Recording out = recording;
    if (recording.fs == target_fs)
        return out;
    auto ratio = rational_ratio(recording.fs, target_fs);
    out.samples = resample_poly(recording.samples, ratio);
    out.fs = target_fs;
    out.duration = static_cast<double>(out.samples.size()) / target_fs;
    return out;
}

} // namespace insomnet

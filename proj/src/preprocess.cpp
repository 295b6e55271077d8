#include "insomnet/preprocess.hpp"

#include "insomnet/error.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numbers>
#include <numeric>

namespace insomnet {

namespace {

using cplx = std::complex<double>;

enum class Kind { Lowpass, Highpass };

/* Butterworth in second-order sections. Analog prototype poles are placed on
 * the unit circle in the left half-plane, scaled (low-pass) or inverted
 * (high-pass) around the prewarped cutoff, then mapped through the bilinear
 * transform. Each section is normalized to unit gain at DC (low-pass) or at
 * Nyquist (high-pass). */
std::vector<Biquad> butterworth_sections(Kind kind, int order, double cutoff, double fs)
{
    const double k = 2.0 * fs;
    const double warped = k * std::tan(std::numbers::pi * cutoff / fs);
    const cplx unity_point = kind == Kind::Lowpass ? cplx(1.0, 0.0) : cplx(-1.0, 0.0);
    const double zero = kind == Kind::Lowpass ? -1.0 : 1.0;

    auto digital_pole = [&](cplx prototype) {
        cplx s = kind == Kind::Lowpass ? warped * prototype : warped / prototype;
        return (k + s) / (k - s);
    };

    std::vector<Biquad> sections;
    for (int i = 0; i < order / 2; ++i) {
        const double theta = std::numbers::pi * (2.0 * i + 1.0 + order) / (2.0 * order);
        const cplx p = digital_pole(std::polar(1.0, theta));
        Biquad q;
        q.b0 = 1.0;
        q.b1 = -2.0 * zero;
        q.b2 = 1.0;
        q.a1 = -2.0 * p.real();
        q.a2 = std::norm(p);
        const double g = std::abs(q.response(unity_point));
        q.b0 /= g;
        q.b1 /= g;
        q.b2 /= g;
        sections.push_back(q);
    }
    if (order % 2 == 1) {
        const double p = digital_pole(cplx(-1.0, 0.0)).real();
        Biquad q;
        q.b0 = 1.0;
        q.b1 = -zero;
        q.a1 = -p;
        const double g = std::abs(q.response(unity_point));
        q.b0 /= g;
        q.b1 /= g;
        sections.push_back(q);
    }
    return sections;
}

void check_cutoff(double cutoff, double fs, const char* which)
{
    if (!(fs > 0.0) || !(cutoff > 0.0) || cutoff >= fs / 2.0)
        throw Error(ErrorCode::InvalidSpec, std::string(which) + " cutoff must lie in (0, fs/2)");
}

void run_cascade(const std::vector<Biquad>& sections, std::vector<double>& data)
{
    for (const auto& q : sections) {
        // Transposed direct form II.
        double s1 = 0.0, s2 = 0.0;
        for (double& x : data) {
            const double y = q.b0 * x + s1;
            s1 = q.b1 * x - q.a1 * y + s2;
            s2 = q.b2 * x - q.a2 * y;
            x = y;
        }
    }
}

} // namespace

std::string_view to_string(Label label)
{
    return label == Label::Healthy ? "healthy" : "insomnia";
}

Label parse_label(std::string_view text)
{
    std::string lower(text);
    std::transform(lower.begin(), lower.end(), lower.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    if (lower == "healthy" || lower == "0")
        return Label::Healthy;
    if (lower == "insomnia" || lower == "1")
        return Label::Insomnia;
    throw Error(ErrorCode::ParseError, "unknown class label '" + std::string(text) + "'");
}

std::complex<double> Biquad::response(std::complex<double> z) const
{
    const cplx zi = 1.0 / z;
    return (b0 + zi * (b1 + zi * b2)) / (1.0 + zi * (a1 + zi * a2));
}

double FilterCoefficients::gain(double f) const
{
    const cplx z = std::polar(1.0, 2.0 * std::numbers::pi * f / fs);
    cplx h = 1.0;
    for (const auto& q : sections)
        h *= q.response(z);
    return std::abs(h);
}

double FilterCoefficients::max_pole_radius() const
{
    double radius = 0.0;
    for (const auto& q : sections) {
        // Roots of z^2 + a1 z + a2.
        const cplx disc = std::sqrt(cplx(q.a1 * q.a1 - 4.0 * q.a2, 0.0));
        radius = std::max({radius, std::abs((-q.a1 + disc) / 2.0), std::abs((-q.a1 - disc) / 2.0)});
    }
    return radius;
}

FilterCoefficients design_butterworth_lowpass(int order, double cutoff, double fs)
{
    if (order < 1)
        throw Error(ErrorCode::InvalidSpec, "filter order must be at least 1");
    check_cutoff(cutoff, fs, "low-pass");
    return {fs, butterworth_sections(Kind::Lowpass, order, cutoff, fs)};
}

FilterCoefficients design_butterworth_highpass(int order, double cutoff, double fs)
{
    if (order < 1)
        throw Error(ErrorCode::InvalidSpec, "filter order must be at least 1");
    check_cutoff(cutoff, fs, "high-pass");
    return {fs, butterworth_sections(Kind::Highpass, order, cutoff, fs)};
}

FilterCoefficients design_butterworth(const FilterSpec& spec, double fs)
{
    if (!(spec.hp_cutoff < spec.lp_cutoff))
        throw Error(ErrorCode::InvalidSpec, "high-pass cutoff must be below low-pass cutoff");
    auto coeffs = design_butterworth_highpass(spec.order, spec.hp_cutoff, fs);
    auto lp = design_butterworth_lowpass(spec.order, spec.lp_cutoff, fs);
    coeffs.sections.insert(coeffs.sections.end(), lp.sections.begin(), lp.sections.end());
    return coeffs;
}

std::vector<double> apply_filter(const FilterCoefficients& coeffs, std::span<const double> input, bool zero_phase)
{
    if (!(coeffs.max_pole_radius() < 1.0))
        throw Error(ErrorCode::NumericalError, "filter has a pole on or outside the unit circle");
    std::vector<double> data(input.begin(), input.end());
    run_cascade(coeffs.sections, data);
    if (zero_phase) {
        std::reverse(data.begin(), data.end());
        run_cascade(coeffs.sections, data);
        std::reverse(data.begin(), data.end());
    }
    return data;
}

Recording filter_signal(const Recording& recording, const FilterSpec& spec)
{
    auto coeffs = design_butterworth(spec, recording.fs);
    Recording out = recording;
    out.samples = apply_filter(coeffs, recording.samples, spec.zero_phase);
    return out;
}

std::vector<Epoch> segment(const Recording& recording, double epoch_len, double overlap)
{
    if (!(epoch_len > 0.0) || !(overlap >= 0.0 && overlap < 1.0))
        throw Error(ErrorCode::InvalidSpec, "epoch length must be positive and overlap in [0, 1)");
    const auto length = static_cast<std::size_t>(std::llround(epoch_len * recording.fs));
    const auto hop = static_cast<std::size_t>(std::llround(epoch_len * (1.0 - overlap) * recording.fs));
    const std::size_t n = recording.samples.size();
    if (length == 0 || hop == 0 || n < length)
        throw Error(ErrorCode::TooShort, "recording shorter than one epoch");

    const std::size_t count = (n - length) / hop + 1;
    std::vector<Epoch> epochs;
    epochs.reserve(count);
    for (std::size_t k = 0; k < count; ++k) {
        Epoch e;
        e.subject_id = recording.subject_id;
        e.channel = recording.channel;
        e.index = k;
        e.offset = static_cast<double>(k * hop) / recording.fs;
        e.fs = recording.fs;
        auto begin = recording.samples.begin() + static_cast<std::ptrdiff_t>(k * hop);
        e.samples.assign(begin, begin + static_cast<std::ptrdiff_t>(length));
        epochs.push_back(std::move(e));
    }
    return epochs;
}

void reject_artifacts(std::vector<Epoch>& epochs, double threshold_uv)
{
    for (auto& e : epochs) {
        const bool over = std::any_of(e.samples.begin(), e.samples.end(),
                                      [&](double v) { return std::abs(v) > threshold_uv; });
        e.rejected = over;
    }
}

Epoch normalize_epoch(Epoch epoch)
{
    if (epoch.samples.empty())
        return epoch;
    const double mean = std::accumulate(epoch.samples.begin(), epoch.samples.end(), 0.0) /
                        static_cast<double>(epoch.samples.size());
    for (double& v : epoch.samples)
        v -= mean;
    return epoch;
}

} // namespace insomnet

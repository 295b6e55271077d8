#pragma once

#include "insomnet/edf.hpp"

#include <complex>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace insomnet {

enum class Label { Healthy, Insomnia };

std::string_view to_string(Label label);
Label parse_label(std::string_view text);

struct FilterSpec {
    double hp_cutoff = 0.5;
    double lp_cutoff = 40.0;
    int order = 7;
    bool zero_phase = false;
};

/// y = (b0 + b1 z^-1 + b2 z^-2) / (1 + a1 z^-1 + a2 z^-2)
struct Biquad {
    double b0 = 1.0, b1 = 0.0, b2 = 0.0;
    double a1 = 0.0, a2 = 0.0;

    std::complex<double> response(std::complex<double> z) const;
};

struct FilterCoefficients {
    double fs = 0.0;
    std::vector<Biquad> sections;

    /// |H| at frequency f (Hz).
    double gain(double f) const;
    /// Largest pole radius over all sections.
    double max_pole_radius() const;
};

/// High-pass then low-pass Butterworth cascade, each of `spec.order`, via the
/// bilinear transform with prewarped cutoffs.
FilterCoefficients design_butterworth(const FilterSpec& spec, double fs);
FilterCoefficients design_butterworth_lowpass(int order, double cutoff, double fs);
FilterCoefficients design_butterworth_highpass(int order, double cutoff, double fs);

std::vector<double> apply_filter(const FilterCoefficients& coeffs, std::span<const double> input, bool zero_phase);
Recording filter_signal(const Recording& recording, const FilterSpec& spec);

struct Epoch {
    std::string subject_id;
    Channel channel = Channel::Fp2;
    std::size_t index = 0;
    double offset = 0.0; // seconds
    double fs = 0.0;
    std::vector<double> samples;
    bool rejected = false;
    std::optional<Label> label;
};

std::vector<Epoch> segment(const Recording& recording, double epoch_len = 30.0, double overlap = 0.5);

/// Flags (never removes or edits) epochs whose peak |sample| exceeds the
/// threshold. The boundary is strict: a peak exactly at the threshold is kept.
void reject_artifacts(std::vector<Epoch>& epochs, double threshold_uv = 260.0);

Epoch normalize_epoch(Epoch epoch);

} // namespace insomnet

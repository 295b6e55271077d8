#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace insomnet {

enum class Channel { Fp2, C4 };

std::string_view to_string(Channel channel);
/// Accepts "fp2"/"c4" in any case.
Channel parse_channel(std::string_view text);

struct TimeOfDay {
    int hour = 0;
    int minute = 0;
    int second = 0;

    int seconds_since_midnight() const { return hour * 3600 + minute * 60 + second; }
    friend bool operator==(const TimeOfDay&, const TimeOfDay&) = default;
};

/// Clock difference end - start, wrapping past midnight for overnight sessions.
int session_seconds(TimeOfDay start, TimeOfDay end);

struct Date {
    int day = 1;
    int month = 1;
    int year = 85; // two-digit EDF year
    friend bool operator==(const Date&, const Date&) = default;
};

struct SignalHeader {
    std::string label;
    std::string transducer;
    std::string physical_dim;
    double physical_min = 0.0;
    double physical_max = 0.0;
    int digital_min = -32768;
    int digital_max = 32767;
    std::string prefiltering;
    int samples_per_record = 0;

    double gain() const { return (physical_max - physical_min) / (digital_max - digital_min); }
    double to_physical(int digital) const { return physical_min + (digital - digital_min) * gain(); }
};

struct EdfHeader {
    std::string version = "0";
    std::string patient_id;
    std::string recording_id;
    Date start_date;
    TimeOfDay start_time;
    std::int64_t num_records = -1;
    double record_duration = 1.0;
    std::vector<SignalHeader> signals;

    std::size_t header_bytes() const { return 256 + 256 * signals.size(); }
    double duration_seconds() const { return static_cast<double>(num_records) * record_duration; }
};

/// One channel of physically scaled EEG (microvolts).
struct Recording {
    std::string subject_id;
    Channel channel = Channel::Fp2;
    double fs = 0.0;
    std::vector<double> samples;
    TimeOfDay start_time;
    double duration = 0.0;
};

/// True when an EDF label such as "C4-A1" or "EEG Fp2-F4" names `target`.
bool label_matches(std::string_view edf_label, std::string_view target);

EdfHeader read_edf_header(const std::filesystem::path& path);

/// Reads one signal, converting digital samples to physical units.
Recording read_edf(const std::filesystem::path& path, Channel channel);
Recording read_edf(const std::filesystem::path& path, std::string_view channel_label);

/// Writes one signal as EDF with 1 s records. The final partial record is
/// padded with physical zeros; the true sample count is kept in the
/// recording-id field so read_edf can trim the padding.
void write_edf(const Recording& recording, const std::filesystem::path& path);

/// Multi-signal variant; all recordings must share fs and length.
void write_edf(std::span<const Recording> recordings, const std::filesystem::path& path);

/// Band-limited rational resampling (Kaiser-windowed sinc polyphase filter).
Recording resample(const Recording& recording, double target_fs);

struct Ratio {
    std::int64_t up = 1;
    std::int64_t down = 1;
};

/// target/source as a reduced fraction with both terms at most max_term.
Ratio rational_ratio(double source_fs, double target_fs, std::int64_t max_term = 10000);

std::vector<double> resample_poly(std::span<const double> input, Ratio ratio);

} // namespace insomnet

#include "insomnet/edf.hpp"

#include "insomnet/error.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iterator>

namespace insomnet {

namespace {

std::string trim(std::string_view text)
{
    auto first = text.find_first_not_of(" \t\r\n");
    if (first == std::string_view::npos)
        return {};
    auto last = text.find_last_not_of(" \t\r\n");
    return std::string(text.substr(first, last - first + 1));
}

std::string upper(std::string_view text)
{
    std::string out(text);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
    return out;
}

/* Fixed-width ASCII header fields. Every accessor advances a cursor over the
 * raw header block and fails with ParseError on a bad number. */
class FieldReader {
public:
    explicit FieldReader(std::string_view block) : block_(block) {}

    std::string text(std::size_t width)
    {
        if (pos_ + width > block_.size())
            throw Error(ErrorCode::ParseError, "header shorter than expected");
        auto field = block_.substr(pos_, width);
        pos_ += width;
        return trim(field);
    }

    double real(std::size_t width, const char* what)
    {
        auto field = text(width);
        double value = 0.0;
        auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
        if (field.empty() || ec != std::errc{} || ptr != field.data() + field.size() || !std::isfinite(value))
            throw Error(ErrorCode::ParseError, std::string("bad numeric field ") + what + ": '" + field + "'");
        return value;
    }

    std::int64_t integer(std::size_t width, const char* what)
    {
        auto field = text(width);
        std::int64_t value = 0;
        auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
        if (field.empty() || ec != std::errc{} || ptr != field.data() + field.size())
            throw Error(ErrorCode::ParseError, std::string("bad integer field ") + what + ": '" + field + "'");
        return value;
    }

private:
    std::string_view block_;
    std::size_t pos_ = 0;
};

std::array<int, 3> parse_triplet(const std::string& field, const char* what)
{
    std::array<int, 3> parts{};
    if (field.size() != 8 || field[2] != '.' || field[5] != '.')
        throw Error(ErrorCode::ParseError, std::string("bad ") + what + " field '" + field + "'");
    for (int i = 0; i < 3; ++i) {
        const char* begin = field.data() + 3 * i;
        auto [ptr, ec] = std::from_chars(begin, begin + 2, parts[i]);
        if (ec != std::errc{} || ptr != begin + 2)
            throw Error(ErrorCode::ParseError, std::string("bad ") + what + " field '" + field + "'");
    }
    return parts;
}

void put_field(std::string& out, std::string_view value, std::size_t width)
{
    std::string field(value.substr(0, width));
    field.resize(width, ' ');
    out += field;
}

/* Formats a value into at most 8 characters, rounding away from the interior
 * of the physical range (down for minima, up for maxima) so every sample
 * stays representable after the header round-trips through text. */
std::string format_bound(double value, bool round_up)
{
    for (int precision = 6; precision >= 0; --precision) {
        double scale = std::pow(10.0, precision);
        double rounded = (round_up ? std::ceil(value * scale) : std::floor(value * scale)) / scale;
        char buf[64];
        std::snprintf(buf, sizeof buf, "%.*f", precision, rounded);
        std::string text(buf);
        if (text == "-0" || text.find_first_not_of("-0.") == std::string::npos)
            text = text.substr(text[0] == '-' ? 1 : 0);
        if (text.size() <= 8)
            return text;
    }
    throw Error(ErrorCode::InvalidSignal, "physical range does not fit an 8-character EDF field");
}

double parse_bound(const std::string& text)
{
    double value = 0.0;
    std::from_chars(text.data(), text.data() + text.size(), value);
    return value;
}

std::string format_int(std::int64_t value)
{
    return std::to_string(value);
}

std::string format_duration(double seconds)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%g", seconds);
    return buf;
}

std::int64_t stored_sample_count(const std::string& recording_id)
{
    constexpr std::string_view key = "samples=";
    auto at = recording_id.find(key);
    if (at == std::string::npos)
        return -1;
    std::int64_t count = -1;
    const char* begin = recording_id.data() + at + key.size();
    std::from_chars(begin, recording_id.data() + recording_id.size(), count);
    return count;
}

} // namespace

std::string_view to_string(Channel channel)
{
    return channel == Channel::Fp2 ? "Fp2" : "C4";
}

Channel parse_channel(std::string_view text)
{
    auto name = upper(trim(text));
    if (name == "FP2")
        return Channel::Fp2;
    if (name == "C4")
        return Channel::C4;
    throw Error(ErrorCode::ChannelNotFound, "unsupported channel '" + std::string(text) + "'");
}

int session_seconds(TimeOfDay start, TimeOfDay end)
{
    int delta = end.seconds_since_midnight() - start.seconds_since_midnight();
    return delta < 0 ? delta + 24 * 3600 : delta;
}

bool label_matches(std::string_view edf_label, std::string_view target)
{
    auto label = upper(trim(edf_label));
    if (label.rfind("EEG", 0) == 0)
        label = trim(std::string_view(label).substr(3));
    auto cut = label.find_first_of("-: ");
    if (cut != std::string::npos)
        label = label.substr(0, cut);
    return !label.empty() && label == upper(trim(target));
}

EdfHeader read_edf_header(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw Error(ErrorCode::IoError, "cannot open " + path.string());

    std::string fixed(256, '\0');
    if (!in.read(fixed.data(), 256))
        throw Error(ErrorCode::ParseError, "file shorter than the 256-byte EDF header");

    FieldReader fields(fixed);
    EdfHeader header;
    header.version = fields.text(8);
    if (header.version != "0")
        throw Error(ErrorCode::ParseError, "bad EDF version field '" + header.version + "'");
    header.patient_id = fields.text(80);
    header.recording_id = fields.text(80);
    auto date = parse_triplet(fields.text(8), "start date");
    header.start_date = {date[0], date[1], date[2]};
    auto time = parse_triplet(fields.text(8), "start time");
    header.start_time = {time[0], time[1], time[2]};
    auto header_bytes = fields.integer(8, "header bytes");
    fields.text(44);
    header.num_records = fields.integer(8, "number of records");
    header.record_duration = fields.real(8, "record duration");
    auto ns = fields.integer(4, "number of signals");

    if (ns <= 0 || ns > 4096)
        throw Error(ErrorCode::ParseError, "bad signal count " + std::to_string(ns));
    if (header_bytes != 256 + 256 * ns)
        throw Error(ErrorCode::ParseError, "header byte count does not match signal count");
    if (header.record_duration <= 0.0)
        throw Error(ErrorCode::ParseError, "record duration must be positive");
    if (header.num_records < -1)
        throw Error(ErrorCode::ParseError, "bad number of records");

    std::string block(static_cast<std::size_t>(256 * ns), '\0');
    if (!in.read(block.data(), static_cast<std::streamsize>(block.size())))
        throw Error(ErrorCode::ParseError, "truncated signal headers");

    const auto n = static_cast<std::size_t>(ns);
    header.signals.resize(n);
    FieldReader sig(block);
    for (auto& s : header.signals) s.label = sig.text(16);
    for (auto& s : header.signals) s.transducer = sig.text(80);
    for (auto& s : header.signals) s.physical_dim = sig.text(8);
    for (auto& s : header.signals) s.physical_min = sig.real(8, "physical minimum");
    for (auto& s : header.signals) s.physical_max = sig.real(8, "physical maximum");
    for (auto& s : header.signals) s.digital_min = static_cast<int>(sig.integer(8, "digital minimum"));
    for (auto& s : header.signals) s.digital_max = static_cast<int>(sig.integer(8, "digital maximum"));
    for (auto& s : header.signals) s.prefiltering = sig.text(80);
    for (auto& s : header.signals) s.samples_per_record = static_cast<int>(sig.integer(8, "samples per record"));

    for (const auto& s : header.signals) {
        if (s.samples_per_record <= 0)
            throw Error(ErrorCode::ParseError, "signal '" + s.label + "' has no samples per record");
        if (s.digital_min >= s.digital_max || s.physical_min == s.physical_max)
            throw Error(ErrorCode::BadScaling, "signal '" + s.label + "' has a degenerate scaling range");
    }
    return header;
}

Recording read_edf(const std::filesystem::path& path, std::string_view channel_label)
{
    return read_edf(path, parse_channel(channel_label));
}

Recording read_edf(const std::filesystem::path& path, Channel channel)
{
    auto header = read_edf_header(path);

    std::size_t record_samples = 0;
    for (const auto& s : header.signals)
        record_samples += static_cast<std::size_t>(s.samples_per_record);
    const std::size_t record_bytes = record_samples * 2;

    auto file_size = std::filesystem::file_size(path);
    if (file_size < header.header_bytes())
        throw Error(ErrorCode::ParseError, "file shorter than its header");
    auto available = static_cast<std::int64_t>((file_size - header.header_bytes()) / record_bytes);
    if (header.num_records == -1)
        header.num_records = available;
    if (available < header.num_records)
        throw Error(ErrorCode::ParseError, "data section holds fewer records than the header declares");

    auto target = to_string(channel);
    auto match = std::find_if(header.signals.begin(), header.signals.end(),
                              [&](const SignalHeader& s) { return label_matches(s.label, target); });
    if (match == header.signals.end())
        throw Error(ErrorCode::ChannelNotFound, "no signal labelled " + std::string(target) + " in " + path.string());
    const auto& signal = *match;

    std::size_t offset_in_record = 0;
    for (auto it = header.signals.begin(); it != match; ++it)
        offset_in_record += static_cast<std::size_t>(it->samples_per_record);

    std::ifstream in(path, std::ios::binary);
    in.seekg(static_cast<std::streamoff>(header.header_bytes()));
    std::vector<unsigned char> record(record_bytes);

    Recording out;
    out.channel = channel;
    out.subject_id = header.patient_id;
    out.start_time = header.start_time;
    out.fs = signal.samples_per_record / header.record_duration;
    out.samples.reserve(static_cast<std::size_t>(header.num_records) * static_cast<std::size_t>(signal.samples_per_record));

    const double gain = signal.gain();
    for (std::int64_t r = 0; r < header.num_records; ++r) {
        if (!in.read(reinterpret_cast<char*>(record.data()), static_cast<std::streamsize>(record_bytes)))
            throw Error(ErrorCode::ParseError, "truncated data record");
        for (int i = 0; i < signal.samples_per_record; ++i) {
            auto at = 2 * (offset_in_record + static_cast<std::size_t>(i));
            auto raw = static_cast<std::int16_t>(static_cast<std::uint16_t>(record[at] | (record[at + 1] << 8)));
            out.samples.push_back(signal.physical_min + (raw - signal.digital_min) * gain);
        }
    }

    auto stored = stored_sample_count(header.recording_id);
    if (stored >= 0 && static_cast<std::size_t>(stored) <= out.samples.size())
        out.samples.resize(static_cast<std::size_t>(stored));
    out.duration = static_cast<double>(out.samples.size()) / out.fs;
    return out;
}

void write_edf(const Recording& recording, const std::filesystem::path& path)
{
    write_edf(std::span<const Recording>(&recording, 1), path);
}

void write_edf(std::span<const Recording> recordings, const std::filesystem::path& path)
{
    if (recordings.empty())
        throw Error(ErrorCode::InvalidSignal, "no signals to write");
    const auto& first = recordings.front();
    if (first.samples.empty())
        throw Error(ErrorCode::InvalidSignal, "empty sample list");
    const double fs = first.fs;
    if (!(fs > 0.0) || std::abs(fs - std::round(fs)) > 1e-9)
        throw Error(ErrorCode::InvalidSignal, "sampling rate must be a positive integer for 1 s records");
    const auto spr = static_cast<std::size_t>(std::llround(fs));
    const std::size_t count = first.samples.size();

    struct Scaled {
        SignalHeader header;
        std::string min_text, max_text;
    };
    std::vector<Scaled> scaled;
    for (const auto& rec : recordings) {
        if (rec.samples.size() != count || rec.fs != fs)
            throw Error(ErrorCode::InvalidSignal, "signals must share sampling rate and length");
        double lo = 0.0, hi = 0.0;
        for (double v : rec.samples) {
            if (!std::isfinite(v))
                throw Error(ErrorCode::InvalidSignal, "non-finite sample");
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
        if (hi - lo < 1e-6) {
            lo -= 1.0;
            hi += 1.0;
        }
        Scaled s;
        s.min_text = format_bound(lo, false);
        s.max_text = format_bound(hi, true);
        s.header.label = std::string(to_string(rec.channel));
        s.header.transducer = "EEG electrode";
        s.header.physical_dim = "uV";
        s.header.physical_min = parse_bound(s.min_text);
        s.header.physical_max = parse_bound(s.max_text);
        s.header.samples_per_record = static_cast<int>(spr);
        scaled.push_back(std::move(s));
    }

    const std::size_t num_records = (count + spr - 1) / spr;
    const std::size_t ns = recordings.size();

    std::string head;
    head.reserve(256 + 256 * ns);
    put_field(head, "0", 8);
    put_field(head, first.subject_id.empty() ? "X" : first.subject_id, 80);
    put_field(head, "insomnet samples=" + std::to_string(count), 80);
    put_field(head, "01.01.85", 8);
    char clock[16];
    std::snprintf(clock, sizeof clock, "%02d.%02d.%02d", first.start_time.hour % 100, first.start_time.minute % 100,
                  first.start_time.second % 100);
    put_field(head, clock, 8);
    put_field(head, format_int(static_cast<std::int64_t>(256 + 256 * ns)), 8);
    put_field(head, "", 44);
    put_field(head, format_int(static_cast<std::int64_t>(num_records)), 8);
    put_field(head, format_duration(1.0), 8);
    put_field(head, format_int(static_cast<std::int64_t>(ns)), 4);
    for (const auto& s : scaled) put_field(head, s.header.label, 16);
    for (const auto& s : scaled) put_field(head, s.header.transducer, 80);
    for (const auto& s : scaled) put_field(head, s.header.physical_dim, 8);
    for (const auto& s : scaled) put_field(head, s.min_text, 8);
    for (const auto& s : scaled) put_field(head, s.max_text, 8);
    for (const auto& s : scaled) put_field(head, format_int(s.header.digital_min), 8);
    for (const auto& s : scaled) put_field(head, format_int(s.header.digital_max), 8);
    for (std::size_t i = 0; i < ns; ++i) put_field(head, "", 80);
    for (const auto& s : scaled) put_field(head, format_int(s.header.samples_per_record), 8);
    for (std::size_t i = 0; i < ns; ++i) put_field(head, "", 32);

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        throw Error(ErrorCode::IoError, "cannot write " + path.string());
    out.write(head.data(), static_cast<std::streamsize>(head.size()));

    std::vector<char> record(ns * spr * 2);
    for (std::size_t r = 0; r < num_records; ++r) {
        std::size_t at = 0;
        for (std::size_t s = 0; s < ns; ++s) {
            const auto& hdr = scaled[s].header;
            const double gain = hdr.gain();
            const auto& samples = recordings[s].samples;
            for (std::size_t i = 0; i < spr; ++i) {
                std::size_t idx = r * spr + i;
                double value = idx < count ? samples[idx] : 0.0;
                double digital = std::round((value - hdr.physical_min) / gain) + hdr.digital_min;
                auto d = static_cast<std::int16_t>(std::clamp(digital, static_cast<double>(hdr.digital_min),
                                                              static_cast<double>(hdr.digital_max)));
                auto u = static_cast<std::uint16_t>(d);
                record[at++] = static_cast<char>(u & 0xff);
                record[at++] = static_cast<char>(u >> 8);
            }
        }
        out.write(record.data(), static_cast<std::streamsize>(record.size()));
    }
    if (!out)
        throw Error(ErrorCode::IoError, "failed writing " + path.string());
}

} // namespace insomnet

#include "helpers.hpp"

#include "insomnet/edf.hpp"
#include "insomnet/error.hpp"

#include <doctest.h>

#include <algorithm>
#include <cstring>
#include <fstream>

using namespace insomnet;
using testing::TempDir;

namespace {

double lsb(const std::filesystem::path& path, std::size_t signal = 0)
{
    return read_edf_header(path).signals.at(signal).gain();
}

void expect_code(ErrorCode code, auto&& fn)
{
    try {
        fn();
        FAIL("expected " << to_string(code));
    } catch (const Error& e) {
        CHECK(e.code() == code);
    }
}

// Hand-assembled EDF so parsing is checked against bytes we control rather
// than our own writer.
std::string field(const std::string& text, std::size_t width)
{
    auto s = text.substr(0, width);
    s.resize(width, ' ');
    return s;
}

void write_raw_edf(const std::filesystem::path& path, const std::string& label, int dmin, int dmax, double pmin,
                   double pmax, int spr, int records, const std::vector<std::int16_t>& data,
                   const std::string& start_time = "22.19.06", long header_bytes_override = -1)
{
    std::string h;
    h += field("0", 8);
    h += field("X", 80);
    h += field("Startdate X", 80);
    h += field("01.01.01", 8);
    h += field(start_time, 8);
    h += field(std::to_string(header_bytes_override >= 0 ? header_bytes_override : 512), 8);
    h += field("", 44);
    h += field(std::to_string(records), 8);
    h += field("1", 8);
    h += field("1", 4);
    h += field(label, 16);
    h += field("AgAgCl", 80);
    h += field("uV", 8);
    h += field(std::to_string(pmin), 8);
    h += field(std::to_string(pmax), 8);
    h += field(std::to_string(dmin), 8);
    h += field(std::to_string(dmax), 8);
    h += field("", 80);
    h += field(std::to_string(spr), 8);
    h += field("", 32);
    std::ofstream out(path, std::ios::binary);
    out.write(h.data(), static_cast<std::streamsize>(h.size()));
    for (auto v : data) {
        unsigned char b[2] = {static_cast<unsigned char>(v & 0xff), static_cast<unsigned char>((v >> 8) & 0xff)};
        out.write(reinterpret_cast<char*>(b), 2);
    }
}

} // namespace

TEST_CASE("digital minimum maps to physical minimum")
{
    TempDir dir("edf");
    write_raw_edf(dir / "a.edf", "EEG Fp2-F4", -2048, 2047, -200, 200, 10, 1, std::vector<std::int16_t>(10, -2048));
    auto rec = read_edf(dir / "a.edf", Channel::Fp2);
    REQUIRE(rec.samples.size() == 10);
    for (double v : rec.samples)
        CHECK(v == doctest::Approx(-200.0).epsilon(1e-12));
    CHECK(rec.fs == 10.0);
}

TEST_CASE("hand-built file: scaling, sample rate and start time")
{
    TempDir dir("edf");
    write_raw_edf(dir / "a.edf", "C4-A1", 0, 100, 0, 50, 4, 2, {0, 100, 50, 10, 20, 30, 40, 60});
    auto rec = read_edf(dir / "a.edf", "c4");
    REQUIRE(rec.samples.size() == 8);
    CHECK(rec.samples[1] == doctest::Approx(50.0));
    CHECK(rec.samples[2] == doctest::Approx(25.0));
    CHECK(rec.samples[7] == doctest::Approx(30.0));
    CHECK(rec.fs == 4.0);
    CHECK(rec.duration == doctest::Approx(2.0));
    CHECK(rec.start_time == TimeOfDay{22, 19, 6});
}

TEST_CASE("channel labels match case-insensitively without reference suffix")
{
    CHECK(label_matches("C4-A1", "C4"));
    CHECK(label_matches("EEG Fp2-F4", "FP2"));
    CHECK(label_matches("fp2", "Fp2"));
    CHECK(label_matches("C4:M1", "C4"));
    CHECK_FALSE(label_matches("C3-A2", "C4"));
    CHECK_FALSE(label_matches("Fp1-F3", "Fp2"));
    CHECK_FALSE(label_matches("ECG", "C4"));
}

TEST_CASE("parse errors")
{
    TempDir dir("edf");
    SUBCASE("absent channel")
    {
        write_raw_edf(dir / "a.edf", "ECG", 0, 100, 0, 1, 2, 1, {1, 2});
        expect_code(ErrorCode::ChannelNotFound, [&] { read_edf(dir / "a.edf", Channel::C4); });
    }
    SUBCASE("degenerate digital range")
    {
        write_raw_edf(dir / "a.edf", "C4", 5, 5, 0, 1, 2, 1, {5, 5});
        expect_code(ErrorCode::BadScaling, [&] { read_edf(dir / "a.edf", Channel::C4); });
    }
    SUBCASE("wrong header byte count")
    {
        write_raw_edf(dir / "a.edf", "C4", 0, 100, 0, 1, 2, 1, {1, 2}, "22.19.06", 700);
        expect_code(ErrorCode::ParseError, [&] { read_edf(dir / "a.edf", Channel::C4); });
    }
    SUBCASE("bad version")
    {
        write_raw_edf(dir / "a.edf", "C4", 0, 100, 0, 1, 2, 1, {1, 2});
        std::fstream f(dir / "a.edf", std::ios::in | std::ios::out | std::ios::binary);
        f.write("X", 1);
        f.close();
        expect_code(ErrorCode::ParseError, [&] { read_edf(dir / "a.edf", Channel::C4); });
    }
    SUBCASE("truncated data")
    {
        write_raw_edf(dir / "a.edf", "C4", 0, 100, 0, 1, 4, 3, {1, 2, 3, 4, 5});
        expect_code(ErrorCode::ParseError, [&] { read_edf(dir / "a.edf", Channel::C4); });
    }
    SUBCASE("short file")
    {
        std::ofstream(dir / "a.edf") << "0       ";
        expect_code(ErrorCode::ParseError, [&] { read_edf(dir / "a.edf", Channel::C4); });
    }
    SUBCASE("missing file")
    {
        expect_code(ErrorCode::IoError, [&] { read_edf(dir / "none.edf", Channel::C4); });
    }
}

TEST_CASE("unknown record count is taken from the file size")
{
    TempDir dir("edf");
    write_raw_edf(dir / "a.edf", "C4", 0, 100, 0, 100, 2, -1, {1, 2, 3, 4, 5, 6});
    auto rec = read_edf(dir / "a.edf", Channel::C4);
    CHECK(rec.samples.size() == 6);
}

TEST_CASE("10 Hz sine at 512 Hz round-trips within one LSB")
{
    TempDir dir("edf");
    auto rec = testing::recording(testing::sine(10, 512, 512 * 20), 512);
    write_edf(rec, dir / "s.edf");
    auto back = read_edf(dir / "s.edf", Channel::Fp2);
    REQUIRE(back.samples.size() == rec.samples.size());
    CHECK(back.fs == 512.0);
    const double q = lsb(dir / "s.edf");
    double worst = 0;
    for (std::size_t i = 0; i < rec.samples.size(); ++i)
        worst = std::max(worst, std::abs(back.samples[i] - rec.samples[i]));
    CHECK(worst <= q);
}

TEST_CASE("constant 5 uV for 10 s at 128 Hz")
{
    TempDir dir("edf");
    write_edf(testing::recording(std::vector<double>(1280, 5.0), 128), dir / "c.edf");
    auto back = read_edf(dir / "c.edf", Channel::Fp2);
    REQUIRE(back.samples.size() == 1280);
    const double q = lsb(dir / "c.edf");
    for (double v : back.samples)
        CHECK(std::abs(v - 5.0) <= q);
}

TEST_CASE("write_edf errors")
{
    TempDir dir("edf");
    expect_code(ErrorCode::InvalidSignal, [&] { write_edf(testing::recording({}, 128), dir / "e.edf"); });
    expect_code(ErrorCode::InvalidSignal,
                [&] { write_edf(testing::recording({1.0, std::nan(""), 2.0}, 128), dir / "e.edf"); });
    expect_code(ErrorCode::InvalidSignal,
                [&] { write_edf(testing::recording({1.0, std::numeric_limits<double>::infinity()}, 128), dir / "e.edf"); });
    expect_code(ErrorCode::IoError,
                [&] { write_edf(testing::recording({1.0, 2.0}, 128), dir / "no" / "such" / "dir" / "e.edf"); });
}

TEST_CASE("file size follows the EDF layout and the last record is padded")
{
    TempDir dir("edf");
    auto rec = testing::recording(testing::sine(3, 100, 250, 40), 100);
    write_edf(rec, dir / "p.edf");
    // 250 samples at 100 Hz -> 3 one-second records of 100 samples
    CHECK(std::filesystem::file_size(dir / "p.edf") == 256 + 256 + 3 * 100 * 2);
    auto h = read_edf_header(dir / "p.edf");
    CHECK(h.num_records == 3);
    CHECK(h.header_bytes() == 512);
    CHECK(read_edf(dir / "p.edf", Channel::Fp2).samples.size() == 250);
}

TEST_CASE("two-signal file keeps channels apart")
{
    TempDir dir("edf");
    std::vector<Recording> recs = {testing::recording(testing::sine(5, 64, 640, 30), 64, Channel::Fp2),
                                   testing::recording(testing::sine(9, 64, 640, 70), 64, Channel::C4)};
    write_edf(recs, dir / "two.edf");
    CHECK(std::filesystem::file_size(dir / "two.edf") == 256 + 2 * 256 + 10 * 2 * 64 * 2);
    auto a = read_edf(dir / "two.edf", Channel::Fp2);
    auto b = read_edf(dir / "two.edf", Channel::C4);
    CHECK(testing::fitted_amplitude(a.samples, 5, 64) == doctest::Approx(30).epsilon(1e-3));
    CHECK(testing::fitted_amplitude(b.samples, 9, 64) == doctest::Approx(70).epsilon(1e-3));
}

TEST_CASE("session arithmetic across midnight")
{
    CHECK(session_seconds({22, 19, 6}, {6, 38, 36}) == 29970);
    CHECK(session_seconds({1, 0, 0}, {2, 0, 0}) == 3600);
    CHECK(session_seconds({0, 0, 0}, {0, 0, 0}) == 0);
}

TEST_CASE("property: random recordings round-trip within one LSB")
{
    TempDir dir("edf");
    Rng rng(2024);
    for (int trial = 0; trial < 25; ++trial) {
        const double fs = static_cast<double>(1 + rng.below(300));
        const std::size_t n = 1 + rng.below(2000);
        const double scale = std::pow(10.0, rng.uniform(-2, 3));
        std::vector<double> x(n);
        for (auto& v : x)
            v = scale * rng.normal() + rng.uniform(-5, 5);
        write_edf(testing::recording(x, fs), dir / "r.edf");
        auto back = read_edf(dir / "r.edf", Channel::Fp2);
        REQUIRE(back.samples.size() == n);
        CHECK(back.fs == fs);
        const double q = lsb(dir / "r.edf");
        for (std::size_t i = 0; i < n; ++i)
            REQUIRE(std::abs(back.samples[i] - x[i]) <= q);
    }
}

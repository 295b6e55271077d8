#include "helpers.hpp"

#include "insomnet/edf.hpp"
#include "insomnet/error.hpp"

#include <doctest.h>

#include <complex>

using namespace insomnet;

namespace {

double normalized_xcorr(const std::vector<double>& a, const std::vector<double>& b, std::size_t skip)
{
    double ab = 0, aa = 0, bb = 0;
    for (std::size_t i = skip; i + skip < a.size(); ++i) {
        ab += a[i] * b[i];
        aa += a[i] * a[i];
        bb += b[i] * b[i];
    }
    return ab / std::sqrt(aa * bb);
}

// Slow DFT magnitude peak; only used on short test signals.
std::size_t dominant_bin(const std::vector<double>& x)
{
    const std::size_t n = x.size();
    std::size_t best = 0;
    double best_mag = -1;
    for (std::size_t k = 1; k < n / 2; ++k) {
        std::complex<double> acc = 0;
        for (std::size_t i = 0; i < n; ++i)
            acc += x[i] * std::polar(1.0, -2.0 * std::numbers::pi * double(k * i % n) / double(n));
        if (std::abs(acc) > best_mag) {
            best_mag = std::abs(acc);
            best = k;
        }
    }
    return best;
}

} // namespace

TEST_CASE("rational ratios")
{
    auto r = rational_ratio(1450, 128);
    CHECK(r.up == 64);
    CHECK(r.down == 725);
    r = rational_ratio(512, 128);
    CHECK(r.up == 1);
    CHECK(r.down == 4);
    r = rational_ratio(100, 128);
    CHECK(r.up == 32);
    CHECK(r.down == 25);
    CHECK_THROWS_AS(rational_ratio(std::sqrt(2.0) * 1000, 128), Error);
    CHECK_THROWS_AS(rational_ratio(128, 0), Error);
    try {
        rational_ratio(std::numbers::pi * 1000, 128);
        FAIL("irrational ratio accepted");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::UnsupportedRate);
    }
}

TEST_CASE("identity rate returns the input unchanged")
{
    auto rec = testing::recording(testing::sine(3, 128, 1000), 128);
    auto out = resample(rec, 128);
    CHECK(out.samples == rec.samples);
    CHECK(out.fs == 128);
}

TEST_CASE("512 -> 128 Hz keeps a 10 Hz sine")
{
    const std::size_t n = 512 * 30 + 3;
    auto out = resample(testing::recording(testing::sine(10, 512, n), 512), 128);
    CHECK(out.samples.size() == (n + 3) / 4);
    CHECK(out.fs == 128);
    auto ideal = testing::sine(10, 128, out.samples.size());
    CHECK(normalized_xcorr(out.samples, ideal, 128) > 0.999);
}

TEST_CASE("1450 -> 128 Hz keeps a 20 Hz sine within 2 %")
{
    const std::size_t n = 1450 * 20;
    auto out = resample(testing::recording(testing::sine(20, 1450, n), 1450), 128);
    CHECK(out.samples.size() == static_cast<std::size_t>(std::ceil(n * 64.0 / 725.0)));
    CHECK(testing::fitted_amplitude(out.samples, 20, 128, 128) == doctest::Approx(1.0).epsilon(0.02));
    CHECK(out.duration == doctest::Approx(20.0).epsilon(1.0 / 128 / 20));
}

TEST_CASE("anti-aliasing removes content above the new Nyquist")
{
    // 100 Hz at 512 Hz would alias to 28 Hz at 128 Hz
    auto out = resample(testing::recording(testing::sine(100, 512, 512 * 10), 512), 128);
    CHECK(testing::fitted_amplitude(out.samples, 28, 128, 128) < 1e-3);
}

TEST_CASE("bad target rate")
{
    auto rec = testing::recording(testing::sine(3, 128, 100), 128);
    CHECK_THROWS_AS(resample(rec, 0), Error);
    CHECK_THROWS_AS(resample(rec, -5), Error);
}

TEST_CASE("property: dominant frequency is preserved")
{
    Rng rng(5);
    for (int trial = 0; trial < 6; ++trial) {
        const double fin = trial % 2 ? 512 : 200;
        const double f = rng.uniform(1, 55);
        auto out = resample(testing::recording(testing::sine(f, fin, static_cast<std::size_t>(fin * 4)), fin), 128);
        const double bin = 128.0 / static_cast<double>(out.samples.size());
        CHECK(std::abs(dominant_bin(out.samples) * bin - f) <= bin);
    }
}

TEST_CASE("property: resampling is linear")
{
    Rng rng(11);
    std::vector<double> x(3000), y(3000), mix(3000);
    const double a = 2.5, b = -0.75;
    for (std::size_t i = 0; i < x.size(); ++i) {
        x[i] = rng.normal() * 10;
        y[i] = rng.normal() * 3;
        mix[i] = a * x[i] + b * y[i];
    }
    auto rx = resample_poly(x, {32, 25});
    auto ry = resample_poly(y, {32, 25});
    auto rm = resample_poly(mix, {32, 25});
    double scale = 0;
    for (double v : rm)
        scale = std::max(scale, std::abs(v));
    for (std::size_t i = 0; i < rm.size(); ++i)
        REQUIRE(std::abs(rm[i] - (a * rx[i] + b * ry[i])) <= 1e-9 * scale);
}

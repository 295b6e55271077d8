#pragma once

#include "insomnet/edf.hpp"
#include "insomnet/random.hpp"

#include <cmath>
#include <filesystem>
#include <numbers>
#include <unistd.h>
#include <string>
#include <vector>

namespace testing {

inline std::vector<double> sine(double freq, double fs, std::size_t n, double amplitude = 1.0, double phase = 0.0)
{
    std::vector<double> x(n);
    for (std::size_t i = 0; i < n; ++i)
        x[i] = amplitude * std::sin(2.0 * std::numbers::pi * freq * static_cast<double>(i) / fs + phase);
    return x;
}

inline insomnet::Recording recording(std::vector<double> samples, double fs,
                                     insomnet::Channel ch = insomnet::Channel::Fp2)
{
    insomnet::Recording r;
    r.subject_id = "T";
    r.channel = ch;
    r.fs = fs;
    r.duration = static_cast<double>(samples.size()) / fs;
    r.samples = std::move(samples);
    return r;
}

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag)
    {
        static int counter = 0;
        path_ = std::filesystem::temp_directory_path() /
                ("insomnet_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir()
    {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

/// Amplitude of the best-fit sinusoid at `freq` (least squares on sin/cos).
inline double fitted_amplitude(const std::vector<double>& x, double freq, double fs, std::size_t skip = 0)
{
    double ss = 0, sc = 0, cc = 0, xs = 0, xc = 0;
    for (std::size_t i = skip; i < x.size(); ++i) {
        const double w = 2.0 * std::numbers::pi * freq * static_cast<double>(i) / fs;
        const double s = std::sin(w), c = std::cos(w);
        ss += s * s;
        sc += s * c;
        cc += c * c;
        xs += x[i] * s;
        xc += x[i] * c;
    }
    const double det = ss * cc - sc * sc;
    const double a = (xs * cc - xc * sc) / det;
    const double b = (xc * ss - xs * sc) / det;
    return std::hypot(a, b);
}

/// Two-tailed Student-t tail probability by composite Simpson integration of
/// the density over [0, |t|]; independent of the incomplete-beta path.
inline double t_tail_by_quadrature(double t, double dof)
{
    const double c = std::exp(std::lgamma((dof + 1) / 2) - std::lgamma(dof / 2)) / std::sqrt(dof * std::numbers::pi);
    auto density = [&](double x) { return c * std::pow(1.0 + x * x / dof, -(dof + 1) / 2); };
    const double a = std::abs(t);
    const int n = 20000;
    const double h = a / n;
    double sum = density(0) + density(a);
    for (int i = 1; i < n; ++i)
        sum += density(i * h) * (i % 2 ? 4 : 2);
    const double central = sum * h / 3.0; // P(0 < T < |t|)
    return 1.0 - 2.0 * central;
}

} // namespace testing

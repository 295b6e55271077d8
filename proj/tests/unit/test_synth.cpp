#include "helpers.hpp"

#include "insomnet/error.hpp"
#include "insomnet/features.hpp"
#include "insomnet/preprocess.hpp"
#include "insomnet/synth.hpp"

#include <doctest.h>

#include <fstream>

using namespace insomnet;

namespace {

double mean_feature(const std::vector<FeatureVector>& rows, Feature f)
{
    double s = 0;
    for (const auto& r : rows)
        s += r[f];
    return s / static_cast<double>(rows.size());
}

std::vector<FeatureVector> features_of(const SubjectProfile& p, double duration)
{
    auto [rec, hyp] = generate_subject(p, duration, 128.0);
    return extract_all(filter_signal(rec, FilterSpec{}), hyp, {}, p.label);
}

} // namespace

TEST_CASE("same seed, same subject")
{
    auto p = default_profile(Label::Insomnia);
    p.seed = 77;
    auto [a, ha] = generate_subject(p, 600, 128);
    auto [b, hb] = generate_subject(p, 600, 128);
    CHECK(a.samples == b.samples);
    CHECK(ha.stages == hb.stages);
    CHECK(a.samples.size() == 600 * 128);
    CHECK(ha.stages.size() == 20);
    p.seed = 78;
    CHECK(generate_subject(p, 600, 128).first.samples != a.samples);
}

TEST_CASE("hypnogram hits the sleep efficiency target")
{
    for (double target : {50.0, 65.0, 80.0, 90.0, 97.0}) {
        for (std::uint64_t seed = 1; seed <= 5; ++seed) {
            auto p = default_profile(Label::Healthy);
            p.sleep_efficiency_target = target;
            auto h = generate_hypnogram(p, 960, seed);
            REQUIRE(h.stages.size() == 960);
            INFO("target " << target << " seed " << seed);
            CHECK(std::abs(sleep_features(h).sleep_efficiency - target) <= 2.0);
        }
    }
}

TEST_CASE("class profiles separate on the expected features")
{
    auto h = default_profile(Label::Healthy);
    auto i = default_profile(Label::Insomnia);
    h.seed = 5;
    i.seed = 6;
    auto fh = features_of(h, 1800);
    auto fi = features_of(i, 1800);
    REQUIRE(fh.size() > 100);
    REQUIRE(fi.size() > 100);
    CHECK(mean_feature(fi, Feature::RelBeta) > mean_feature(fh, Feature::RelBeta));
    CHECK(mean_feature(fh, Feature::SlowWavePower) > mean_feature(fi, Feature::SlowWavePower));
    CHECK(mean_feature(fh, Feature::SleepEfficiency) > mean_feature(fi, Feature::SleepEfficiency));
}

TEST_CASE("synthetic signals stay under the artifact threshold")
{
    for (auto label : {Label::Healthy, Label::Insomnia}) {
        auto p = default_profile(label);
        p.seed = 9;
        auto [rec, hyp] = generate_subject(p, 1200, 128);
        auto epochs = prepare_epochs(filter_signal(rec, FilterSpec{}), ExtractConfig{});
        std::size_t rejected = 0;
        for (const auto& e : epochs)
            rejected += e.rejected;
        CHECK(rejected == 0);
    }
}

TEST_CASE("cohort files and manifest")
{
    testing::TempDir dir("cohort");
    CohortOptions opt;
    opt.duration = 420;
    opt.fs = 128;
    auto rows = generate_cohort(2, 2, 7, dir.path(), opt);
    REQUIRE(rows.size() == 4);
    std::size_t edf = 0, hyp = 0;
    for (const auto& e : std::filesystem::directory_iterator(dir.path())) {
        const auto name = e.path().filename().string();
        edf += name.ends_with(".edf");
        hyp += name.ends_with(".hyp.csv");
    }
    CHECK(edf == 4);
    CHECK(hyp == 4);
    CHECK(rows[0].subject_id == "H001");
    CHECK(rows[3].subject_id == "I002");
    CHECK(rows[3].label == Label::Insomnia);

    auto back = read_manifest(dir / "manifest.csv");
    REQUIRE(back.size() == 4);
    for (std::size_t k = 0; k < 4; ++k) {
        CHECK(back[k].subject_id == rows[k].subject_id);
        CHECK(back[k].seed == rows[k].seed);
        CHECK(std::filesystem::equivalent(back[k].edf_path, rows[k].edf_path));
    }
    auto header = read_edf_header(rows[0].edf_path);
    CHECK(header.signals.size() == 2);
    auto rec = read_edf(rows[0].edf_path, Channel::C4);
    CHECK(rec.samples.size() == 420 * 128);

    CHECK_THROWS_AS(generate_cohort(0, 5, 7, dir / "none", opt), Error);
    CHECK_THROWS_AS(generate_cohort(5, 0, 7, dir / "none", opt), Error);
}

TEST_CASE("profiles file overrides the defaults")
{
    testing::TempDir dir("profiles");
    std::ofstream(dir / "p.toml") << "# test\n[healthy]\nbeta = 9.5\nsleep_efficiency = 93\n\n[insomnia]\nslow_wave_fraction = 0.1\n";
    auto p = load_profiles(dir / "p.toml");
    CHECK(p[0].band_amplitudes[static_cast<std::size_t>(SynthBand::Beta)] == 9.5);
    CHECK(p[0].sleep_efficiency_target == 93);
    CHECK(p[0].band_amplitudes[0] == default_profile(Label::Healthy).band_amplitudes[0]);
    CHECK(p[1].slow_wave_fraction == 0.1);
    CHECK(p[1].label == Label::Insomnia);

    std::ofstream(dir / "bad.toml") << "[healthy]\nwhatever = 1\n";
    CHECK_THROWS_AS(load_profiles(dir / "bad.toml"), Error);
}

#include "helpers.hpp"

#include "insomnet/error.hpp"
#include "insomnet/select.hpp"

#include <doctest.h>

#include <fstream>

using namespace insomnet;

namespace {

ErrorCode code_of(auto&& fn)
{
    try {
        fn();
    } catch (const Error& e) {
        return e.code();
    }
    FAIL("no error raised");
    return ErrorCode::ConfigError;
}

// Rows with a planted signal in REL_BETA and noise everywhere else.
std::vector<FeatureVector> planted(std::size_t n, std::uint64_t seed, double effect = 2.0)
{
    Rng rng(seed);
    std::vector<FeatureVector> rows(n);
    for (std::size_t r = 0; r < n; ++r) {
        auto& v = rows[r];
        v.subject_id = "S" + std::to_string(r % 20);
        v.label = r % 2 ? Label::Insomnia : Label::Healthy;
        for (auto& x : v.values)
            x = rng.normal() * 3 + 10;
        v[Feature::RelBeta] = (r % 2 ? effect : 0.0) + 0.3 * rng.normal();
    }
    return rows;
}

const FeatureStats& stat(const std::vector<FeatureStats>& stats, std::string_view name)
{
    for (const auto& s : stats)
        if (s.feature_name == name)
            return s;
    throw std::runtime_error("missing stat");
}

} // namespace

TEST_CASE("z-normalization")
{
    std::vector<FeatureVector> rows(2);
    for (std::size_t i = 0; i < kFeatureCount; ++i) {
        rows[0].values[i] = 1;
        rows[1].values[i] = 3;
    }
    ZNormParams p;
    auto z = znormalize(rows, &p);
    CHECK(z[0].values[4] == doctest::Approx(-1.0));
    CHECK(z[1].values[4] == doctest::Approx(1.0));

    SUBCASE("idempotent with the returned parameters")
    {
        // the returned transform reproduces the output, and refitting on
        // normalized data is the identity
        for (std::size_t r = 0; r < rows.size(); ++r)
            CHECK(p.apply(rows[r]).values == z[r].values);
        ZNormParams q;
        auto z2 = znormalize(z, &q);
        for (std::size_t i = 0; i < kFeatureCount; ++i) {
            CHECK(z2[0].values[i] == doctest::Approx(z[0].values[i]).epsilon(1e-12));
            CHECK(q.mean[i] == doctest::Approx(0.0).scale(1e-12));
            CHECK(q.std[i] == doctest::Approx(1.0).epsilon(1e-12));
        }
    }
    SUBCASE("1000 random rows")
    {
        Rng rng(99);
        std::vector<FeatureVector> many(1000);
        for (auto& v : many)
            for (std::size_t i = 0; i < kFeatureCount; ++i)
                v.values[i] = rng.normal() * double(i + 1) * 7 + double(i) * 100;
        auto out = znormalize(many);
        for (std::size_t i = 0; i < kFeatureCount; ++i) {
            double m = 0, s = 0;
            for (const auto& v : out)
                m += v.values[i];
            m /= 1000;
            for (const auto& v : out)
                s += (v.values[i] - m) * (v.values[i] - m);
            CHECK(std::abs(m) < 1e-9);
            CHECK(std::abs(std::sqrt(s / 1000) - 1.0) < 1e-9);
        }
    }
    SUBCASE("constant columns are flagged and zeroed")
    {
        rows[1].values[2] = 1;
        auto zz = znormalize(rows, &p);
        CHECK(p.constant[2]);
        CHECK(zz[0].values[2] == 0.0);
        CHECK(zz[1].values[2] == 0.0);
    }
    SUBCASE("too few rows")
    {
        rows.resize(1);
        CHECK(code_of([&] { znormalize(rows); }) == ErrorCode::InsufficientData);
    }
}

TEST_CASE("Welch t examples")
{
    std::vector<double> a = {1, 2, 3, 4, 5}, b = {2, 3, 4, 5, 6};
    auto t = welch_t(a, b);
    CHECK(t.t == doctest::Approx(-1.0).epsilon(1e-12));
    CHECK(t.dof == doctest::Approx(8.0).epsilon(1e-12));
    CHECK(welch_t(a, a).t == 0.0);
    std::vector<double> wide = {-7, 3, 13}, narrow = {2.9, 3, 3.1};
    CHECK(welch_t(wide, narrow).t == doctest::Approx(0.0).scale(1e-15));
    std::vector<double> one = {1};
    CHECK(code_of([&] { welch_t(one, b); }) == ErrorCode::InsufficientData);
}

TEST_CASE("Welch dof against a hand evaluation")
{
    // unequal sizes and variances: var(a) = 2.5, var(b) = 10 / 3
    std::vector<double> a = {1, 2, 3, 4, 5}, b = {10, 12, 14};
    const double va = 2.5 / 5, vb = 4.0 / 3;
    const double dof = (va + vb) * (va + vb) / (va * va / 4 + vb * vb / 2);
    auto t = welch_t(a, b);
    CHECK(t.t == doctest::Approx((3.0 - 12.0) / std::sqrt(va + vb)).epsilon(1e-12));
    CHECK(t.dof == doctest::Approx(dof).epsilon(1e-12));
}

TEST_CASE("p-values against independent oracles")
{
    CHECK(p_value(0.0, 5) == 1.0);
    // frozen from arbitrary-precision quadrature of the t density
    CHECK(p_value(1.0, 8) == doctest::Approx(0.34659350708733425).epsilon(1e-12));
    CHECK(p_value(2.5, 12.3) == doctest::Approx(0.027492775039948715).epsilon(1e-10));
    CHECK(p_value(0.3, 3) == doctest::Approx(0.78376329203991904).epsilon(1e-12));
    CHECK(p_value(12, 30) == doctest::Approx(5.5801854151992561e-13).epsilon(1e-8));
    CHECK(p_value(12, 30) < 1e-9);
    CHECK(p_value(1.0, 8) == doctest::Approx(0.3466).epsilon(0.001 / 0.3466));

    for (double dof : {2.0, 4.5, 8.0, 30.0, 200.0})
        for (double t : {0.1, 0.7, 1.5, 2.2, 3.9})
            CHECK(p_value(t, dof) == doctest::Approx(testing::t_tail_by_quadrature(t, dof)).epsilon(1e-8));

    CHECK(p_value(-2.0, 10) == p_value(2.0, 10));
    CHECK(p_value(HUGE_VAL, 10) == 0.0);
    CHECK(code_of([] { p_value(1.0, 0.0); }) == ErrorCode::InsufficientData);
}

TEST_CASE("p decreases as |t| grows")
{
    for (double dof : {3.0, 17.0, 500.0}) {
        double prev = 1.0;
        for (double t = 0.05; t < 20; t += 0.05) {
            const double p = p_value(t, dof);
            REQUIRE(p < prev);
            prev = p;
        }
    }
}

TEST_CASE("critical values")
{
    CHECK(t_critical(0.05, 8) == doctest::Approx(2.306004135204166).epsilon(1e-12));
    CHECK(t_critical(0.05, 30) == doctest::Approx(2.0422724563012373).epsilon(1e-12));
    CHECK(t_critical(0.05, 1000) == doctest::Approx(1.9623390808264074).epsilon(1e-12));
    for (double dof : {5.0, 40.0})
        CHECK(p_value(t_critical(0.05, dof), dof) == doctest::Approx(0.05).epsilon(1e-10));
}

TEST_CASE("point-biserial correlation")
{
    std::vector<int> labels = {0, 1, 0, 1, 1, 0};
    std::vector<double> same(labels.begin(), labels.end()), flipped;
    for (int l : labels)
        flipped.push_back(1.0 - l);
    CHECK(point_biserial(same, labels) == doctest::Approx(1.0));
    CHECK(point_biserial(flipped, labels) == doctest::Approx(-1.0));

    Rng rng(1234);
    std::vector<double> noise(10000);
    std::vector<int> lab(10000);
    for (std::size_t i = 0; i < noise.size(); ++i) {
        noise[i] = rng.normal();
        lab[i] = static_cast<int>(rng.below(2));
    }
    CHECK(std::abs(point_biserial(noise, lab)) < 0.05);

    std::vector<int> single(6, 1);
    CHECK(code_of([&] { point_biserial(same, single); }) == ErrorCode::InsufficientData);
}

TEST_CASE("selection rules")
{
    SelectionConfig cfg;
    SUBCASE("planted signal is top, noise is rejected")
    {
        auto stats = compute_stats(planted(400, 3));
        auto names = apply_rules(stats, cfg);
        CHECK(stat(stats, "REL_BETA").tier == Tier::Top);
        CHECK(stat(stats, "ZCR").tier == Tier::Rejected);
        CHECK(names == std::vector<std::string>{"REL_BETA"});
    }
    SUBCASE("p = 0.9 is rejected whatever t and r say")
    {
        std::vector<FeatureStats> stats(1);
        stats[0] = {"X", 50.0, 100.0, 0.9, 0.99, Tier::Top, false};
        CHECK(code_of([&] { apply_rules(stats, cfg); }) == ErrorCode::NoFeaturesSelected);
        CHECK(stats[0].tier == Tier::Rejected);
    }
    SUBCASE("optimal tier")
    {
        std::vector<FeatureStats> stats(2);
        stats[0] = {"MEAN", 3.0, 100.0, 0.01, 0.4, Tier::Rejected, false};
        stats[1] = {"STD", 3.0, 100.0, 0.01, 0.6, Tier::Rejected, false};
        auto names = apply_rules(stats, cfg);
        CHECK(stats[0].tier == Tier::Optimal);
        CHECK(stats[1].tier == Tier::Top);
        CHECK(names == std::vector<std::string>{"MEAN", "STD"});
    }
    SUBCASE("fixed 20-name set")
    {
        cfg.use_fixed_set = true;
        auto stats = compute_stats(planted(100, 4));
        auto names = apply_rules(stats, cfg);
        CHECK(names.size() == 20);
        const std::vector<std::string> expected = {
            "MEAN", "ZCR", "HJORTH_MOBILITY", "HJORTH_COMPLEXITY", "TOTAL_POWER", "SLOW_WAVE_POWER", "REL_DELTA",
            "REL_SIGMA", "REL_BETA", "REL_GAMMA", "RATIO_DELTA_THETA", "RATIO_DELTA_ALPHA", "RATIO_DELTA_GAMMA",
            "RATIO_DELTA_BETA", "RATIO_THETA_ALPHA", "RATIO_THETA_BETA", "RATIO_ALPHA_GAMMA", "RATIO_ALPHA_BETA",
            "SLEEP_EFFICIENCY", "TOTAL_SLEEP_TIME"};
        CHECK(names == expected);
    }
    SUBCASE("config invariants")
    {
        cfg.alpha_top = 0.8;
        CHECK(code_of([&] { cfg.validate(); }) == ErrorCode::ConfigError);
        cfg = {};
        cfg.r_optimal = 0.6;
        CHECK(code_of([&] { cfg.validate(); }) == ErrorCode::ConfigError);
    }
}

TEST_CASE("property: selection is invariant to affine rescaling")
{
    auto rows = planted(300, 8, 0.4);
    auto stats = compute_stats(rows);
    apply_rules(stats, {});
    Rng rng(2);
    for (auto& v : rows)
        for (std::size_t i = 0; i < kFeatureCount; ++i)
            v.values[i] = v.values[i] * (i % 2 ? -4.5 : 0.01) + 1000.0 * double(i);
    auto scaled = compute_stats(rows);
    apply_rules(scaled, {});
    for (std::size_t i = 0; i < kFeatureCount; ++i) {
        CHECK(scaled[i].tier == stats[i].tier);
        CHECK(std::abs(scaled[i].t_stat) == doctest::Approx(std::abs(stats[i].t_stat)).epsilon(1e-7));
        CHECK(scaled[i].p_value == doctest::Approx(stats[i].p_value).epsilon(1e-6));
        CHECK(std::abs(scaled[i].r_pb) == doctest::Approx(std::abs(stats[i].r_pb)).epsilon(1e-9));
    }
}

TEST_CASE("property: normalizing first does not change the statistics")
{
    auto rows = planted(200, 9, 0.5);
    auto raw = compute_stats(rows);
    auto normalized = compute_stats(znormalize(rows));
    for (std::size_t i = 0; i < kFeatureCount; ++i) {
        CHECK(normalized[i].t_stat == doctest::Approx(raw[i].t_stat).epsilon(1e-9));
        CHECK(normalized[i].r_pb == doctest::Approx(raw[i].r_pb).epsilon(1e-9));
    }
}

TEST_CASE("property: shuffled labels select nothing")
{
    auto rows = planted(1000, 10);
    Rng rng(31337);
    std::array<int, kFeatureCount> rejected{};
    for (int run = 0; run < 20; ++run) {
        std::vector<std::size_t> idx(rows.size());
        for (std::size_t i = 0; i < idx.size(); ++i)
            idx[i] = i;
        rng.shuffle(idx);
        auto shuffled = rows;
        for (std::size_t i = 0; i < rows.size(); ++i)
            shuffled[i].label = rows[idx[i]].label;
        auto stats = compute_stats(shuffled);
        try {
            apply_rules(stats, {});
        } catch (const Error&) {
        }
        for (std::size_t i = 0; i < kFeatureCount; ++i)
            rejected[i] += stats[i].tier == Tier::Rejected;
    }
    for (std::size_t i = 0; i < kFeatureCount; ++i) {
        INFO(feature_names()[i]);
        CHECK(rejected[i] >= 19);
    }
}

TEST_CASE("per-subject means")
{
    auto rows = planted(40, 12);
    auto means = subject_means(rows);
    CHECK(means.size() == 20);
    double expected = (rows[0].values[3] + rows[20].values[3]) / 2;
    CHECK(means[0].values[3] == doctest::Approx(expected));
    CHECK(means[0].subject_id == "S0");
}

TEST_CASE("stats and selection files")
{
    testing::TempDir dir("sel");
    auto stats = compute_stats(planted(100, 5));
    apply_rules(stats, {});
    write_feature_stats_csv(stats, dir / "s.csv", "c");
    std::ifstream in(dir / "s.csv");
    std::string line;
    std::getline(in, line);
    CHECK(line == "# c");
    std::getline(in, line);
    CHECK(line == "feature,t,dof,p,r_pb,tier");

    std::vector<std::string> names = {"ZCR", "REL_BETA"};
    write_selected(names, dir / "sel.txt");
    CHECK(read_selected(dir / "sel.txt") == names);
}

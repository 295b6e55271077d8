#include "helpers.hpp"

#include "insomnet/metrics.hpp"

#include <doctest.h>

using namespace insomnet;

namespace {

// Straight from the definitions, nothing shared with the library.
double f1_brute(const std::vector<int>& y, const std::vector<int>& p)
{
    double tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        tp += y[i] == 1 && p[i] == 1;
        fp += y[i] == 0 && p[i] == 1;
        fn += y[i] == 1 && p[i] == 0;
    }
    const double prec = tp / (tp + fp), rec = tp / (tp + fn);
    return 2 * prec * rec / (prec + rec);
}

} // namespace

TEST_CASE("worked confusion example")
{
    ConfusionMatrix cm{50, 49, 0, 1};
    CHECK(*accuracy(cm) == doctest::Approx(0.99));
    CHECK(*precision(cm) == 1.0);
    CHECK(*recall(cm) == doctest::Approx(50.0 / 51));
    CHECK(*f1(cm) == doctest::Approx(100.0 / 101));
    // po = 0.99, pe = (51*50 + 49*50) / 100^2 = 0.5
    CHECK(*cohens_kappa(cm) == doctest::Approx(0.98));
}

TEST_CASE("perfect classifier and undefined metrics")
{
    std::vector<int> y = {1, 0, 1, 1, 0};
    auto cm = confusion(y, y);
    auto m = all_metrics(cm);
    CHECK(*m.accuracy == 1.0);
    CHECK(*m.f1 == 1.0);
    CHECK(*m.kappa == 1.0);

    std::vector<int> none = {0, 0, 0, 0, 0};
    auto never = confusion(y, none);
    CHECK_FALSE(precision(never).has_value());
    CHECK(*recall(never) == 0.0);
    CHECK_FALSE(f1(never).has_value());
    CHECK(format_metric(precision(never)) == "undefined");

    CHECK_FALSE(accuracy(ConfusionMatrix{}).has_value());
    // everything one class on both sides: pe = 1
    CHECK_FALSE(cohens_kappa(ConfusionMatrix{0, 10, 0, 0}).has_value());
}

TEST_CASE("kappa examples")
{
    CHECK(*cohens_kappa(ConfusionMatrix{45, 40, 10, 5}) == doctest::Approx(0.7));
    // rater independence: proportional cells give exactly zero
    CHECK(*cohens_kappa(ConfusionMatrix{4, 9, 6, 6}) == 0.0);
    CHECK(*cohens_kappa(ConfusionMatrix{25, 25, 25, 25}) == 0.0);
}

TEST_CASE("confusion tallies and input checks")
{
    std::vector<int> y = {1, 1, 0, 0, 1};
    std::vector<int> p = {1, 0, 0, 1, 1};
    auto cm = confusion(y, p);
    CHECK(cm.tp == 2);
    CHECK(cm.fn == 1);
    CHECK(cm.tn == 1);
    CHECK(cm.fp == 1);
    std::vector<int> shorter = {1};
    CHECK_THROWS(confusion(y, shorter));
}

TEST_CASE("metric properties")
{
    insomnet::Rng rng(31);
    for (int trial = 0; trial < 300; ++trial) {
        ConfusionMatrix cm{rng.below(50), rng.below(50), rng.below(50), rng.below(50)};
        if (cm.total() == 0)
            continue;
        auto k = cohens_kappa(cm);
        auto a = accuracy(cm);
        CHECK(*a >= 0.0);
        CHECK(*a <= 1.0);
        if (k)
            CHECK(*k <= 1.0 + 1e-12);
        // swapping the positive class leaves accuracy and kappa unchanged
        auto s = cm.swapped();
        CHECK(*accuracy(s) == doctest::Approx(*a).epsilon(1e-14));
        if (k)
            CHECK(*cohens_kappa(s) == doctest::Approx(*k).epsilon(1e-12));
        // precision of one view is the negative predictive value of the other
        if (precision(s))
            CHECK(*precision(s) == doctest::Approx(double(cm.tn) / (cm.tn + cm.fn)));
        // scaling every cell is a no-op for all ratios
        ConfusionMatrix big{cm.tp * 7, cm.tn * 7, cm.fp * 7, cm.fn * 7};
        CHECK(*accuracy(big) == doctest::Approx(*a).epsilon(1e-14));
        if (k)
            CHECK(*cohens_kappa(big) == doctest::Approx(*k).epsilon(1e-12));
        if (auto f = f1(cm))
            CHECK(*f1(big) == doctest::Approx(*f).epsilon(1e-14));
    }
}

TEST_CASE("F1 against a brute-force count")
{
    insomnet::Rng rng(32);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<int> y(100), p(100);
        for (std::size_t i = 0; i < y.size(); ++i) {
            y[i] = static_cast<int>(rng.below(2));
            p[i] = static_cast<int>(rng.below(2));
        }
        y[0] = p[0] = 1; // keeps F1 defined
        CHECK(*f1(confusion(y, p)) == doctest::Approx(f1_brute(y, p)).epsilon(1e-12));
    }
}

#include "insomnet/metrics.hpp"

#include "insomnet/csv.hpp"
#include "insomnet/error.hpp"

namespace insomnet {

ConfusionMatrix confusion(std::span<const int> truth, std::span<const int> predicted)
{
    if (truth.size() != predicted.size())
        throw Error(ErrorCode::ShapeError, "truth and prediction lengths differ");
    ConfusionMatrix cm;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        if (truth[i])
            ++(predicted[i] ? cm.tp : cm.fn);
        else
            ++(predicted[i] ? cm.fp : cm.tn);
    }
    return cm;
}

std::optional<double> accuracy(const ConfusionMatrix& cm)
{
    if (cm.total() == 0)
        return std::nullopt;
    return static_cast<double>(cm.tp + cm.tn) / static_cast<double>(cm.total());
}

std::optional<double> precision(const ConfusionMatrix& cm)
{
    if (cm.tp + cm.fp == 0)
        return std::nullopt;
    return static_cast<double>(cm.tp) / static_cast<double>(cm.tp + cm.fp);
}

std::optional<double> recall(const ConfusionMatrix& cm)
{
    if (cm.tp + cm.fn == 0)
        return std::nullopt;
    return static_cast<double>(cm.tp) / static_cast<double>(cm.tp + cm.fn);
}

std::optional<double> f1(const ConfusionMatrix& cm)
{
    auto p = precision(cm);
    auto r = recall(cm);
    if (!p || !r || *p + *r == 0.0)
        return std::nullopt;
    return 2.0 * *p * *r / (*p + *r);
}

std::optional<double> cohens_kappa(const ConfusionMatrix& cm)
{
    if (cm.total() == 0)
        return std::nullopt;
    // kappa = (n (tp + tn) - S) / (n^2 - S) with S the chance products, all
    // in integers so independent raters give exactly 0.
    const unsigned __int128 n = cm.total();
    const unsigned __int128 s = static_cast<unsigned __int128>(cm.tp + cm.fp) * (cm.tp + cm.fn) +
                                static_cast<unsigned __int128>(cm.fn + cm.tn) * (cm.fp + cm.tn);
    const unsigned __int128 agree = n * (cm.tp + cm.tn);
    if (s == n * n)
        return std::nullopt;
    const double num = agree >= s ? static_cast<double>(agree - s) : -static_cast<double>(s - agree);
    return num / static_cast<double>(n * n - s);
}

MetricRow all_metrics(const ConfusionMatrix& cm)
{
    return {accuracy(cm), precision(cm), recall(cm), f1(cm), cohens_kappa(cm)};
}

std::string format_metric(const std::optional<double>& value)
{
    return value ? csv::format(*value) : "undefined";
}

} // namespace insomnet

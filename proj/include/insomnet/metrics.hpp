#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>

namespace insomnet {

/// Binary confusion counts with insomnia as the positive class.
struct ConfusionMatrix {
    std::uint64_t tp = 0, tn = 0, fp = 0, fn = 0;

    std::uint64_t total() const { return tp + tn + fp + fn; }
    /// Same counts seen with the other class as positive.
    ConfusionMatrix swapped() const { return {tn, tp, fn, fp}; }
};

/// Tallies predictions against truth (1 = insomnia).
ConfusionMatrix confusion(std::span<const int> truth, std::span<const int> predicted);

// An empty optional means the metric is undefined (zero denominator),
// which is reported as such rather than as 0.
std::optional<double> accuracy(const ConfusionMatrix& cm);
std::optional<double> precision(const ConfusionMatrix& cm);
std::optional<double> recall(const ConfusionMatrix& cm);
std::optional<double> f1(const ConfusionMatrix& cm);
std::optional<double> cohens_kappa(const ConfusionMatrix& cm);

struct MetricRow {
    std::optional<double> accuracy, precision, recall, f1, kappa;
};

MetricRow all_metrics(const ConfusionMatrix& cm);

/// "undefined" for an empty optional.
std::string format_metric(const std::optional<double>& value);

} // namespace insomnet

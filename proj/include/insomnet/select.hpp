#pragma once

#include "insomnet/features.hpp"

#include <array>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace insomnet {

enum class Tier { Top, Optimal, Rejected };

std::string_view to_string(Tier tier);

struct FeatureStats {
    std::string feature_name;
    double t_stat = 0.0;
    double dof = 0.0;
    double p_value = 1.0;
    double r_pb = 0.0;
    Tier tier = Tier::Rejected;
    bool constant = false;
};

struct SelectionConfig {
    double alpha_top = 0.05;
    double p_optimal = 0.70;
    double r_top = 0.5;
    double r_optimal = 0.3;
    bool use_fixed_set = false;

    void validate() const;
};

/// Column means and population standard deviations of a training set.
struct ZNormParams {
    std::array<double, kFeatureCount> mean{};
    std::array<double, kFeatureCount> std{};
    std::array<bool, kFeatureCount> constant{};

    /// Constant columns map to 0.
    FeatureVector apply(FeatureVector v) const;
};

/// Requires at least two vectors. Zero-variance columns are flagged constant
/// rather than divided by zero.
ZNormParams fit_znorm(std::span<const FeatureVector> vectors);
std::vector<FeatureVector> znormalize(std::span<const FeatureVector> vectors, ZNormParams* params_out = nullptr);

struct TTest {
    double t = 0.0;
    double dof = 0.0;
};

/// Welch two-sample t (mean(a) - mean(b)) with Welch-Satterthwaite dof.
TTest welch_t(std::span<const double> a, std::span<const double> b);

/// Two-tailed Student-t tail probability via the regularized incomplete beta.
double p_value(double t, double dof);

/// Two-tailed critical value at significance alpha.
double t_critical(double alpha, double dof);

/// Pearson correlation between values and 0/1 labels.
double point_biserial(std::span<const double> values, std::span<const int> labels);

/// Statistics per feature over labelled rows (healthy = group a / label 0,
/// insomnia = group b / label 1). Constant features are flagged and rejected.
std::vector<FeatureStats> compute_stats(std::span<const FeatureVector> vectors);

/// Per-subject mean rows, in first-appearance order.
std::vector<FeatureVector> subject_means(std::span<const FeatureVector> vectors);

/// Assigns tiers in place and returns the selected names in canonical order.
std::vector<std::string> apply_rules(std::vector<FeatureStats>& stats, const SelectionConfig& config);

/// The fixed 20-feature set used to feed the classifier.
const std::vector<std::string>& fixed_feature_set();

void write_feature_stats_csv(std::span<const FeatureStats> stats, const std::filesystem::path& path,
                             const std::string& comment = {});
void write_selected(std::span<const std::string> names, const std::filesystem::path& path);
std::vector<std::string> read_selected(const std::filesystem::path& path);

} // namespace insomnet

#include "insomnet/select.hpp"

#include "insomnet/csv.hpp"
#include "insomnet/error.hpp"

#include <boost/math/distributions/students_t.hpp>
#include <boost/math/special_functions/beta.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>

namespace insomnet {

namespace {

struct Moments {
    double mean = 0.0;
    double var = 0.0; // sample variance (n - 1)
    double n = 0.0;
};

Moments moments(std::span<const double> x)
{
    Moments m;
    m.n = static_cast<double>(x.size());
    m.mean = std::accumulate(x.begin(), x.end(), 0.0) / m.n;
    double acc = 0.0;
    for (double v : x)
        acc += (v - m.mean) * (v - m.mean);
    m.var = acc / (m.n - 1.0);
    return m;
}

} // namespace

std::string_view to_string(Tier tier)
{
    switch (tier) {
    case Tier::Top: return "top";
    case Tier::Optimal: return "optimal";
    case Tier::Rejected: return "rejected";
    }
    return "rejected";
}

void SelectionConfig::validate() const
{
    if (!(alpha_top > 0.0 && alpha_top <= p_optimal && p_optimal <= 1.0))
        throw Error(ErrorCode::ConfigError, "selection requires 0 < alpha_top <= p_optimal <= 1");
    if (!(r_optimal >= 0.0 && r_optimal <= r_top && r_top <= 1.0))
        throw Error(ErrorCode::ConfigError, "selection requires 0 <= r_optimal <= r_top <= 1");
}

FeatureVector ZNormParams::apply(FeatureVector v) const
{
    for (std::size_t i = 0; i < kFeatureCount; ++i)
        v.values[i] = constant[i] ? 0.0 : (v.values[i] - mean[i]) / std[i];
    return v;
}

ZNormParams fit_znorm(std::span<const FeatureVector> vectors)
{
    if (vectors.size() < 2)
        throw Error(ErrorCode::InsufficientData, "z-normalization needs at least two vectors");
    ZNormParams p;
    const double n = static_cast<double>(vectors.size());
    for (std::size_t i = 0; i < kFeatureCount; ++i) {
        double sum = 0.0;
        for (const auto& v : vectors)
            sum += v.values[i];
        const double mean = sum / n;
        double acc = 0.0;
        for (const auto& v : vectors)
            acc += (v.values[i] - mean) * (v.values[i] - mean);
        p.mean[i] = mean;
        p.std[i] = std::sqrt(acc / n);
        p.constant[i] = !(p.std[i] > 1e-12 * std::max(1.0, std::abs(mean)));
    }
    return p;
}

std::vector<FeatureVector> znormalize(std::span<const FeatureVector> vectors, ZNormParams* params_out)
{
    auto params = fit_znorm(vectors);
    std::vector<FeatureVector> out;
    out.reserve(vectors.size());
    for (const auto& v : vectors)
        out.push_back(params.apply(v));
    if (params_out)
        *params_out = params;
    return out;
}

TTest welch_t(std::span<const double> a, std::span<const double> b)
{
    if (a.size() < 2 || b.size() < 2)
        throw Error(ErrorCode::InsufficientData, "each group needs at least two values");
    const auto ma = moments(a);
    const auto mb = moments(b);
    const double va = ma.var / ma.n;
    const double vb = mb.var / mb.n;
    const double se2 = va + vb;
    if (!(se2 > 0.0)) {
        // Both groups constant: identical means give t = 0, otherwise the
        // separation is unbounded.
        const double diff = ma.mean - mb.mean;
        return {diff == 0.0 ? 0.0 : std::copysign(HUGE_VAL, diff), ma.n + mb.n - 2.0};
    }
    TTest out;
    out.t = (ma.mean - mb.mean) / std::sqrt(se2);
    out.dof = se2 * se2 / (va * va / (ma.n - 1.0) + vb * vb / (mb.n - 1.0));
    return out;
}

double p_value(double t, double dof)
{
    if (!(dof > 0.0))
        throw Error(ErrorCode::InsufficientData, "degrees of freedom must be positive");
    if (std::isinf(t))
        return 0.0;
    if (t == 0.0)
        return 1.0;
    // P(|T| > t) = I_{dof/(dof+t^2)}(dof/2, 1/2)
    return boost::math::ibeta(dof / 2.0, 0.5, dof / (dof + t * t));
}

double t_critical(double alpha, double dof)
{
    boost::math::students_t dist(dof);
    return boost::math::quantile(boost::math::complement(dist, alpha / 2.0));
}

double point_biserial(std::span<const double> values, std::span<const int> labels)
{
    if (values.size() != labels.size() || values.size() < 2)
        throw Error(ErrorCode::InsufficientData, "need matching values and labels");
    const double n = static_cast<double>(values.size());
    const double ones = static_cast<double>(std::count(labels.begin(), labels.end(), 1));
    if (ones == 0.0 || ones == n)
        throw Error(ErrorCode::InsufficientData, "both classes must be present");
    const double mx = std::accumulate(values.begin(), values.end(), 0.0) / n;
    const double my = ones / n;
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) {
        const double dx = values[i] - mx;
        const double dy = labels[i] - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if (!(sxx > 0.0))
        throw Error(ErrorCode::DegenerateSignal, "feature has zero variance");
    return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

std::vector<FeatureStats> compute_stats(std::span<const FeatureVector> vectors)
{
    std::vector<int> labels;
    labels.reserve(vectors.size());
    for (const auto& v : vectors) {
        if (!v.label)
            throw Error(ErrorCode::InsufficientData, "feature statistics need labelled rows");
        labels.push_back(*v.label == Label::Insomnia ? 1 : 0);
    }
    const auto params = fit_znorm(vectors);

    std::vector<FeatureStats> stats;
    std::vector<double> column(vectors.size()), healthy, insomnia;
    for (std::size_t i = 0; i < kFeatureCount; ++i) {
        healthy.clear();
        insomnia.clear();
        for (std::size_t r = 0; r < vectors.size(); ++r) {
            column[r] = vectors[r].values[i];
            (labels[r] ? insomnia : healthy).push_back(column[r]);
        }
        FeatureStats s;
        s.feature_name = std::string(feature_names()[i]);
        if (params.constant[i]) {
            s.constant = true;
            stats.push_back(s);
            continue;
        }
        const auto t = welch_t(healthy, insomnia);
        s.t_stat = t.t;
        s.dof = t.dof;
        s.p_value = p_value(t.t, t.dof);
        s.r_pb = point_biserial(column, labels);
        stats.push_back(s);
    }
    return stats;
}

std::vector<FeatureVector> subject_means(std::span<const FeatureVector> vectors)
{
    std::vector<FeatureVector> means;
    std::vector<std::size_t> counts;
    std::map<std::string, std::size_t> slot;
    for (const auto& v : vectors) {
        auto [it, inserted] = slot.try_emplace(v.subject_id, means.size());
        if (inserted) {
            FeatureVector m;
            m.subject_id = v.subject_id;
            m.channel = v.channel;
            m.label = v.label;
            means.push_back(m);
            counts.push_back(0);
        }
        auto& m = means[it->second];
        for (std::size_t i = 0; i < kFeatureCount; ++i)
            m.values[i] += v.values[i];
        ++counts[it->second];
    }
    for (std::size_t s = 0; s < means.size(); ++s)
        for (auto& x : means[s].values)
            x /= static_cast<double>(counts[s]);
    return means;
}

std::vector<std::string> apply_rules(std::vector<FeatureStats>& stats, const SelectionConfig& config)
{
    config.validate();
    std::vector<std::string> selected;
    for (auto& s : stats) {
        s.tier = Tier::Rejected;
        if (s.constant || !(s.dof > 0.0))
            continue;
        const bool significant = std::abs(s.t_stat) > t_critical(config.alpha_top, s.dof);
        const double r = std::abs(s.r_pb);
        if (significant && s.p_value < config.alpha_top && r >= config.r_top)
            s.tier = Tier::Top;
        else if (significant && s.p_value < config.p_optimal && r >= config.r_optimal)
            s.tier = Tier::Optimal;
    }

    if (config.use_fixed_set)
        return fixed_feature_set();

    for (auto name : feature_names()) {
        auto it = std::find_if(stats.begin(), stats.end(), [&](const FeatureStats& s) { return s.feature_name == name; });
        if (it != stats.end() && it->tier != Tier::Rejected)
            selected.emplace_back(name);
    }
    if (selected.empty())
        throw Error(ErrorCode::NoFeaturesSelected, "no feature passed the selection rules");
    return selected;
}

const std::vector<std::string>& fixed_feature_set()
{
    static const std::vector<std::string> names = {
        "MEAN",
        "ZCR",
        "HJORTH_MOBILITY",
        "HJORTH_COMPLEXITY",
        "TOTAL_POWER",
        "SLOW_WAVE_POWER",
        "REL_DELTA",
        "REL_SIGMA",
        "REL_BETA",
        "REL_GAMMA",
        "RATIO_DELTA_THETA",
        "RATIO_DELTA_ALPHA",
        "RATIO_DELTA_GAMMA",
        "RATIO_DELTA_BETA",
        "RATIO_THETA_ALPHA",
        "RATIO_THETA_BETA",
        "RATIO_ALPHA_GAMMA",
        "RATIO_ALPHA_BETA",
        "SLEEP_EFFICIENCY",
        "TOTAL_SLEEP_TIME",
    };
    return names;
}

void write_feature_stats_csv(std::span<const FeatureStats> stats, const std::filesystem::path& path,
                             const std::string& comment)
{
    csv::Writer out(path, comment);
    out.row({"feature", "t", "dof", "p", "r_pb", "tier"});
    for (const auto& s : stats)
        out.row({s.feature_name, csv::format(s.t_stat), csv::format(s.dof), csv::format(s.p_value),
                 csv::format(s.r_pb), s.constant ? "constant" : std::string(to_string(s.tier))});
}

void write_selected(std::span<const std::string> names, const std::filesystem::path& path)
{
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        throw Error(ErrorCode::IoError, "cannot write " + path.string());
    for (const auto& n : names)
        out << n << '\n';
}

std::vector<std::string> read_selected(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in)
        throw Error(ErrorCode::IoError, "cannot open " + path.string());
    std::vector<std::string> names;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r')
            line.pop_back();
        if (line.empty() || line.front() == '#')
            continue;
        feature_from_name(line);
        names.push_back(line);
    }
    if (names.empty())
        throw Error(ErrorCode::NoFeaturesSelected, "empty selection file " + path.string());
    return names;
}

} // namespace insomnet

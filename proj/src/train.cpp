#include "insomnet/csv.hpp"
#include "insomnet/error.hpp"
#include "insomnet/model.hpp"
#include "insomnet/random.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

namespace insomnet {

namespace {

constexpr double kBeta1 = 0.9;
constexpr double kBeta2 = 0.999;
constexpr double kAdamEps = 1e-8;

class Adam {
public:
    Adam(std::size_t n, double lr, double weight_decay)
        : lr_(lr), weight_decay_(weight_decay), m_(n, 0.0), v_(n, 0.0)
    {
    }

    void step(std::span<double> params, std::span<const double> grad)
    {
        ++t_;
        const double c1 = 1.0 - std::pow(kBeta1, static_cast<double>(t_));
        const double c2 = 1.0 - std::pow(kBeta2, static_cast<double>(t_));
        const double step_size = lr_ / c1;
        const double inv_sqrt_c2 = 1.0 / std::sqrt(c2);
        for (std::size_t i = 0; i < params.size(); ++i) {
            const double g = grad[i] + weight_decay_ * params[i];
            m_[i] = kBeta1 * m_[i] + (1.0 - kBeta1) * g;
            v_[i] = kBeta2 * v_[i] + (1.0 - kBeta2) * g * g;
            params[i] -= step_size * m_[i] / (std::sqrt(v_[i]) * inv_sqrt_c2 + kAdamEps);
        }
    }

private:
    double lr_;
    double weight_decay_;
    std::uint64_t t_ = 0;
    std::vector<double> m_, v_;
};

int argmax(const std::array<double, 2>& p)
{
    return p[1] > p[0] ? 1 : 0;
}

} // namespace

void TrainConfig::validate() const
{
    if (!(learning_rate > 0.0 && learning_rate < 1.0))
        throw Error(ErrorCode::ConfigError, "learning rate must lie in (0, 1)");
    if (!(split > 0.0 && split < 1.0))
        throw Error(ErrorCode::ConfigError, "train split must lie in (0, 1)");
    if (batch_size < 1 || max_epochs < 1)
        throw Error(ErrorCode::ConfigError, "batch size and epoch count must be positive");
    if (weight_decay < 0.0)
        throw Error(ErrorCode::ConfigError, "weight decay must be non-negative");
}

Evaluation evaluate(const CnnModel& model, std::span<const Example> examples)
{
    Evaluation e;
    if (examples.empty())
        return e;
    std::size_t correct = 0;
    for (const auto& ex : examples) {
        const auto p = model.forward(ex.x);
        e.loss += cross_entropy(p, ex.label);
        correct += argmax(p) == ex.label;
    }
    e.loss /= static_cast<double>(examples.size());
    e.accuracy = static_cast<double>(correct) / static_cast<double>(examples.size());
    return e;
}

DataSplit split_subjects(std::span<const std::string> subjects, std::span<const int> labels, double train_fraction,
                         std::uint64_t seed)
{
    if (subjects.size() != labels.size())
        throw Error(ErrorCode::ShapeError, "subjects and labels differ in length");
    Rng rng(seed ^ 0x5b1d5b1dULL);
    DataSplit split;
    for (int cls = 0; cls <= 1; ++cls) {
        std::vector<std::size_t> members;
        for (std::size_t i = 0; i < subjects.size(); ++i)
            if (labels[i] == cls)
                members.push_back(i);
        if (members.empty())
            continue;
        rng.shuffle(members);
        auto n_train = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(members.size())));
        n_train = std::clamp<std::size_t>(n_train, 1, members.size() > 1 ? members.size() - 1 : 1);
        split.train.insert(split.train.end(), members.begin(), members.begin() + static_cast<std::ptrdiff_t>(n_train));
        split.test.insert(split.test.end(), members.begin() + static_cast<std::ptrdiff_t>(n_train), members.end());
    }
    std::sort(split.train.begin(), split.train.end());
    std::sort(split.test.begin(), split.test.end());
    return split;
}

TrainResult train(std::span<const Example> train_set, std::span<const Example> validation, const TrainConfig& config)
{
    config.validate();
    if (train_set.empty())
        throw Error(ErrorCode::DegenerateDataset, "empty training set");
    const bool has_both = std::any_of(train_set.begin(), train_set.end(), [](const Example& e) { return e.label == 0; }) &&
                          std::any_of(train_set.begin(), train_set.end(), [](const Example& e) { return e.label == 1; });
    if (!has_both)
        throw Error(ErrorCode::DegenerateDataset, "training data must contain both classes");

    auto plan = LayerPlan::for_input_width(train_set.front().x.size());
    CnnModel model(plan, config.seed);
    Adam adam(plan.parameter_count(), config.learning_rate, config.weight_decay);
    std::vector<double> grad(plan.parameter_count(), 0.0);

    std::vector<std::size_t> order(train_set.size());
    for (std::size_t i = 0; i < order.size(); ++i)
        order[i] = i;
    Rng rng(config.seed ^ 0x7a11ULL);

    TrainResult result{model, {}, 0};
    double best_loss = std::numeric_limits<double>::infinity();
    std::size_t since_best = 0;

    for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
        rng.shuffle(order);
        double loss_sum = 0.0;
        std::size_t correct = 0, in_batch = 0;
        for (std::size_t n = 0; n < order.size(); ++n) {
            const auto& ex = train_set[order[n]];
            const auto cache = model.forward_cached(ex.x);
            loss_sum += model.backward(cache, ex.x, ex.label, grad);
            correct += argmax(cache.probabilities) == ex.label;
            if (++in_batch == config.batch_size || n + 1 == order.size()) {
                if (in_batch > 1)
                    for (double& g : grad)
                        g /= static_cast<double>(in_batch);
                adam.step(model.parameters(), grad);
                std::fill(grad.begin(), grad.end(), 0.0);
                in_batch = 0;
            }
        }

        EpochRecord rec;
        rec.epoch = epoch;
        rec.train_loss = loss_sum / static_cast<double>(order.size());
        rec.train_acc = static_cast<double>(correct) / static_cast<double>(order.size());
        const auto val = evaluate(model, validation.empty() ? train_set : validation);
        rec.val_loss = val.loss;
        rec.val_acc = val.accuracy;
        result.history.push_back(rec);

        if (rec.val_loss < best_loss) {
            best_loss = rec.val_loss;
            since_best = 0;
            result.best_epoch = epoch;
            std::copy(model.parameters().begin(), model.parameters().end(), result.model.parameters().begin());
        } else if (config.early_stop_patience > 0 && ++since_best >= config.early_stop_patience) {
            break;
        }
    }
    return result;
}

TrainResult train(std::span<const Example> dataset, const TrainConfig& config)
{
    config.validate();
    std::vector<Example> train_set, validation;
    if (config.epoch_split) {
        std::vector<std::size_t> rows(dataset.size());
        for (std::size_t i = 0; i < rows.size(); ++i)
            rows[i] = i;
        Rng rng(config.seed ^ 0x5b1d5b1dULL);
        rng.shuffle(rows);
        const auto n_train = static_cast<std::size_t>(std::llround(config.split * static_cast<double>(rows.size())));
        for (std::size_t i = 0; i < rows.size(); ++i)
            (i < n_train ? train_set : validation).push_back(dataset[rows[i]]);
    } else {
        std::vector<std::string> subjects;
        std::vector<int> labels;
        std::map<std::string, std::size_t> seen;
        for (const auto& ex : dataset)
            if (seen.try_emplace(ex.subject_id, subjects.size()).second) {
                subjects.push_back(ex.subject_id);
                labels.push_back(ex.label);
            }
        const auto split = split_subjects(subjects, labels, config.split, config.seed);
        std::vector<bool> is_train(subjects.size(), false);
        for (auto i : split.train)
            is_train[i] = true;
        for (const auto& ex : dataset)
            (is_train[seen.at(ex.subject_id)] ? train_set : validation).push_back(ex);
    }
    return train(train_set, validation, config);
}

void write_history_csv(std::span<const EpochRecord> history, const std::filesystem::path& path,
                       const std::string& comment)
{
    csv::Writer out(path, comment);
    out.row({"epoch", "train_loss", "train_acc", "val_loss", "val_acc"});
    for (const auto& r : history)
        out.row({std::to_string(r.epoch), csv::format(r.train_loss), csv::format(r.train_acc), csv::format(r.val_loss),
                 csv::format(r.val_acc)});
}

} // namespace insomnet

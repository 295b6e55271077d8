#pragma once

#include "insomnet/preprocess.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace insomnet {

/// Input width of the single-channel classifier (the selected feature count).
inline constexpr std::size_t kFeaturesPerChannel = 20;

enum class LayerKind { Conv, MaxPool, Flatten, Dense };

/// One resolved layer: shapes and where its parameters live in the flat
/// parameter vector (weights first, then biases).
struct Layer {
    LayerKind kind = LayerKind::Conv;
    std::size_t in_channels = 1, in_length = 0;
    std::size_t out_channels = 1, out_length = 0;
    std::size_t kernel = 1;
    std::size_t weight_offset = 0, bias_offset = 0;
    bool relu = false;

    std::size_t in_size() const { return in_channels * in_length; }
    std::size_t out_size() const { return out_channels * out_length; }
    std::size_t weight_count() const;
    std::size_t bias_count() const;
};

/* Conv(32, k3) -> Conv(32, k2) -> MaxPool(2) -> Conv(128, k1) -> MaxPool(2)
 * -> Conv(256, k1) -> MaxPool(2) -> Flatten -> Dense(512) -> Dense(128)
 * -> Dense(2, softmax). Convolutions use stride 1 and no padding; pooling
 * uses size 2, stride 2 and floor semantics. */
class LayerPlan {
public:
    /// `channels` EEG channels concatenated into a 20 * channels input.
    /// Only one or two channels are supported.
    static LayerPlan for_channels(std::size_t channels = 1);
    /// Throws ShapeError unless width is 20 (or 40 for the two-channel plan).
    static LayerPlan for_input_width(std::size_t width);

    std::size_t input_width() const { return input_width_; }
    const std::vector<Layer>& layers() const { return layers_; }
    std::size_t parameter_count() const { return parameter_count_; }
    /// Per-layer output sizes: lengths for conv/pool, element counts for
    /// flatten/dense.
    std::vector<std::size_t> shape_trace() const;
    std::string description() const;
    std::uint64_t checksum() const;

private:
    std::size_t input_width_ = 0;
    std::vector<Layer> layers_;
    std::size_t parameter_count_ = 0;
};

/// Activations of every layer for one input, kept for backpropagation.
struct ForwardCache {
    std::vector<std::vector<double>> outputs; // outputs[i] = output of layer i
    std::vector<std::vector<std::size_t>> argmax; // pooling routes
    std::array<double, 2> probabilities{};
};

class CnnModel {
public:
    /// He-uniform weights, zero biases.
    CnnModel(LayerPlan plan, std::uint64_t seed);
    static CnnModel zeros(LayerPlan plan);

    const LayerPlan& plan() const { return plan_; }
    std::span<double> parameters() { return params_; }
    std::span<const double> parameters() const { return params_; }

    /// Class probabilities (healthy, insomnia).
    std::array<double, 2> forward(std::span<const double> x) const;
    ForwardCache forward_cached(std::span<const double> x) const;

    /// Cross-entropy loss for `target` (0 healthy, 1 insomnia); gradients are
    /// added into `grad`, which must be parameter_count() long.
    double backward(const ForwardCache& cache, std::span<const double> x, int target, std::span<double> grad) const;

private:
    explicit CnnModel(LayerPlan plan);
    void check_input(std::span<const double> x) const;

    LayerPlan plan_;
    std::vector<double> params_;
};

double cross_entropy(const std::array<double, 2>& probabilities, int target);

struct Example {
    std::vector<double> x;
    int label = 0;
    std::string subject_id;
};

struct TrainConfig {
    double learning_rate = 3e-4;
    double weight_decay = 0.0;
    std::size_t batch_size = 1;
    std::size_t max_epochs = 100;
    std::size_t early_stop_patience = 10;
    double split = 0.70;
    bool epoch_split = false;
    std::uint64_t seed = 42;

    void validate() const;
};

struct EpochRecord {
    std::size_t epoch = 0;
    double train_loss = 0.0;
    double train_acc = 0.0;
    double val_loss = 0.0;
    double val_acc = 0.0;
};

struct TrainResult {
    CnnModel model;
    std::vector<EpochRecord> history;
    std::size_t best_epoch = 0;
};

struct DataSplit {
    std::vector<std::size_t> train;
    std::vector<std::size_t> test;
};

/// Stratified split of subjects: per class, round(fraction * n) subjects
/// (at least one, and at least one left over when the class has two or more)
/// go to training. Returns indices into `subjects`.
DataSplit split_subjects(std::span<const std::string> subjects, std::span<const int> labels, double train_fraction,
                         std::uint64_t seed);

/// Adam training on `train`; `validation` drives early stopping and the
/// history's val columns. The returned model holds the best-validation
/// parameters. Deterministic for a given seed.
TrainResult train(std::span<const Example> train_set, std::span<const Example> validation, const TrainConfig& config);

/// Splits `dataset` 70/30 by subject (or by row in epoch-split mode) and trains.
TrainResult train(std::span<const Example> dataset, const TrainConfig& config);

struct Evaluation {
    double loss = 0.0;
    double accuracy = 0.0;
};

Evaluation evaluate(const CnnModel& model, std::span<const Example> examples);

struct SubjectPrediction {
    Label label = Label::Healthy;
    double insomnia_score = 0.0; // mean per-epoch insomnia probability
};

/// Averages per-epoch probabilities; an exact tie (within 1e-12) is healthy.
SubjectPrediction predict_subject(const CnnModel& model, std::span<const std::vector<double>> epochs);
SubjectPrediction aggregate_probabilities(std::span<const std::array<double, 2>> probabilities);

/// Little-endian binary: magic, version, plan checksum, input width,
/// parameter count, then float64 parameters in declaration order.
void save_model(const CnnModel& model, const std::filesystem::path& path);
CnnModel load_model(const std::filesystem::path& path);
/// Additionally rejects a model whose plan differs from `expected`.
CnnModel load_model(const std::filesystem::path& path, const LayerPlan& expected);
/// Rejects a model whose input width differs from `expected_width`.
CnnModel load_model(const std::filesystem::path& path, std::size_t expected_width);

void write_history_csv(std::span<const EpochRecord> history, const std::filesystem::path& path,
                       const std::string& comment = {});

} // namespace insomnet

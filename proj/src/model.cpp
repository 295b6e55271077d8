#include "insomnet/model.hpp"

#include "insomnet/error.hpp"
#include "insomnet/random.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

namespace insomnet {

namespace {

constexpr char kMagic[8] = {'I', 'N', 'S', 'M', 'C', 'N', 'N', '1'};
constexpr std::uint32_t kFormatVersion = 1;

void put_u64(std::vector<unsigned char>& out, std::uint64_t v)
{
    for (int i = 0; i < 8; ++i)
        out.push_back(static_cast<unsigned char>(v >> (8 * i)));
}

std::uint64_t get_u64(const unsigned char* p)
{
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i)
        v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
    return v;
}

} // namespace

std::size_t Layer::weight_count() const
{
    switch (kind) {
    case LayerKind::Conv: return out_channels * in_channels * kernel;
    case LayerKind::Dense: return out_size() * in_size();
    default: return 0;
    }
}

std::size_t Layer::bias_count() const
{
    switch (kind) {
    case LayerKind::Conv: return out_channels;
    case LayerKind::Dense: return out_size();
    default: return 0;
    }
}

LayerPlan LayerPlan::for_channels(std::size_t channels)
{
    if (channels < 1 || channels > 2)
        throw Error(ErrorCode::ShapeError, "classifier supports one or two channels");
    LayerPlan plan;
    plan.input_width_ = kFeaturesPerChannel * channels;

    std::size_t channels_now = 1, length = plan.input_width_, offset = 0;
    auto add = [&](LayerKind kind, std::size_t out_channels, std::size_t kernel, bool relu) {
        Layer l;
        l.kind = kind;
        l.in_channels = channels_now;
        l.in_length = length;
        l.kernel = kernel;
        l.relu = relu;
        switch (kind) {
        case LayerKind::Conv:
            if (length < kernel)
                throw Error(ErrorCode::ShapeError, "input too short for convolution");
            l.out_channels = out_channels;
            l.out_length = length - kernel + 1;
            break;
        case LayerKind::MaxPool:
            l.out_channels = channels_now;
            l.out_length = length / 2;
            break;
        case LayerKind::Flatten:
            l.out_channels = 1;
            l.out_length = channels_now * length;
            break;
        case LayerKind::Dense:
            l.out_channels = 1;
            l.out_length = out_channels;
            break;
        }
        l.weight_offset = offset;
        l.bias_offset = offset + l.weight_count();
        offset = l.bias_offset + l.bias_count();
        channels_now = l.out_channels;
        length = l.out_length;
        plan.layers_.push_back(l);
    };

    add(LayerKind::Conv, 32, 3, true);
    add(LayerKind::Conv, 32, 2, true);
    add(LayerKind::MaxPool, 0, 2, false);
    add(LayerKind::Conv, 128, 1, true);
    add(LayerKind::MaxPool, 0, 2, false);
    add(LayerKind::Conv, 256, 1, true);
    add(LayerKind::MaxPool, 0, 2, false);
    add(LayerKind::Flatten, 0, 1, false);
    add(LayerKind::Dense, 512, 1, true);
    add(LayerKind::Dense, 128, 1, true);
    add(LayerKind::Dense, 2, 1, false);
    plan.parameter_count_ = offset;
    return plan;
}

LayerPlan LayerPlan::for_input_width(std::size_t width)
{
    // One channel or the two-channel concatenation; nothing else.
    if (width != kFeaturesPerChannel && width != 2 * kFeaturesPerChannel)
        throw Error(ErrorCode::ShapeError, "classifier input width must be 20 (one channel) or 40 (two), got " +
                                               std::to_string(width));
    return for_channels(width / kFeaturesPerChannel);
}

std::vector<std::size_t> LayerPlan::shape_trace() const
{
    std::vector<std::size_t> trace;
    for (const auto& l : layers_)
        trace.push_back(l.out_length);
    return trace;
}

std::string LayerPlan::description() const
{
    std::string d = "in=" + std::to_string(input_width_);
    for (const auto& l : layers_) {
        switch (l.kind) {
        case LayerKind::Conv: d += ";conv" + std::to_string(l.out_channels) + "x" + std::to_string(l.kernel); break;
        case LayerKind::MaxPool: d += ";maxpool2"; break;
        case LayerKind::Flatten: d += ";flatten"; break;
        case LayerKind::Dense: d += ";dense" + std::to_string(l.out_length) + (l.relu ? "relu" : "softmax"); break;
        }
    }
    return d;
}

std::uint64_t LayerPlan::checksum() const
{
    // FNV-1a over the description string.
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : description()) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

CnnModel::CnnModel(LayerPlan plan) : plan_(std::move(plan)), params_(plan_.parameter_count(), 0.0) {}

CnnModel::CnnModel(LayerPlan plan, std::uint64_t seed) : CnnModel(std::move(plan))
{
    Rng rng(seed);
    for (const auto& l : plan_.layers()) {
        if (l.weight_count() == 0)
            continue;
        const double fan_in = static_cast<double>(l.kind == LayerKind::Conv ? l.in_channels * l.kernel : l.in_size());
        const double limit = std::sqrt(6.0 / fan_in);
        for (std::size_t i = 0; i < l.weight_count(); ++i)
            params_[l.weight_offset + i] = rng.uniform(-limit, limit);
    }
}

CnnModel CnnModel::zeros(LayerPlan plan)
{
    return CnnModel(std::move(plan));
}

void CnnModel::check_input(std::span<const double> x) const
{
    if (x.size() != plan_.input_width())
        throw Error(ErrorCode::ShapeError, "expected " + std::to_string(plan_.input_width()) + " inputs, got " +
                                               std::to_string(x.size()));
}

std::array<double, 2> CnnModel::forward(std::span<const double> x) const
{
    return forward_cached(x).probabilities;
}

ForwardCache CnnModel::forward_cached(std::span<const double> x) const
{
    check_input(x);
    const auto& layers = plan_.layers();
    ForwardCache cache;
    cache.outputs.resize(layers.size());
    cache.argmax.resize(layers.size());
    const double* p = params_.data();

    for (std::size_t li = 0; li < layers.size(); ++li) {
        const auto& l = layers[li];
        std::span<const double> in = li == 0 ? x : std::span<const double>(cache.outputs[li - 1]);
        auto& out = cache.outputs[li];
        out.assign(l.out_size(), 0.0);

        switch (l.kind) {
        case LayerKind::Conv: {
            const double* w = p + l.weight_offset;
            const double* b = p + l.bias_offset;
            for (std::size_t o = 0; o < l.out_channels; ++o) {
                double* y = out.data() + o * l.out_length;
                for (std::size_t t = 0; t < l.out_length; ++t)
                    y[t] = b[o];
                for (std::size_t c = 0; c < l.in_channels; ++c) {
                    const double* xc = in.data() + c * l.in_length;
                    const double* wk = w + (o * l.in_channels + c) * l.kernel;
                    for (std::size_t k = 0; k < l.kernel; ++k)
                        for (std::size_t t = 0; t < l.out_length; ++t)
                            y[t] += wk[k] * xc[t + k];
                }
            }
            break;
        }
        case LayerKind::MaxPool: {
            auto& route = cache.argmax[li];
            route.resize(l.out_size());
            for (std::size_t c = 0; c < l.out_channels; ++c)
                for (std::size_t t = 0; t < l.out_length; ++t) {
                    const std::size_t a = c * l.in_length + 2 * t;
                    const std::size_t pick = in[a + 1] > in[a] ? a + 1 : a;
                    out[c * l.out_length + t] = in[pick];
                    route[c * l.out_length + t] = pick;
                }
            break;
        }
        case LayerKind::Flatten:
            std::copy(in.begin(), in.end(), out.begin());
            break;
        case LayerKind::Dense: {
            const double* w = p + l.weight_offset;
            const double* b = p + l.bias_offset;
            const std::size_t n_in = l.in_size();
            for (std::size_t o = 0; o < l.out_size(); ++o) {
                const double* row = w + o * n_in;
                double acc = 0.0;
                for (std::size_t i = 0; i < n_in; ++i)
                    acc += row[i] * in[i];
                out[o] = b[o] + acc;
            }
            break;
        }
        }
        if (l.relu)
            for (double& v : out)
                v = v > 0.0 ? v : 0.0;
    }

    const auto& logits = cache.outputs.back();
    const double m = std::max(logits[0], logits[1]);
    const double e0 = std::exp(logits[0] - m);
    const double e1 = std::exp(logits[1] - m);
    cache.probabilities = {e0 / (e0 + e1), e1 / (e0 + e1)};
    return cache;
}

double cross_entropy(const std::array<double, 2>& probabilities, int target)
{
    return -std::log(std::max(probabilities[static_cast<std::size_t>(target)], 1e-300));
}

double CnnModel::backward(const ForwardCache& cache, std::span<const double> x, int target,
                          std::span<double> grad) const
{
    check_input(x);
    if (grad.size() != params_.size())
        throw Error(ErrorCode::ShapeError, "gradient buffer has the wrong size");
    const auto& layers = plan_.layers();
    const double* p = params_.data();
    double* g = grad.data();

    // d(loss)/d(logits) for softmax + cross-entropy.
    std::vector<double> d_out = {cache.probabilities[0] - (target == 0 ? 1.0 : 0.0),
                                 cache.probabilities[1] - (target == 1 ? 1.0 : 0.0)};
    std::vector<double> d_in;

    for (std::size_t li = layers.size(); li-- > 0;) {
        const auto& l = layers[li];
        std::span<const double> in = li == 0 ? x : std::span<const double>(cache.outputs[li - 1]);
        const auto& out = cache.outputs[li];
        if (l.relu)
            for (std::size_t i = 0; i < d_out.size(); ++i)
                if (!(out[i] > 0.0))
                    d_out[i] = 0.0;
        const bool need_input_grad = li > 0;
        d_in.assign(need_input_grad ? l.in_size() : 0, 0.0);

        switch (l.kind) {
        case LayerKind::Conv: {
            const double* w = p + l.weight_offset;
            double* gw = g + l.weight_offset;
            double* gb = g + l.bias_offset;
            for (std::size_t o = 0; o < l.out_channels; ++o) {
                const double* d = d_out.data() + o * l.out_length;
                for (std::size_t t = 0; t < l.out_length; ++t)
                    gb[o] += d[t];
                for (std::size_t c = 0; c < l.in_channels; ++c) {
                    const double* xc = in.data() + c * l.in_length;
                    const std::size_t base = (o * l.in_channels + c) * l.kernel;
                    for (std::size_t k = 0; k < l.kernel; ++k) {
                        double acc = 0.0;
                        for (std::size_t t = 0; t < l.out_length; ++t)
                            acc += d[t] * xc[t + k];
                        gw[base + k] += acc;
                        if (need_input_grad) {
                            double* dc = d_in.data() + c * l.in_length;
                            for (std::size_t t = 0; t < l.out_length; ++t)
                                dc[t + k] += w[base + k] * d[t];
                        }
                    }
                }
            }
            break;
        }
        case LayerKind::MaxPool: {
            const auto& route = cache.argmax[li];
            for (std::size_t i = 0; i < d_out.size(); ++i)
                d_in[route[i]] += d_out[i];
            break;
        }
        case LayerKind::Flatten:
            d_in = d_out;
            break;
        case LayerKind::Dense: {
            const double* w = p + l.weight_offset;
            double* gw = g + l.weight_offset;
            double* gb = g + l.bias_offset;
            const std::size_t n_in = l.in_size();
            for (std::size_t o = 0; o < l.out_size(); ++o) {
                const double d = d_out[o];
                gb[o] += d;
                if (d == 0.0)
                    continue;
                double* grow = gw + o * n_in;
                const double* row = w + o * n_in;
                for (std::size_t i = 0; i < n_in; ++i)
                    grow[i] += d * in[i];
                if (need_input_grad)
                    for (std::size_t i = 0; i < n_in; ++i)
                        d_in[i] += row[i] * d;
            }
            break;
        }
        }
        std::swap(d_out, d_in);
    }
    return cross_entropy(cache.probabilities, target);
}

SubjectPrediction aggregate_probabilities(std::span<const std::array<double, 2>> probabilities)
{
    if (probabilities.empty())
        throw Error(ErrorCode::NoData, "subject has no kept epochs");
    double healthy = 0.0, insomnia = 0.0;
    for (const auto& pr : probabilities) {
        healthy += pr[0];
        insomnia += pr[1];
    }
    const double n = static_cast<double>(probabilities.size());
    healthy /= n;
    insomnia /= n;
    SubjectPrediction out;
    out.insomnia_score = insomnia;
    out.label = (insomnia - healthy) > 1e-12 ? Label::Insomnia : Label::Healthy;
    return out;
}

SubjectPrediction predict_subject(const CnnModel& model, std::span<const std::vector<double>> epochs)
{
    std::vector<std::array<double, 2>> probabilities;
    probabilities.reserve(epochs.size());
    for (const auto& x : epochs)
        probabilities.push_back(model.forward(x));
    return aggregate_probabilities(probabilities);
}

void save_model(const CnnModel& model, const std::filesystem::path& path)
{
    std::vector<unsigned char> bytes(kMagic, kMagic + 8);
    for (int i = 0; i < 4; ++i)
        bytes.push_back(static_cast<unsigned char>(kFormatVersion >> (8 * i)));
    put_u64(bytes, model.plan().checksum());
    put_u64(bytes, model.plan().input_width());
    put_u64(bytes, model.parameters().size());
    for (double v : model.parameters())
        put_u64(bytes, std::bit_cast<std::uint64_t>(v));

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        throw Error(ErrorCode::IoError, "cannot write " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out)
        throw Error(ErrorCode::IoError, "failed writing " + path.string());
}

CnnModel load_model(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw Error(ErrorCode::IoError, "cannot open " + path.string());
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

    constexpr std::size_t header = 8 + 4 + 8 + 8 + 8;
    if (bytes.size() < header || std::memcmp(bytes.data(), kMagic, 8) != 0)
        throw Error(ErrorCode::IncompatibleModel, "not a model file: " + path.string());
    std::uint32_t version = 0;
    for (int i = 0; i < 4; ++i)
        version |= static_cast<std::uint32_t>(bytes[8 + i]) << (8 * i);
    if (version != kFormatVersion)
        throw Error(ErrorCode::IncompatibleModel, "unsupported model format version");
    const auto checksum = get_u64(bytes.data() + 12);
    const auto width = get_u64(bytes.data() + 20);
    const auto count = get_u64(bytes.data() + 28);

    LayerPlan plan = [&] {
        try {
            return LayerPlan::for_input_width(width);
        } catch (const Error&) {
            throw Error(ErrorCode::IncompatibleModel, "model file declares an unsupported input width");
        }
    }();
    if (plan.checksum() != checksum || plan.parameter_count() != count)
        throw Error(ErrorCode::IncompatibleModel, "layer-plan checksum mismatch");
    if (bytes.size() != header + 8 * count)
        throw Error(ErrorCode::IncompatibleModel, "model file is truncated or has trailing bytes");

    auto model = CnnModel::zeros(plan);
    auto params = model.parameters();
    for (std::size_t i = 0; i < count; ++i)
        params[i] = std::bit_cast<double>(get_u64(bytes.data() + header + 8 * i));
    return model;
}

CnnModel load_model(const std::filesystem::path& path, const LayerPlan& expected)
{
    auto model = load_model(path);
    if (model.plan().checksum() != expected.checksum())
        throw Error(ErrorCode::IncompatibleModel, "model was trained for input width " +
                                                      std::to_string(model.plan().input_width()) + ", expected " +
                                                      std::to_string(expected.input_width()));
    return model;
}

CnnModel load_model(const std::filesystem::path& path, std::size_t expected_width)
{
    auto model = load_model(path);
    if (model.plan().input_width() != expected_width)
        throw Error(ErrorCode::IncompatibleModel, "model was trained for input width " +
                                                      std::to_string(model.plan().input_width()) + ", expected " +
                                                      std::to_string(expected_width));
    return model;
}

} // namespace insomnet

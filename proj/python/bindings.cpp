// Python view of the core: signal I/O, features, statistics, metrics and the
// pipeline stages. Arrays come back as numpy float64.
#include "insomnet/error.hpp"
#include "insomnet/pipeline.hpp"

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

namespace py = pybind11;
using namespace insomnet;

namespace {

py::array_t<double> to_numpy(const std::vector<double>& v)
{
    return py::array_t<double>(static_cast<py::ssize_t>(v.size()), v.data()); // copies
}

std::vector<double> from_numpy(const py::array_t<double, py::array::c_style | py::array::forcecast>& a)
{
    if (a.ndim() != 1)
        throw Error(ErrorCode::ShapeError, "expected a 1-D array");
    return {a.data(), a.data() + a.size()};
}

py::dict metrics_dict(const MetricRow& m)
{
    py::dict d;
    auto put = [&](const char* k, const std::optional<double>& v) { d[k] = v ? py::cast(*v) : py::none(); };
    put("accuracy", m.accuracy);
    put("precision", m.precision);
    put("recall", m.recall);
    put("f1", m.f1);
    put("kappa", m.kappa);
    return d;
}

PipelineConfig make_config(const std::string& out, const py::kwargs& kw)
{
    PipelineConfig c;
    c.out = out;
    for (auto [key, value] : kw) {
        const auto k = key.cast<std::string>();
        if (k == "manifest")
            c.manifest = value.cast<std::string>();
        else if (k == "channel")
            c.channel = parse_channel_mode(value.cast<std::string>());
        else if (k == "seed")
            c.seed = value.cast<std::uint64_t>();
        else if (k == "jobs")
            c.jobs = value.cast<unsigned>();
        else if (k == "n_healthy")
            c.n_healthy = value.cast<std::size_t>();
        else if (k == "n_insomnia")
            c.n_insomnia = value.cast<std::size_t>();
        else if (k == "duration")
            c.cohort.duration = value.cast<double>();
        else if (k == "synth_fs")
            c.cohort.fs = value.cast<double>();
        else if (k == "max_epochs")
            c.train.max_epochs = value.cast<std::size_t>();
        else if (k == "patience")
            c.train.early_stop_patience = value.cast<std::size_t>();
        else if (k == "lr")
            c.learning_rate = value.cast<double>();
        else if (k == "rules")
            c.selection.use_fixed_set = !value.cast<bool>();
        else
            throw Error(ErrorCode::ConfigError, "unknown option '" + k + "'");
    }
    return c;
}

} // namespace

PYBIND11_MODULE(_insomnet, m)
{
    m.doc() = "Insomnia identification from sleep EEG";
    m.attr("__version__") = kVersion;

    static py::exception<Error> error(m, "InsomnetError");
    py::register_exception_translator([](std::exception_ptr p) {
        try {
            if (p)
                std::rethrow_exception(p);
        } catch (const Error& e) {
            py::object exc = py::handle(error.ptr())(e.what());
            exc.attr("code") = std::string(to_string(e.code()));
            PyErr_SetObject(error.ptr(), exc.ptr());
        }
    });

    m.def("read_edf", [](const std::filesystem::path& path, const std::string& channel) {
        auto r = read_edf(path, parse_channel(channel));
        return py::make_tuple(r.fs, to_numpy(r.samples));
    }, py::arg("path"), py::arg("channel") = "fp2", "Returns (fs, samples in uV).");

    m.def("write_edf", [](const std::filesystem::path& path, py::array_t<double> samples, double fs,
                          const std::string& channel) {
        Recording r;
        r.subject_id = path.stem().string();
        r.channel = parse_channel(channel);
        r.fs = fs;
        r.samples = from_numpy(samples);
        r.duration = static_cast<double>(r.samples.size()) / fs;
        write_edf(r, path);
    }, py::arg("path"), py::arg("samples"), py::arg("fs"), py::arg("channel") = "fp2");

    m.def("resample", [](py::array_t<double> x, double fs, double target_fs) {
        Recording r;
        r.fs = fs;
        r.samples = from_numpy(x);
        return to_numpy(resample(r, target_fs).samples);
    }, py::arg("x"), py::arg("fs"), py::arg("target_fs"));

    m.def("bandpass", [](py::array_t<double> x, double fs, double hp, double lp, int order, bool zero_phase) {
        auto coeffs = design_butterworth(FilterSpec{hp, lp, order, zero_phase}, fs);
        return to_numpy(apply_filter(coeffs, from_numpy(x), zero_phase));
    }, py::arg("x"), py::arg("fs"), py::arg("hp") = 0.5, py::arg("lp") = 40.0, py::arg("order") = 7,
          py::arg("zero_phase") = false);

    m.def("filter_gain", [](double f, double fs, double hp, double lp, int order) {
        return design_butterworth(FilterSpec{hp, lp, order, false}, fs).gain(f);
    }, py::arg("f"), py::arg("fs") = 128.0, py::arg("hp") = 0.5, py::arg("lp") = 40.0, py::arg("order") = 7);

    m.def("psd", [](py::array_t<double> x, double fs) {
        auto s = psd(from_numpy(x), fs);
        std::vector<double> freqs(s.power.size());
        for (std::size_t k = 0; k < freqs.size(); ++k)
            freqs[k] = s.frequency(k);
        return py::make_tuple(to_numpy(freqs), to_numpy(s.power));
    }, py::arg("x"), py::arg("fs"), "Welch PSD (4 s Hann segments); returns (freqs, power).");

    m.def("feature_names", [] {
        std::vector<std::string> names;
        for (auto n : feature_names())
            names.emplace_back(n);
        return names;
    });

    m.def("epoch_features", [](py::array_t<double> x, double fs) {
        Epoch e;
        e.fs = fs;
        e.samples = from_numpy(x);
        auto fv = epoch_features(e, {}, {});
        py::dict d;
        for (std::size_t k = 0; k < kFeatureCount; ++k)
            d[py::str(std::string(feature_names()[k]))] = fv.values[k];
        return d;
    }, py::arg("x"), py::arg("fs"), "Temporal and spectral features of one epoch (sleep features are 0).");

    m.def("welch_t", [](py::array_t<double> a, py::array_t<double> b) {
        auto t = welch_t(from_numpy(a), from_numpy(b));
        return py::make_tuple(t.t, t.dof);
    });
    m.def("p_value", &p_value, py::arg("t"), py::arg("dof"));
    m.def("t_critical", &t_critical, py::arg("alpha"), py::arg("dof"));
    m.def("point_biserial", [](py::array_t<double> v, std::vector<int> labels) {
        return point_biserial(from_numpy(v), labels);
    });

    m.def("metrics", [](std::vector<int> truth, std::vector<int> predicted) {
        return metrics_dict(all_metrics(confusion(truth, predicted)));
    }, py::arg("truth"), py::arg("predicted"), "1 = insomnia. Undefined metrics are None.");
    m.def("metrics_from_counts", [](std::uint64_t tp, std::uint64_t tn, std::uint64_t fp, std::uint64_t fn) {
        return metrics_dict(all_metrics(ConfusionMatrix{tp, tn, fp, fn}));
    }, py::arg("tp"), py::arg("tn"), py::arg("fp"), py::arg("fn"));

    m.def("shape_trace", [](std::size_t width) { return LayerPlan::for_input_width(width).shape_trace(); },
          py::arg("width") = 20);
    m.def("parameter_count", [](std::size_t width) { return LayerPlan::for_input_width(width).parameter_count(); },
          py::arg("width") = 20);

    m.def("synth_subject", [](const std::string& label, double duration, double fs, std::uint64_t seed) {
        auto p = default_profile(parse_label(label));
        p.seed = seed;
        auto [rec, hyp] = generate_subject(p, duration, fs);
        std::vector<std::string> stages;
        for (auto s : hyp.stages)
            stages.emplace_back(to_string(s));
        return py::make_tuple(to_numpy(rec.samples), stages);
    }, py::arg("label"), py::arg("duration") = 600.0, py::arg("fs") = 128.0, py::arg("seed") = 1,
          "Returns (samples, stages) for a synthetic healthy or insomnia subject.");

    // Pipeline stages, keyword options as on the command line (underscored).
    const std::pair<const char*, void (*)(const PipelineConfig&)> stages[] = {
        {"ingest", cmd_ingest}, {"preprocess", cmd_preprocess}, {"features", cmd_features},
        {"select", cmd_select}, {"train", cmd_train},           {"eval", cmd_eval},
        {"report", cmd_report}, {"sleepstats", cmd_sleepstats}, {"run", cmd_run},
    };
    for (auto [name, fn] : stages)
        m.def(name, [fn](const std::string& out, const py::kwargs& kw) {
            auto cfg = make_config(out, kw);
            py::gil_scoped_release release;
            fn(cfg);
        }, py::arg("out"));
    m.def("synth", [](const std::string& out, const py::kwargs& kw) {
        auto cfg = make_config(out, kw);
        py::gil_scoped_release release;
        cmd_synth(cfg);
    }, py::arg("out"));
    m.def("read_metrics", [](const std::filesystem::path& path) {
        py::list rows;
        for (const auto& e : read_metrics_csv(path)) {
            auto d = metrics_dict(e.metrics);
            d["level"] = e.level;
            d["channel"] = e.channel;
            rows.append(d);
        }
        return rows;
    });
}

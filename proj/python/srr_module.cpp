#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <memory>
#include <string>

#include "srr/error.hpp"
#include "srr/gradcheck.hpp"
#include "srr/infer.hpp"
#include "srr/metrics.hpp"
#include "srr/model.hpp"
#include "srr/session.hpp"
#include "srr/synth.hpp"
#include "srr/train.hpp"

namespace py = pybind11;
using namespace srr;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

/// Prepends a batch axis: (C,H,W) -> [1,C,H,W].
Tensor image_tensor(const Array& a, std::size_t channels, const char* what) {
    if (a.ndim() != 3 || static_cast<std::size_t>(a.shape(0)) != channels) {
        throw DimensionError(std::string(what) + " must have shape (" + std::to_string(channels) + ", H, W)");
    }
    const auto h = static_cast<std::size_t>(a.shape(1)), w = static_cast<std::size_t>(a.shape(2));
    return Tensor::from_values({1, channels, h, w}, std::vector<double>(a.data(), a.data() + a.size()));
}

Grid grid(const Array& a) {
    if (a.ndim() != 2) throw DimensionError("metric maps must be 2-D");
    return Grid(static_cast<std::size_t>(a.shape(0)), static_cast<std::size_t>(a.shape(1)),
                std::vector<double>(a.data(), a.data() + a.size()));
}

/// [1,C,H,W] -> (H,W) for C = 1, else (C,H,W).
Array to_numpy(const Tensor& t) {
    std::vector<py::ssize_t> shape;
    if (t.dim(1) == 1) shape = {static_cast<py::ssize_t>(t.dim(2)), static_cast<py::ssize_t>(t.dim(3))};
    else shape = {static_cast<py::ssize_t>(t.dim(1)), static_cast<py::ssize_t>(t.dim(2)), static_cast<py::ssize_t>(t.dim(3))};
    Array out(shape);
    std::copy(t.values().begin(), t.values().end(), out.mutable_data());
    return out;
}

/// (T, ...) stack of per-frame maps.
Array stack(const std::vector<Tensor>& ts) {
    const Array first = to_numpy(ts.at(0));
    std::vector<py::ssize_t> shape{static_cast<py::ssize_t>(ts.size())};
    for (py::ssize_t i = 0; i < first.ndim(); ++i) shape.push_back(first.shape(i));
    Array out(shape);
    double* dst = out.mutable_data();
    for (const Tensor& t : ts) dst = std::copy(t.values().begin(), t.values().end(), dst);
    return out;
}

Sequence sequence_from(const Array& frames, const std::optional<Array>& masks) {
    if (frames.ndim() != 4 || frames.shape(1) != 3) throw DimensionError("frames must have shape (T, 3, H, W)");
    const auto n = static_cast<std::size_t>(frames.shape(0)), h = static_cast<std::size_t>(frames.shape(2)),
               w = static_cast<std::size_t>(frames.shape(3));
    Sequence seq;
    seq.name = "python";
    const std::size_t plane = 3 * h * w;
    for (std::size_t t = 0; t < n; ++t)
        seq.frames.push_back(
            Tensor::from_values({1, 3, h, w}, std::vector<double>(frames.data() + t * plane, frames.data() + (t + 1) * plane)));
    if (masks) {
        if (masks->ndim() != 3 || static_cast<std::size_t>(masks->shape(0)) != n ||
            static_cast<std::size_t>(masks->shape(1)) != h || static_cast<std::size_t>(masks->shape(2)) != w) {
            throw DimensionError("masks must have shape (T, H, W) matching the frames");
        }
        for (std::size_t t = 0; t < n; ++t)
            seq.masks.push_back(Tensor::from_values(
                {1, 1, h, w}, std::vector<double>(masks->data() + t * h * w, masks->data() + (t + 1) * h * w)));
    }
    return seq;
}

class Model {
public:
    Model(const std::string& preset, const std::string& attention_mode, bool share_cross_qkv, std::uint64_t seed) {
        ModelConfig cfg = ModelConfig::from_preset(preset);
        cfg.set_attention_mode(parse_attention_mode(attention_mode));
        cfg.set_share_cross_qkv(share_cross_qkv);
        cfg.validate();
        net_ = std::make_unique<SrrNet>(cfg, seed);
    }
    explicit Model(std::unique_ptr<SrrNet> net) : net_(std::move(net)) {}

    static Model load(const std::string& path) { return Model(load_model(path)); }
    void save(const std::string& path) const { save_model(path, *net_); }

    std::size_t num_parameters() const { return count_parameters(net_->parameters()); }
    std::string preset() const { return net_->config().preset; }
    std::string attention_mode() const { return std::string(to_string(net_->config().attention_mode())); }

    py::dict predict(const Array& current, const Array& previous, const Array& reference) const {
        FrameTriplet t{image_tensor(current, 3, "current"), image_tensor(previous, 4, "previous"),
                       image_tensor(reference, 4, "reference")};
        PredictionPair p;
        {
            py::gil_scoped_release release;
            NoGradGuard ng;
            p = net_->forward(t);
        }
        py::dict d;
        d["mask"] = to_numpy(p.mask);
        d["probability"] = to_numpy(p.foreground_probability());
        d["error"] = to_numpy(p.error);
        d["score"] = p.scores.at(0);
        return d;
    }

    py::dict infer(const Array& frames, const std::string& reference_mode, std::uint64_t seed) const {
        const Sequence seq = sequence_from(frames, std::nullopt);
        if (seq.size() == 0) throw ConfigError("empty sequence");
        std::vector<StepResult> results;
        {
            py::gil_scoped_release release;
            NetPredictor pred(*net_);
            SequenceFrameSource src(seq);
            results = infer_sequence(src, pred, {parse_reference_mode(reference_mode), seed});
        }
        std::vector<Tensor> masks, errors, probs;
        std::vector<double> scores;
        std::vector<bool> updated;
        std::vector<std::size_t> refs, used;
        for (const auto& r : results) {
            masks.push_back(r.mask);
            errors.push_back(r.error);
            probs.push_back(r.probability);
            scores.push_back(r.score);
            updated.push_back(r.updated);
            refs.push_back(r.ref_frame_index);
            used.push_back(r.reference_used);
        }
        py::dict d;
        d["masks"] = stack(masks);
        d["probabilities"] = stack(probs);
        d["errors"] = stack(errors);
        d["scores"] = py::array(py::cast(scores));
        d["updated"] = py::array(py::cast(updated));
        d["ref_frame_index"] = py::array(py::cast(refs));
        d["reference_used"] = py::array(py::cast(used));
        return d;
    }

    py::list train(const Array& frames, const Array& masks, std::size_t iterations, double lr, double gamma,
                   std::uint64_t seed) {
        const Sequence seq = sequence_from(frames, masks);
        TrainSchedule sched;
        sched.finetune_iters = iterations;
        sched.finetune_lr = lr;
        sched.loss.gamma = gamma;
        sched.loss.validate();
        sched.seed = seed;
        std::vector<LossRecord> recs;
        {
            py::gil_scoped_release release;
            recs = train_model(*net_, nullptr, {seq}, sched);
        }
        py::list out;
        for (const auto& r : recs) {
            py::dict d;
            d["iteration"] = r.iteration;
            d["stage"] = r.stage;
            d["total"] = r.total;
            d["bce"] = r.bce;
            d["mse"] = r.mse;
            out.append(d);
        }
        return out;
    }

    py::dict gradcheck(std::size_t size, std::size_t max_per_tensor, std::uint64_t seed) {
        GradcheckOptions opts;
        opts.size = size;
        opts.max_elements_per_tensor = max_per_tensor;
        opts.seed = seed;
        GradcheckReport rep;
        {
            py::gil_scoped_release release;
            rep = gradcheck_model(*net_, opts);
        }
        py::dict d;
        d["elements"] = rep.elements;
        d["max_rel"] = rep.max_rel;
        d["worst"] = rep.worst;
        d["passed"] = rep.passed();
        return d;
    }

private:
    std::unique_ptr<SrrNet> net_;
};

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "SRR video camouflaged object detection";

    py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
    py::register_exception<DimensionError>(m, "DimensionError", PyExc_ValueError);
    py::register_exception<ParseError>(m, "ParseError", PyExc_ValueError);
    py::register_exception<IoError>(m, "IoError", PyExc_OSError);

    py::class_<Model>(m, "Model")
        .def(py::init<const std::string&, const std::string&, bool, std::uint64_t>(), py::arg("preset") = "desk",
             py::arg("attention_mode") = "rma", py::arg("share_cross_qkv") = true, py::arg("seed") = 1)
        .def_static("load", &Model::load, py::arg("path"))
        .def("save", &Model::save, py::arg("path"))
        .def_property_readonly("num_parameters", &Model::num_parameters)
        .def_property_readonly("preset", &Model::preset)
        .def_property_readonly("attention_mode", &Model::attention_mode)
        .def("predict", &Model::predict, py::arg("current"), py::arg("previous"), py::arg("reference"),
             "One forward pass. current is (3,H,W); previous and reference are (4,H,W) image+mask stacks.")
        .def("infer", &Model::infer, py::arg("frames"), py::arg("reference_mode") = "scored", py::arg("seed") = 0,
             "Single-pass inference over (T,3,H,W) frames.")
        .def("train", &Model::train, py::arg("frames"), py::arg("masks"), py::arg("iterations") = 200,
             py::arg("lr") = 1e-3, py::arg("gamma") = 1.0, py::arg("seed") = 1,
             "Fine-tunes on one labelled sequence; returns the per-iteration losses.")
        .def("gradcheck", &Model::gradcheck, py::arg("size") = 32, py::arg("max_per_tensor") = 1, py::arg("seed") = 7);

    m.def(
        "synth",
        [](std::uint64_t seed, std::size_t frames, std::size_t size, double contrast, double occlusion_prob) {
            SynthParams p;
            p.seed = seed;
            p.frames = frames;
            p.size = size;
            p.contrast = contrast;
            p.occlusion_prob = occlusion_prob;
            const Sequence s = synth_generate(p);
            return py::make_tuple(stack(s.frames), stack(s.masks));
        },
        py::arg("seed") = 1, py::arg("frames") = 16, py::arg("size") = 64, py::arg("contrast") = 0.3,
        py::arg("occlusion_prob") = 0.1, "Synthetic camouflage video: (frames (T,3,H,W), masks (T,H,W)).");

    m.def("mae", [](const Array& p, const Array& g) { return mae(grid(p), grid(g)); }, py::arg("pred"), py::arg("gt"));
    m.def("dice", [](const Array& p, const Array& g) { return dice(grid(p), grid(g)); }, py::arg("pred"), py::arg("gt"));
    m.def("iou", [](const Array& p, const Array& g) { return iou(grid(p), grid(g)); }, py::arg("pred"), py::arg("gt"));
    m.def("s_measure", [](const Array& p, const Array& g) { return s_measure(grid(p), grid(g)); }, py::arg("pred"),
          py::arg("gt"));
    m.def("weighted_fbeta", [](const Array& p, const Array& g) { return weighted_fbeta(grid(p), grid(g)); },
          py::arg("pred"), py::arg("gt"), "None when the ground truth is empty.");
    m.def("spearman", &spearman, py::arg("x"), py::arg("y"));
}

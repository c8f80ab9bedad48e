#include "mhm/experiments.hpp"

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>

namespace py = pybind11;
using namespace mhm;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;
using ByteArray = py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>;

Array to_array(const std::vector<double>& v) {
    Array out(static_cast<py::ssize_t>(v.size()));
    std::copy(v.begin(), v.end(), out.mutable_data());
    return out;
}

Array landmarks_to_array(const LandmarkSet& s) {
    Array out({static_cast<py::ssize_t>(s.size()), py::ssize_t{2}});
    auto a = out.mutable_unchecked<2>();
    for (std::size_t i = 0; i < s.size(); ++i) {
        a(i, 0) = s[i].x;
        a(i, 1) = s[i].y;
    }
    return out;
}

LandmarkSet landmarks_from_array(const Array& arr) {
    if (arr.ndim() != 2 || arr.shape(1) != 2) throw std::invalid_argument("landmarks must have shape (N, 2)");
    auto a = arr.unchecked<2>();
    LandmarkSet s;
    for (py::ssize_t i = 0; i < a.shape(0); ++i) s.coords.push_back({a(i, 0), a(i, 1)});
    return s;
}

ByteArray image_to_array(const GrayImage& img) {
    ByteArray out({static_cast<py::ssize_t>(img.height), static_cast<py::ssize_t>(img.width)});
    std::copy(img.pixels.begin(), img.pixels.end(), out.mutable_data());
    return out;
}

GrayImage image_from_array(const ByteArray& arr) {
    if (arr.ndim() != 2) throw std::invalid_argument("image must be a 2D uint8 array");
    GrayImage img;
    img.height = static_cast<std::size_t>(arr.shape(0));
    img.width = static_cast<std::size_t>(arr.shape(1));
    img.pixels.assign(arr.data(), arr.data() + arr.size());
    return img;
}

HeatmapKind kind_from(const std::string& k) {
    if (k == "1d") return HeatmapKind::OneD;
    if (k == "2d") return HeatmapKind::TwoD;
    throw std::invalid_argument("kind must be '1d' or '2d', got '" + k + "'");
}

template <class Config>
Config config_from(const py::dict& kwargs) {
    Config c;
    for (const auto& [k, v] : kwargs) {
        const ConfigEntry e{py::str(k), py::str(v), 0};
        if (!c.set(e)) throw ConfigError("unknown key '" + e.key + "'");
    }
    return c;
}

template <class Config>
py::dict config_to_dict(const Config& c) {
    std::ostringstream os;
    c.write(os);
    py::dict d;
    for (const auto& e : parse_config(os.str())) d[py::str(e.key)] = e.value;
    return d;
}

std::vector<Sample> samples_from(const std::vector<ByteArray>& images, const std::vector<Array>& landmarks) {
    if (images.size() != landmarks.size()) throw std::invalid_argument("images and landmarks differ in length");
    std::vector<Sample> out;
    for (std::size_t i = 0; i < images.size(); ++i) out.push_back({image_from_array(images[i]), landmarks_from_array(landmarks[i])});
    return out;
}

py::list log_to_list(const std::vector<MetricRow>& rows) {
    py::list out;
    for (const auto& r : rows) {
        py::dict d;
        d["epoch"] = r.epoch;
        d["train_loss"] = r.train_loss;
        d["val_nrmse"] = r.val_nrmse;
        out.append(d);
    }
    return out;
}

}  // namespace

PYBIND11_MODULE(_mhm, m) {
    m.doc() = "Attentive one-dimensional heatmap regression";

    py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
    py::register_exception<ShapeError>(m, "ShapeError", PyExc_ValueError);
    py::register_exception<TrainingError>(m, "TrainingError", PyExc_RuntimeError);

    m.def(
        "quantize", [](double p, double q, std::size_t F, std::size_t L) {
            const GridPoint g = quantize({p, q}, {F, L, 1.0});
            return py::make_tuple(g.x, g.y);
        },
        py::arg("p"), py::arg("q"), py::arg("F"), py::arg("L"), "Floor-quantize a pixel coordinate to the L grid");
    m.def(
        "recover", [](std::int64_t x, std::int64_t y, std::size_t F, std::size_t L) {
            const Point p = recover({x, y}, {F, L, 1.0});
            return py::make_tuple(p.x, p.y);
        },
        py::arg("x"), py::arg("y"), py::arg("F"), py::arg("L"), "Pixel coordinate of a grid point");
    m.def(
        "quantization_error", [](double p, double q, std::size_t F, std::size_t L) {
            return quantization_error({p, q}, {F, L, 1.0});
        },
        py::arg("p"), py::arg("q"), py::arg("F"), py::arg("L"), "Distance between a point and its quantized recovery");
    m.def(
        "output_size", [](std::uint64_t N, std::uint64_t L, const std::string& kind) { return output_size(N, L, kind_from(kind)); },
        py::arg("N"), py::arg("L"), py::arg("kind") = "1d", "Output points: 2NL for 1d, NL^2 for 2d");

    m.def(
        "encode1d", [](double c, std::size_t F, std::size_t L, double sigma) {
            return to_array(encode1d(c, {F, L, sigma}).values);
        },
        py::arg("coord"), py::arg("F"), py::arg("L"), py::arg("sigma") = 2.5, "Peak-normalized 1D Gaussian heatmap");
    m.def(
        "encode2d", [](double p, double q, std::size_t F, std::size_t L, double sigma) {
            const auto h = encode2d({p, q}, {F, L, sigma});
            Array out({static_cast<py::ssize_t>(L), static_cast<py::ssize_t>(L)});
            std::copy(h.values.begin(), h.values.end(), out.mutable_data());
            return out;
        },
        py::arg("p"), py::arg("q"), py::arg("F"), py::arg("L"), py::arg("sigma") = 2.5,
        "Peak-normalized 2D Gaussian heatmap, indexed [y, x]");
    m.def(
        "marginalize", [](const Array& h, std::size_t F) {
            if (h.ndim() != 2 || h.shape(0) != h.shape(1)) throw std::invalid_argument("heatmap must be square (L, L)");
            Heatmap2D map;
            map.spec = {F, static_cast<std::size_t>(h.shape(0)), 1.0};
            map.values.assign(h.data(), h.data() + h.size());
            const auto [x, y] = marginalize(map);
            return py::make_tuple(to_array(x.values), to_array(y.values));
        },
        py::arg("heatmap"), py::arg("F"), "Peak-normalized x and y marginals of a 2D heatmap");
    m.def(
        "decode_argmax", [](const Array& values, std::size_t F) {
            const std::span<const double> v(values.data(), static_cast<std::size_t>(values.size()));
            return decode_argmax(v, {F, v.size(), 1.0});
        },
        py::arg("values"), py::arg("F"), "argmax index scaled by F / L");

    m.def(
        "nrmse", [](const Array& pred, const Array& gt, const std::string& normalization) {
            const LandmarkSet g = landmarks_from_array(gt);
            NormSpec spec = default_norm(g.size());
            if (normalization == "face_size") spec.kind = NormKind::FaceSize;
            else if (normalization != "inter_ocular") throw std::invalid_argument("normalization must be inter_ocular or face_size");
            return nrmse(landmarks_from_array(pred), g, spec);
        },
        py::arg("pred"), py::arg("gt"), py::arg("normalization") = "inter_ocular", "Normalized landmark error in percent");

    m.def(
        "generate_scene", [](std::uint64_t seed, std::size_t F, std::size_t N) {
            const Sample s = generate_scene(seed, F, N);
            return py::make_tuple(image_to_array(s.image), landmarks_to_array(s.landmarks));
        },
        py::arg("seed"), py::arg("F") = 64, py::arg("N") = 5, "Synthetic face image (F, F) and landmarks (N, 2)");
    m.def(
        "generate_clip",
        [](std::uint64_t seed, std::size_t F, std::size_t N, std::size_t T, double motion_scale, double occlusion_prob) {
            const Clip c = generate_clip(seed, F, N, T, motion_scale, occlusion_prob);
            py::list frames, tracks;
            for (std::size_t t = 0; t < c.frames.size(); ++t) {
                frames.append(image_to_array(c.frames[t]));
                tracks.append(landmarks_to_array(c.tracks[t]));
            }
            return py::make_tuple(frames, tracks, std::vector<bool>(c.occluded.begin(), c.occluded.end()));
        },
        py::arg("seed"), py::arg("F") = 64, py::arg("N") = 5, py::arg("T") = 8, py::arg("motion_scale") = 1.0,
        py::arg("occlusion_prob") = 0.3, "Synthetic clip: frames, per-frame landmarks, occlusion flags");

    m.def(
        "analyze_quant", [](double p, double q, std::size_t F, const std::vector<double>& ratios) {
            py::list out;
            for (const auto& r : analyze_quant({p, q}, F, ratios)) {
                py::dict d;
                d["L_over_F"] = r.ratio;
                d["L"] = r.L;
                d["grid"] = py::make_tuple(r.grid.x, r.grid.y);
                d["recovered"] = py::make_tuple(r.recovered.x, r.recovered.y);
                d["error"] = r.error;
                out.append(d);
            }
            return out;
        },
        py::arg("p"), py::arg("q"), py::arg("F"), py::arg("ratios"), "Quantization error table");

    py::class_<Detector>(m, "Detector")
        .def(py::init([](const py::kwargs& kw) {
                 DetectorConfig c = config_from<DetectorConfig>(kw);
                 c.validate();
                 return Detector(c);
             }),
             "Detector from DetectorConfig keys, e.g. Detector(F=64, L=64, seed=1)")
        .def_property_readonly("config", [](const Detector& d) { return config_to_dict(d.config()); })
        .def(
            "detect", [](const Detector& d, const ByteArray& image) { return landmarks_to_array(d.detect(to_tensor(image_from_array(image)))); },
            py::arg("image"), "Landmarks (N, 2) of an (F, F) uint8 image")
        .def(
            "heatmaps",
            [](const Detector& d, const ByteArray& image) {
                NoGradGuard ng;
                const HeadOutput o = d.forward(to_tensor(image_from_array(image)));
                const auto N = static_cast<py::ssize_t>(o.hx.dim(0)), L = static_cast<py::ssize_t>(o.hx.dim(1));
                Array hx({N, L}), hy({N, L});
                std::copy(o.hx.data().begin(), o.hx.data().end(), hx.mutable_data());
                std::copy(o.hy.data().begin(), o.hy.data().end(), hy.mutable_data());
                return py::make_tuple(hx, hy);
            },
            py::arg("image"), "Per-axis heatmaps, each (N, L)")
        .def(
            "train",
            [](Detector& d, const std::vector<ByteArray>& images, const std::vector<Array>& landmarks,
               const std::vector<ByteArray>& val_images, const std::vector<Array>& val_landmarks) {
                const auto spec = d.config().heatmap_spec();
                const auto train = prepare(samples_from(images, landmarks), spec);
                const auto val = prepare(samples_from(val_images, val_landmarks), spec);
                TrainResult r;
                {
                    py::gil_scoped_release release;
                    r = train_detector(d, train, val);
                }
                if (r.diverged) throw TrainingError(r.message);
                return log_to_list(r.log);
            },
            py::arg("images"), py::arg("landmarks"), py::arg("val_images") = std::vector<ByteArray>{},
            py::arg("val_landmarks") = std::vector<Array>{}, "Train with Adam; returns the per-epoch log")
        .def("save", &Detector::save, py::arg("path"))
        .def("load", &Detector::load, py::arg("path"));
}

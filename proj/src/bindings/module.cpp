#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "hst/error.hpp"
#include "hst/image_io.hpp"
#include "hst/loss.hpp"
#include "hst/network.hpp"
#include "hst/pipeline.hpp"
#include "hst/structure_tensor.hpp"
#include "hst/verification.hpp"

namespace py = pybind11;

namespace {

using Arr = py::array_t<double, py::array::c_style | py::array::forcecast>;

// numpy (H,W,C) -> planar {C,H,W}
hst::Tensor tensor_from_hwc(const Arr& a, int channels) {
    hst::require(a.ndim() == 3 && a.shape(2) == channels, hst::errc::dimension_mismatch,
                 "expected (H,W," + std::to_string(channels) + ") array");
    const int h = static_cast<int>(a.shape(0)), w = static_cast<int>(a.shape(1));
    hst::Tensor t({channels, h, w});
    auto r = a.unchecked<3>();
    for (int c = 0; c < channels; ++c)
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) t(c, y, x) = r(y, x, c);
    return t;
}

hst::Tensor tensor_from_hw(const Arr& a) {
    hst::require(a.ndim() == 2, hst::errc::dimension_mismatch, "expected (H,W) array");
    const int h = static_cast<int>(a.shape(0)), w = static_cast<int>(a.shape(1));
    hst::Tensor t({h, w});
    auto r = a.unchecked<2>();
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) t(y, x) = r(y, x);
    return t;
}

py::array hwc_from_tensor(const hst::Tensor& t) {
    const int c = t.dim(0), h = t.dim(1), w = t.dim(2);
    py::array_t<double> out({h, w, c});
    auto rw = out.mutable_unchecked<3>();
    for (int ch = 0; ch < c; ++ch)
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) rw(y, x, ch) = t(ch, y, x);
    return out;
}

py::array hw_from_tensor(const hst::Tensor& t) {
    const int h = t.dim(0), w = t.dim(1);
    py::array_t<double> out({h, w});
    auto rw = out.mutable_unchecked<2>();
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) rw(y, x) = t(y, x);
    return out;
}

hst::LdrImage ldr_from_array(const Arr& a, double ev) {
    hst::require(a.ndim() == 3 && a.shape(2) == 3, hst::errc::dimension_mismatch,
                 "expected (H,W,3) array");
    hst::LdrImage img;
    img.height = static_cast<int>(a.shape(0));
    img.width = static_cast<int>(a.shape(1));
    img.ev = ev;
    img.data.resize(static_cast<std::size_t>(img.width) * img.height * 3);
    auto r = a.unchecked<3>();
    std::size_t i = 0;
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x)
            for (int c = 0; c < 3; ++c) img.data[i++] = static_cast<float>(r(y, x, c));
    hst::validate(img);
    return img;
}

py::array array_from_hdr(const hst::HdrImage& img) {
    py::array_t<double> out({img.height, img.width, 3});
    auto rw = out.mutable_unchecked<3>();
    std::size_t i = 0;
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x)
            for (int c = 0; c < 3; ++c) rw(y, x, c) = img.data[i++];
    return out;
}

hst::HdrImage hdr_from_array(const Arr& a) {
    hst::HdrImage img;
    img.height = static_cast<int>(a.shape(0));
    img.width = static_cast<int>(a.shape(1));
    img.data.resize(static_cast<std::size_t>(img.width) * img.height * 3);
    auto r = a.unchecked<3>();
    std::size_t i = 0;
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x)
            for (int c = 0; c < 3; ++c) img.data[i++] = static_cast<float>(r(y, x, c));
    hst::validate(img);
    return img;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "ghost-free HDR fusion core";

    py::register_exception<hst::Error>(m, "HstError");

    py::class_<hst::NetConfig>(m, "NetConfig")
        .def(py::init([](int feat_channels, int window, int heads, int mlp_ratio) {
                 hst::NetConfig c;
                 c.feat_channels = feat_channels;
                 c.window = window;
                 c.heads = heads;
                 c.mlp_ratio = mlp_ratio;
                 hst::validate_config(c);
                 return c;
             }),
             py::arg("feat_channels") = 64, py::arg("window") = 8, py::arg("heads") = 4,
             py::arg("mlp_ratio") = 2)
        .def_readonly("feat_channels", &hst::NetConfig::feat_channels)
        .def_readonly("window", &hst::NetConfig::window)
        .def_readonly("heads", &hst::NetConfig::heads)
        .def_readonly("mlp_ratio", &hst::NetConfig::mlp_ratio);

    m.def("tiny_config", &hst::tiny_config);

    py::class_<hst::ParamSet>(m, "Params")
        .def_property_readonly("seed", [](const hst::ParamSet& p) { return p.seed; })
        .def_property_readonly("config", [](const hst::ParamSet& p) { return p.config; })
        .def_property_readonly("count", [](const hst::ParamSet& p) { return p.scalar_count(); })
        .def("save", [](const hst::ParamSet& p, const std::string& path) {
            hst::save_params(p, path);
        })
        .def("flat", [](const hst::ParamSet& p) {
            py::array_t<double> out(static_cast<py::ssize_t>(p.scalar_count()));
            double* dst = out.mutable_data();
            for (const auto& e : p.entries)
                dst = std::copy(e.value.v.begin(), e.value.v.end(), dst);
            return out;
        });

    m.def("init_params", &hst::init_params, py::arg("config"), py::arg("seed"));
    m.def("load_params", &hst::load_params, py::arg("path"));
    m.def("expected_param_count", &hst::expected_param_count, py::arg("config"));

    m.def(
        "tonemap_mu",
        [](const Arr& h, double mu) {
            hst::require(mu > 0.0, hst::errc::invalid_argument, "mu must be positive");
            py::array_t<double> out(std::vector<py::ssize_t>(h.shape(), h.shape() + h.ndim()));
            const double* src = h.data();
            double* dst = out.mutable_data();
            for (py::ssize_t i = 0; i < h.size(); ++i)
                dst[i] = hst::tonemap_sample(src[i], mu);
            return out;
        },
        py::arg("h"), py::arg("mu") = 5000.0);

    m.def(
        "ldr_to_hdr",
        [](const Arr& img, double ev, double gamma) {
            return array_from_hdr(hst::ldr_to_hdr(ldr_from_array(img, ev), gamma));
        },
        py::arg("img"), py::arg("ev"), py::arg("gamma") = 2.2);

    m.def("luminance",
          [](const Arr& rgb) { return hw_from_tensor(hst::luminance(tensor_from_hwc(rgb, 3))); });

    m.def(
        "st_map",
        [](const Arr& lum, double rho) {
            return hw_from_tensor(hst::st_response_map(tensor_from_hw(lum), rho));
        },
        py::arg("lum"), py::arg("rho") = hst::kStRho);

    m.def("gradient_magnitude_map", [](const Arr& lum) {
        return hw_from_tensor(hst::gradient_magnitude_map(tensor_from_hw(lum)));
    });

    m.def(
        "forward",
        [](const hst::ParamSet& p, const Arr& x1, const Arr& x2) {
            const hst::Tensor t1 = tensor_from_hwc(x1, 7);
            const hst::Tensor t2 = tensor_from_hwc(x2, 7);
            return hwc_from_tensor(hst::net_forward(t1, t2, p));
        },
        py::arg("params"), py::arg("x1"), py::arg("x2"));

    m.def(
        "build_stack",
        [](const Arr& img, double ev) {
            return hwc_from_tensor(hst::build_stack(ldr_from_array(img, ev)).data);
        },
        py::arg("img"), py::arg("ev"));

    m.def(
        "loss",
        [](const Arr& h, const Arr& gt, double lam) {
            const hst::LossValue lv = hst::loss(tensor_from_hwc(h, 3), tensor_from_hwc(gt, 3), lam);
            py::dict d;
            d["total"] = lv.total;
            d["mse"] = lv.mse_term;
            d["st"] = lv.st_term;
            d["lambda"] = lv.lambda;
            return d;
        },
        py::arg("h"), py::arg("gt"), py::arg("lam") = hst::kDefaultStLossWeight);

    m.def("psnr_l", [](const Arr& a, const Arr& b) {
        return hst::psnr_l(tensor_from_hwc(a, 3), tensor_from_hwc(b, 3));
    });
    m.def("psnr_mu", [](const Arr& a, const Arr& b) {
        return hst::psnr_mu(tensor_from_hwc(a, 3), tensor_from_hwc(b, 3));
    });

    m.def("select_reference", [](const std::vector<double>& evs) {
        return hst::select_reference(evs);
    });

    m.def(
        "fuse_pair",
        [](const Arr& a, double ev_a, const Arr& ref, double ev_ref, const hst::ParamSet& p) {
            return array_from_hdr(
                hst::fuse_pair(ldr_from_array(a, ev_a), ldr_from_array(ref, ev_ref), p));
        },
        py::arg("a"), py::arg("ev_a"), py::arg("ref"), py::arg("ev_ref"), py::arg("params"));

    m.def(
        "fuse_sequence",
        [](const std::vector<std::pair<Arr, double>>& inputs, const hst::ParamSet& p) {
            std::vector<hst::LdrImage> imgs;
            imgs.reserve(inputs.size());
            for (const auto& [arr, ev] : inputs) imgs.push_back(ldr_from_array(arr, ev));
            hst::FusionTrace trace;
            const hst::HdrImage out = hst::fuse_sequence(imgs, p, &trace);
            return py::make_tuple(array_from_hdr(out), trace.pair_fusions());
        },
        py::arg("inputs"), py::arg("params"));

    m.def(
        "synth_scene",
        [](std::uint64_t seed, int size, int displacement) {
            const hst::SynthScene s = hst::synth_scene(seed, size, displacement);
            py::list ldrs, evs;
            for (const hst::LdrImage& img : s.ldr_stack) {
                hst::HdrImage tmp;
                tmp.width = img.width;
                tmp.height = img.height;
                tmp.data = img.data;
                ldrs.append(array_from_hdr(tmp));
                evs.append(img.ev);
            }
            py::dict d;
            d["ldr"] = ldrs;
            d["evs"] = evs;
            d["gt"] = array_from_hdr(s.gt);
            return d;
        },
        py::arg("seed"), py::arg("size") = 64, py::arg("displacement") = 6);

    m.def(
        "grad_check",
        [](std::uint64_t seed, double epsilon, int probes) {
            const hst::SynthScene scene = hst::synth_scene(seed, 32, 3);
            const hst::ParamSet p = hst::init_params(hst::tiny_config(), seed);
            const hst::GradCheckReport r = hst::grad_check(p, scene, epsilon, probes);
            py::dict d;
            d["max_rel_error"] = r.max_rel_error;
            d["worst_param_path"] = r.worst_param_path;
            d["epsilon"] = r.epsilon;
            d["probes"] = r.probes;
            d["skipped"] = r.skipped;
            return d;
        },
        py::arg("seed") = 42, py::arg("epsilon") = 1e-3, py::arg("probes") = 200);

    m.def(
        "train_toy",
        [](std::uint64_t seed, int steps) {
            const hst::SynthScene scene = hst::synth_scene(seed, 32, 3);
            hst::TrainOptions opts;
            opts.seed = seed;
            const hst::TrainResult r = hst::train_toy(scene, steps, opts);
            py::array_t<double> curve({static_cast<py::ssize_t>(r.curve.size()),
                                       static_cast<py::ssize_t>(4)});
            auto rw = curve.mutable_unchecked<2>();
            for (std::size_t i = 0; i < r.curve.size(); ++i) {
                rw(static_cast<py::ssize_t>(i), 0) = r.curve[i].step;
                rw(static_cast<py::ssize_t>(i), 1) = r.curve[i].total;
                rw(static_cast<py::ssize_t>(i), 2) = r.curve[i].mse;
                rw(static_cast<py::ssize_t>(i), 3) = r.curve[i].st;
            }
            return py::make_tuple(r.params, curve);
        },
        py::arg("seed") = 42, py::arg("steps") = 500);

    m.def("save_hdr", [](const std::string& path, const Arr& img) {
        hst::save_hdr(hdr_from_array(img), path);
    });
    m.def("load_hdr",
          [](const std::string& path) { return array_from_hdr(hst::load_hdr(path)); });
    m.def(
        "load_ldr",
        [](const std::string& path, double ev) {
            const hst::LdrImage img = hst::load_ldr(path, ev);
            hst::HdrImage tmp;
            tmp.width = img.width;
            tmp.height = img.height;
            tmp.data = img.data;
            return array_from_hdr(tmp);
        },
        py::arg("path"), py::arg("ev"));

    m.attr("__version__") = "0.1.0";
}

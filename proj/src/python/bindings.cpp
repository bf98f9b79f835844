#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "ahocda/curriculum.hpp"
#include "ahocda/error.hpp"
#include "ahocda/hopfield.hpp"
#include "ahocda/model.hpp"
#include "ahocda/selfcheck.hpp"
#include "ahocda/spectrum.hpp"
#include "ahocda/synthdata.hpp"

namespace py = pybind11;
using namespace ahocda;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

/// (H, W) or (H, W, C) float array to Tensor.
Tensor to_tensor(const Array& a) {
    if (a.ndim() != 2 && a.ndim() != 3) throw InvalidInput("expected an (H, W) or (H, W, C) array");
    const int h = static_cast<int>(a.shape(0));
    const int w = static_cast<int>(a.shape(1));
    const int c = a.ndim() == 3 ? static_cast<int>(a.shape(2)) : 1;
    Tensor t(h, w, c);
    std::copy(a.data(), a.data() + t.data.size(), t.data.begin());
    return t;
}

Image to_image(const Array& a) {
    Image img;
    img.pixels = to_tensor(a);
    return img;
}

Array from_tensor(const Tensor& t) {
    Array out({t.h, t.w, t.c});
    std::copy(t.data.begin(), t.data.end(), out.mutable_data());
    return out;
}

py::array_t<std::complex<double>> from_spectrum(const spectrum::Spectrum& s) {
    py::array_t<std::complex<double>> out({s.h, s.w, s.c});
    std::copy(s.data.begin(), s.data.end(), out.mutable_data());
    return out;
}

Matrix to_matrix(const Array& a) {
    if (a.ndim() != 2) throw InvalidInput("expected a 2-D array");
    Matrix m(static_cast<int>(a.shape(0)), static_cast<int>(a.shape(1)));
    std::copy(a.data(), a.data() + m.data.size(), m.data.begin());
    return m;
}

Array from_matrix(const Matrix& m) {
    Array out({m.rows, m.cols});
    std::copy(m.data.begin(), m.data.end(), out.mutable_data());
    return out;
}

py::dict curriculum_dict(const curriculum::Curriculum& c, double beta) {
    return py::module_::import("json").attr("loads")(curriculum::to_json(c, beta).dump());
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Amplitude ranking, curriculum, Hopfield memory and synthetic benchmark bindings";

    py::register_exception<Error>(m, "Error");
    py::register_exception<InvalidInput>(m, "InvalidInput", PyExc_ValueError);
    py::register_exception<ParameterError>(m, "ParameterError", PyExc_ValueError);
    py::register_exception<StateError>(m, "StateError", PyExc_RuntimeError);
    py::register_exception<NumericError>(m, "NumericError", PyExc_ArithmeticError);
    py::register_exception<IoError>(m, "IoError", PyExc_OSError);

    // spectrum
    m.def("fft2", [](const Array& a) { return from_spectrum(spectrum::fft2(to_tensor(a))); }, py::arg("image"),
          "Center-shifted 2-D DFT per channel, shape (H, W, C).");
    m.def("amplitude_crop",
          [](const Array& a, double beta) { return from_tensor(spectrum::amplitude_crop(spectrum::fft2(to_tensor(a)), beta).values); },
          py::arg("image"), py::arg("beta"));
    m.def("crop_extent", &spectrum::crop_extent, py::arg("n"), py::arg("beta"));

    py::class_<spectrum::SourceAmplitudeProfile>(m, "SourceAmplitudeProfile")
        .def_readonly("n_source", &spectrum::SourceAmplitudeProfile::n_source)
        .def_readonly("beta", &spectrum::SourceAmplitudeProfile::beta)
        .def_property_readonly("mean_crop", [](const spectrum::SourceAmplitudeProfile& p) { return from_tensor(p.mean_crop); });
    m.def(
        "source_profile",
        [](const std::vector<Array>& images, double beta) {
            std::vector<Image> imgs;
            for (const auto& a : images) imgs.push_back(to_image(a));
            return spectrum::source_profile(imgs, beta);
        },
        py::arg("images"), py::arg("beta"));
    m.def(
        "domain_distance",
        [](const Array& a, const spectrum::SourceAmplitudeProfile& p) { return spectrum::domain_distance(to_image(a), p); },
        py::arg("image"), py::arg("profile"));

    // curriculum
    m.def(
        "build_curriculum",
        [](const std::vector<std::pair<std::string, double>>& distances, int k, double beta) {
            std::vector<curriculum::RankedImage> d;
            for (const auto& [id, delta] : distances) d.push_back({id, delta});
            return curriculum_dict(curriculum::build_curriculum(d, k), beta);
        },
        py::arg("distances"), py::arg("k"), py::arg("beta") = 0.09,
        "Curriculum as a dict {beta, K, ordered, stages, fake_source_per_stage, dropped}.");
    m.def("fake_source_count", &curriculum::fake_source_count, py::arg("curriculum_size"), py::arg("k"), py::arg("stage"));

    // hopfield
    py::class_<hopfield::HopfieldMemory>(m, "HopfieldMemory")
        .def(py::init([](const Array& memory, const Array& w_q, const Array& w_k, const Array& w_v, double tau) {
                 hopfield::HopfieldMemory mem;
                 mem.memory = to_matrix(memory);
                 mem.w_q = to_matrix(w_q);
                 mem.w_k = to_matrix(w_k);
                 mem.w_v = to_matrix(w_v);
                 mem.tau = tau;
                 hopfield::validate(mem);
                 return mem;
             }),
             py::arg("memory"), py::arg("w_q"), py::arg("w_k"), py::arg("w_v"), py::arg("tau") = 1.0)
        .def_property_readonly("memory", [](const hopfield::HopfieldMemory& h) { return from_matrix(h.memory); })
        .def_readonly("tau", &hopfield::HopfieldMemory::tau)
        .def_readonly("frozen", &hopfield::HopfieldMemory::frozen)
        .def("freeze", &hopfield::HopfieldMemory::freeze);
    m.def("make_memory", &hopfield::make_memory, py::arg("num_patterns"), py::arg("feature_dim"),
          py::arg("projection_dim"), py::arg("tau"), py::arg("seed"), py::arg("init_gain") = 1.0);
    m.def(
        "similarity",
        [](const hopfield::HopfieldMemory& mem, const std::vector<double>& z) { return hopfield::similarity(mem, z); },
        py::arg("memory"), py::arg("z"));
    m.def(
        "retrieve",
        [](const hopfield::HopfieldMemory& mem, const std::vector<double>& z) { return hopfield::retrieve(mem, z); },
        py::arg("memory"), py::arg("z"));
    m.def(
        "mchn_iterate",
        [](const hopfield::HopfieldMemory& mem, const std::vector<double>& q, int max_iters, double tol) {
            const auto r = hopfield::mchn_iterate(mem, q, max_iters, tol);
            return py::make_tuple(r.state, r.iterations, r.converged);
        },
        py::arg("memory"), py::arg("q"), py::arg("max_iters"), py::arg("tol"),
        "Returns (state, iterations, converged).");

    // losses
    m.def(
        "total_loss",
        [](double l_ce, double l_adv_seg, double l_adv_d, double lambda_adv) {
            return model::total_loss(l_ce, l_adv_seg, l_adv_d, lambda_adv).total;
        },
        py::arg("l_ce"), py::arg("l_adv_seg"), py::arg("l_adv_d"), py::arg("lambda_adv") = 0.001);

    // synthetic benchmark
    m.def(
        "generate_benchmark",
        [](const std::filesystem::path& dir, std::uint64_t seed, int image_size) {
            auto plan = synth::BenchmarkPlan::defaults();
            plan.scene.seed = seed;
            plan.scene.height = image_size;
            plan.scene.width = image_size;
            const auto bench = synth::gen_benchmark(plan);
            synth::write_benchmark(bench, dir);
            return bench.records.size();
        },
        py::arg("dir"), py::arg("seed") = 0, py::arg("image_size") = 64,
        "Writes the default benchmark to dir; returns the number of images.");

    // self-check
    m.def(
        "selfcheck",
        [](std::uint64_t seed, bool inject_gradient_fault) {
            py::list out;
            for (const auto& r : selfcheck::run({seed, inject_gradient_fault})) {
                py::dict d;
                d["name"] = r.name;
                d["measured"] = r.measured;
                d["tolerance"] = r.tolerance;
                d["passed"] = r.passed;
                d["detail"] = r.detail;
                out.append(d);
            }
            return out;
        },
        py::arg("seed") = 0, py::arg("inject_gradient_fault") = false);
}

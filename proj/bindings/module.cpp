#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "ddfusion/checkpoint.hpp"
#include "ddfusion/config.hpp"
#include "ddfusion/ddon.hpp"
#include "ddfusion/decomposition.hpp"
#include "ddfusion/ilgfn.hpp"
#include "ddfusion/imaging.hpp"
#include "ddfusion/metrics.hpp"

#include <stdexcept>

namespace py = pybind11;
using namespace ddf;

namespace {

// (H, W) or (C, H, W) float64 array -> CPU tensor, copying
torch::Tensor to_tensor(const py::array_t<double, py::array::c_style | py::array::forcecast>& a) {
  if (a.ndim() == 2) {
    auto t = torch::from_blob(const_cast<double*>(a.data()), {a.shape(0), a.shape(1)},
                              torch::kFloat64);
    return t.clone().unsqueeze(0);
  }
  if (a.ndim() == 3) {
    auto t = torch::from_blob(const_cast<double*>(a.data()),
                              {a.shape(0), a.shape(1), a.shape(2)}, torch::kFloat64);
    return t.clone();
  }
  throw std::invalid_argument("expected a (H, W) or (C, H, W) array");
}

py::array_t<double> to_array(const torch::Tensor& t) {
  auto x = t.detach().to(torch::kFloat64).contiguous();
  std::vector<py::ssize_t> shape(x.sizes().begin(), x.sizes().end());
  py::array_t<double> out(shape);
  std::memcpy(out.mutable_data(), x.data_ptr<double>(), sizeof(double) * x.numel());
  return out;
}

torch::Tensor plane(const py::array_t<double, py::array::c_style | py::array::forcecast>& a) {
  auto t = to_tensor(a);
  if (t.size(0) != 1) throw std::invalid_argument("expected a single-channel image");
  return t.squeeze(0);
}

}  // namespace

PYBIND11_MODULE(_ddfusion, m) {
  m.doc() = "Degraded infrared/visible image fusion core";

  // ---- imaging -------------------------------------------------------------
  m.def("rgb_to_y", [](const py::array_t<double, py::array::c_style | py::array::forcecast>& a) {
    return to_array(rgb_to_ycbcr(to_tensor(a)).y);
  }, py::arg("rgb"), "BT.601 luminance plane of an RGB image in [0, 1]");

  m.def("add_gaussian_noise", [](const py::array_t<double, py::array::c_style |
                                 py::array::forcecast>& a, double sigma, int64_t seed) {
    return to_array(add_gaussian_noise(to_tensor(a), sigma, seed));
  }, py::arg("img"), py::arg("sigma"), py::arg("seed"),
     "i.i.d. Gaussian noise; sigma on the 0-255 scale, deterministic per seed");

  m.def("add_stripe_noise", [](const py::array_t<double, py::array::c_style |
                               py::array::forcecast>& a, double intensity,
                               const std::string& orientation, int64_t seed) {
    const auto o = orientation == "horizontal" ? StripeOrientation::kHorizontal
                                               : StripeOrientation::kVertical;
    if (orientation != "horizontal" && orientation != "vertical")
      throw std::invalid_argument("orientation must be vertical|horizontal");
    return to_array(add_stripe_noise(to_tensor(a), intensity, o, seed));
  }, py::arg("img"), py::arg("intensity"), py::arg("orientation"), py::arg("seed"));

  m.def("darken", [](const py::array_t<double, py::array::c_style | py::array::forcecast>& a,
                     double gamma) { return to_array(darken(to_tensor(a), gamma)); },
        py::arg("img"), py::arg("gamma"));

  // ---- decomposition -------------------------------------------------------
  m.def("dct2", [](const py::array_t<double, py::array::c_style | py::array::forcecast>& a) {
    return to_array(dct2(plane(a).unsqueeze(0).unsqueeze(0)).squeeze(0).squeeze(0));
  }, py::arg("img"), "orthonormal 2D type-II DCT of a (H, W) plane");

  m.def("idct2", [](const py::array_t<double, py::array::c_style | py::array::forcecast>& a) {
    return to_array(idct2(plane(a).unsqueeze(0).unsqueeze(0)).squeeze(0).squeeze(0));
  }, py::arg("coeff"));

  m.def("split_frequency", [](const py::array_t<double, py::array::c_style |
                              py::array::forcecast>& a, double tau) {
    auto bands = split_frequency(dct2(plane(a).unsqueeze(0).unsqueeze(0)), tau);
    return py::make_tuple(to_array(idct2(bands.low).squeeze(0).squeeze(0)),
                          to_array(idct2(bands.high).squeeze(0).squeeze(0)));
  }, py::arg("img"), py::arg("tau") = kDefaultTau,
     "(low, high) spatial-domain frequency bands; low + high == img");

  m.def("retinex_decompose", [](const py::array_t<double, py::array::c_style |
                                py::array::forcecast>& a) {
    auto r = retinex_decompose(plane(a).unsqueeze(0).unsqueeze(0));
    return py::make_tuple(to_array(r.reflectance.squeeze(0).squeeze(0)),
                          to_array(r.illumination.squeeze(0).squeeze(0)));
  }, py::arg("img"), "(reflectance, illumination); reflectance * illumination == img");

  // ---- metrics ---------------------------------------------------------
  m.def("ag", [](const py::array_t<double, py::array::c_style | py::array::forcecast>& a) {
    return metrics::ag(plane(a));
  }, py::arg("img"));
  m.def("sf", [](const py::array_t<double, py::array::c_style | py::array::forcecast>& a) {
    return metrics::sf(plane(a));
  }, py::arg("img"));
  m.def("ei", [](const py::array_t<double, py::array::c_style | py::array::forcecast>& a) {
    return metrics::ei(plane(a));
  }, py::arg("img"));
  m.def("qabf", [](const py::array_t<double, py::array::c_style | py::array::forcecast>& a,
                   const py::array_t<double, py::array::c_style | py::array::forcecast>& b,
                   const py::array_t<double, py::array::c_style | py::array::forcecast>& f) {
    return metrics::qabf(plane(a), plane(b), plane(f));
  }, py::arg("a"), py::arg("b"), py::arg("fused"));
  m.def("qw", [](const py::array_t<double, py::array::c_style | py::array::forcecast>& a,
                 const py::array_t<double, py::array::c_style | py::array::forcecast>& b,
                 const py::array_t<double, py::array::c_style | py::array::forcecast>& f) {
    return metrics::qw(plane(a), plane(b), plane(f));
  }, py::arg("a"), py::arg("b"), py::arg("fused"));
  m.def("vif", [](const py::array_t<double, py::array::c_style | py::array::forcecast>& ref,
                  const py::array_t<double, py::array::c_style | py::array::forcecast>& dist) {
    return metrics::vif(plane(ref), plane(dist));
  }, py::arg("ref"), py::arg("dist"));
  m.def("fusion_vif", [](const py::array_t<double, py::array::c_style | py::array::forcecast>& a,
                         const py::array_t<double, py::array::c_style | py::array::forcecast>& b,
                         const py::array_t<double, py::array::c_style | py::array::forcecast>& f) {
    return metrics::fusion_vif(plane(a), plane(b), plane(f));
  }, py::arg("a"), py::arg("b"), py::arg("fused"));

  // ---- config / fusion ---------------------------------------------------
  m.def("default_config_json", [] { return ProjectConfig{}.to_json(); });

  m.def("fuse",
        [](const py::array_t<double, py::array::c_style | py::array::forcecast>& ir,
           const py::array_t<double, py::array::c_style | py::array::forcecast>& vi_rgb,
           const std::string& checkpoint_path, const std::string& config_json) {
          auto cfg = ProjectConfig::from_json(config_json);
          cfg.validate();
          auto ckpt = Checkpoint::load(checkpoint_path);
          if (ckpt.config_digest != cfg.digest())
            throw std::invalid_argument("checkpoint was written for a different config");
          Ddon ddon(cfg.block, cfg.tau, !cfg.model.use_ddon);
          Ilgfn ilgfn(cfg.block, !cfg.model.use_ilgfn);
          ckpt.load_into("ddon", *ddon);
          ckpt.load_into("ilgfn", *ilgfn);
          auto ir_t = to_tensor(ir);
          auto vi_t = to_tensor(vi_rgb);
          return to_array(fuse_image(ir_t, vi_t, ddon, ilgfn));
        },
        py::arg("ir"), py::arg("vi_rgb"), py::arg("checkpoint"), py::arg("config_json"),
        "fuse one aligned pair with a trained checkpoint; returns (3, H, W) RGB");
}

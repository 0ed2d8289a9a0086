#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>

#include "ssf/checkpoint.hpp"
#include "ssf/commands.hpp"
#include "ssf/config.hpp"
#include "ssf/dataset.hpp"
#include "ssf/grad_suite.hpp"
#include "ssf/loss.hpp"
#include "ssf/metrics.hpp"
#include "ssf/trainer.hpp"

namespace py = pybind11;
using namespace ssf;
using TF = Tensor<float>;
using Array = py::array_t<float, py::array::c_style | py::array::forcecast>;

namespace {

TF to_tensor(const Array& a) {
  Shape shape(a.shape(), a.shape() + a.ndim());
  return TF(std::move(shape), std::vector<float>(a.data(), a.data() + a.size()));
}

Array to_array(const TF& t) {
  Array out(std::vector<py::ssize_t>(t.shape().begin(), t.shape().end()));
  std::copy(t.values().begin(), t.values().end(), out.mutable_data());
  return out;
}

py::dict sample_dict(const Sample& s) {
  py::dict d;
  d["image"] = to_array(s.image);
  d["mask"] = to_array(s.mask);
  d["id"] = s.id;
  return d;
}

std::vector<Sample> samples_of(const py::list& items) {
  std::vector<Sample> out;
  for (const auto& item : items) {
    const auto d = item.cast<py::dict>();
    out.push_back({to_tensor(d["image"].cast<Array>()), to_tensor(d["mask"].cast<Array>()), py::str(d.attr("get")("id", ""))});
  }
  return out;
}

struct Model {
  RunConfig config;
  SSFormer<float> net;

  Model(const std::string& config_text, std::uint64_t seed) : config(parse_run_config(config_text)), net(config.model(), seed) {}
};

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "SSFormer: pyramid transformer encoder with a progressive locality decoder";

  py::register_exception<Error>(m, "Error", PyExc_RuntimeError);

  py::class_<Model>(m, "Model")
      .def(py::init<const std::string&, std::uint64_t>(), py::arg("config") = "", py::arg("seed") = 1)
      .def("forward", [](const Model& self, const Array& images) { return to_array(self.net.forward(to_tensor(images))); },
           py::arg("images"), "Logits [N,1,H,W] for images [N,3,H,W] in [0,1].")
      .def("predict", [](const Model& self, const Array& images) { return to_array(predict_masks(self.net, to_tensor(images))); },
           py::arg("images"))
      .def("parameter_count", [](const Model& self) { return self.net.parameter_count(); })
      .def("parameters",
           [](const Model& self) {
             py::dict out;
             for (const auto& [name, t] : self.net.named_parameters()) out[py::str(name)] = to_array(t);
             return out;
           })
      .def("save", [](const Model& self, const std::filesystem::path& path) { save_model(self.net, path); })
      .def("load", [](Model& self, const std::filesystem::path& path) { load_model(self.net, checkpoint_load(path)); })
      .def(
          "fit",
          [](Model& self, const py::list& train, const py::list& val, std::optional<int> epochs) {
            auto options = self.config.fit_options();
            if (epochs) options.epochs = *epochs;
            const auto tr = samples_of(train), va = samples_of(val);
            std::vector<py::dict> rows;
            {
              py::gil_scoped_release release;
              for (const auto& r : fit(self.net, tr, va, options)) {
                py::gil_scoped_acquire acquire;
                py::dict d;
                d["epoch"] = r.epoch;
                d["lr"] = r.lr;
                d["train_loss"] = r.train_loss;
                d["train_mdice"] = r.train_mdice;
                d["val_mdice"] = r.val_mdice;
                d["val_miou"] = r.val_miou;
                rows.push_back(d);
              }
            }
            return rows;
          },
          py::arg("train"), py::arg("val") = py::list(), py::arg("epochs") = py::none())
      .def("evaluate", [](const Model& self, const py::list& data) {
        const auto r = evaluate(self.net, samples_of(data));
        return py::make_tuple(r.mdice, r.miou);
      });

  m.def("synth_dataset", [](int n, std::int64_t size, std::uint64_t seed) {
    py::list out;
    for (const auto& s : synth_dataset(n, size, seed)) out.append(sample_dict(s));
    return out;
  }, py::arg("n"), py::arg("size") = 64, py::arg("seed") = 1);

  m.def("dice_iou", [](const Array& pred, const Array& target) {
    const auto s = score_mask(to_tensor(pred), to_tensor(target));
    return py::make_tuple(s.dice, s.iou);
  }, py::arg("pred"), py::arg("target"));

  m.def("combined_loss", [](const Array& logits, const Array& target) { return combined_loss(to_tensor(logits), to_tensor(target)).item(); },
        py::arg("logits"), py::arg("target"));

  py::enum_<Element>(m, "Element").value("cross3", Element::cross3).value("square3", Element::square3);
  m.def("dilate", [](const Array& mask, Element e, int it) { return to_array(dilate(to_tensor(mask), e, it)); }, py::arg("mask"),
        py::arg("element") = Element::cross3, py::arg("iterations") = 1);
  m.def("erode", [](const Array& mask, Element e, int it) { return to_array(erode(to_tensor(mask), e, it)); }, py::arg("mask"),
        py::arg("element") = Element::cross3, py::arg("iterations") = 1);

  m.def("render_config", [](const std::string& text) { return render_run_config(parse_run_config(text)); }, py::arg("text") = "");

  m.def("gradcheck", [] {
    py::list out;
    for (const auto& r : run_grad_suite(gradcheck_cases())) out.append(py::make_tuple(r.name, r.max_error, r.threshold, r.passed));
    return out;
  });

  m.def("train", [](const std::filesystem::path& out, std::optional<std::filesystem::path> config, std::optional<std::uint64_t> seed) {
    py::gil_scoped_release release;
    return cli::cmd_train({config, out, std::nullopt, seed});
  }, py::arg("out"), py::arg("config") = py::none(), py::arg("seed") = py::none(), "Same as `ssformer train`; returns the exit code.");
}

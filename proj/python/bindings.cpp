// SPDX-License-Identifier: Apache-2.0

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "vitpad/commands.hpp"
#include "vitpad/config.hpp"
#include "vitpad/cost.hpp"
#include "vitpad/evalkit.hpp"
#include "vitpad/model.hpp"
#include "vitpad/msmhsa.hpp"
#include "vitpad/ops.hpp"
#include "vitpad/selftest.hpp"

namespace py = pybind11;
using namespace vitpad;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

Tensord to_tensor(const Array& a) {
  Shape shape(a.shape(), a.shape() + a.ndim());
  return Tensord(shape, std::vector<double>(a.data(), a.data() + a.size()));
}

Array to_array(const Tensord& t) {
  std::vector<py::ssize_t> shape(t.shape().begin(), t.shape().end());
  Array out(shape);
  std::copy(t.data().begin(), t.data().end(), out.mutable_data());
  return out;
}

RunConfig config_from(const std::string& text) { return parse_config(text); }

py::dict report_dict(const MetricReport& r) {
  py::dict d;
  d["threshold"] = r.threshold;
  d["apcer"] = r.apcer;
  d["bpcer"] = r.bpcer;
  d["acer"] = r.acer;
  d["hter"] = r.hter;
  d["attacks_accepted"] = r.attacks_accepted;
  d["attacks_rejected"] = r.attacks_rejected;
  d["bonafide_accepted"] = r.bonafide_accepted;
  d["bonafide_rejected"] = r.bonafide_rejected;
  return d;
}

std::vector<ScoredSample> samples(const std::vector<double>& scores, const std::vector<int>& labels) {
  if (scores.size() != labels.size()) throw std::invalid_argument("scores and labels differ in length");
  std::vector<ScoredSample> out;
  for (std::size_t i = 0; i < scores.size(); ++i)
    out.push_back({scores[i], labels[i] ? Label::bona_fide : Label::attack});
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "vitpad native core";

  py::register_exception<ShapeError>(m, "ShapeError", PyExc_ValueError);
  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);

  m.def("matmul", [](const Array& a, const Array& b) { return to_array(matmul(to_tensor(a), to_tensor(b))); },
        py::arg("a"), py::arg("b"));
  m.def("softmax", [](const Array& x, std::size_t axis) { return to_array(softmax(to_tensor(x), axis)); },
        py::arg("x"), py::arg("axis"));
  m.def("conv2d",
        [](const Array& x, const Array& w, const Array& b, std::size_t stride, std::size_t pad) {
          return to_array(conv2d(to_tensor(x), to_tensor(w), to_tensor(b), stride, pad));
        },
        py::arg("x"), py::arg("weight"), py::arg("bias"), py::arg("stride") = 1, py::arg("padding") = 0);

  m.def("msmhsa_forward",
        [](const Array& q, const Array& k, const Array& v, std::vector<std::size_t> scales) {
          QKVMaps<double> qkv{to_tensor(q), to_tensor(k), to_tensor(v)};
          return to_array(msmhsa_forward(qkv, ScaleConfig{std::move(scales)}));
        },
        py::arg("q"), py::arg("k"), py::arg("v"), py::arg("scales"),
        "Multi-scale attention over [T, C, H, W] maps; returns [T, C, H, W].");
  m.def("token_count",
        [](std::size_t frames, std::size_t height, std::size_t width, std::size_t l) {
          return partition_patches(Tensord({frames, 1, height, width}), l).tokens.dim(0);
        },
        py::arg("frames"), py::arg("height"), py::arg("width"), py::arg("patch_grid"));

  m.def("compute_metrics",
        [](const std::vector<double>& scores, const std::vector<int>& labels, double threshold) {
          return report_dict(compute_metrics(samples(scores, labels), threshold));
        },
        py::arg("scores"), py::arg("labels"), py::arg("threshold"),
        "labels: 1 = bona fide, 0 = attack. Bona fide iff score >= threshold.");
  m.def("select_threshold",
        [](const std::vector<double>& scores, const std::vector<int>& labels) {
          return select_threshold(samples(scores, labels));
        },
        py::arg("scores"), py::arg("labels"));

  m.def("default_config", [] { return dump_config(default_run_config()); });
  m.def("count_cost",
        [](const std::string& config) {
          const auto r = count_cost(config_from(config).model);
          py::list rows;
          for (const auto& e : r.entries) {
            py::dict d;
            d["layer"] = e.layer;
            d["kind"] = e.kind;
            d["macs"] = e.macs;
            d["flops"] = e.flops;
            d["params"] = e.params;
            rows.append(d);
          }
          py::dict d;
          d["entries"] = rows;
          d["total_macs"] = r.total_macs;
          d["total_flops"] = r.total_flops;
          d["total_params"] = r.total_params;
          d["attention_flops"] = r.attention_flops();
          return d;
        },
        py::arg("config") = "");
  m.def("param_count", [](const std::string& config) { return init_params<float>(config_from(config).model).count(); },
        py::arg("config") = "");
  m.def("forward_init",
        [](const Array& clip, const std::string& config) {
          const auto cfg = config_from(config);
          const auto params = init_params<double>(cfg.model);
          return to_array(forward(to_tensor(clip), params, cfg.model));
        },
        py::arg("clip"), py::arg("config") = "", "Logits [2] of a freshly initialised model.");

  m.def("selftest", [] {
    std::vector<std::tuple<std::string, bool, std::string>> out;
    for (const auto& c : run_selftest()) out.emplace_back(c.name, c.passed, c.detail);
    return out;
  });
  m.def("run_cli",
        [](const std::vector<std::string>& args) {
          std::ostringstream out, err;
          int code = 0;
          {
            py::gil_scoped_release release;
            code = run_cli(args, out, err);
          }
          return std::make_tuple(code, out.str(), err.str());
        },
        py::arg("args"), "Runs a CLI verb in-process; returns (exit_code, stdout, stderr).");
}

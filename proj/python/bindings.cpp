#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "semgeo/cli.hpp"
#include "semgeo/config.hpp"
#include "semgeo/eval.hpp"
#include "semgeo/synth.hpp"

namespace py = pybind11;
using namespace semgeo;

namespace {

using F64 = py::array_t<double, py::array::c_style | py::array::forcecast>;
using I32 = py::array_t<int, py::array::c_style | py::array::forcecast>;
using U8 = py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>;

Image to_image(const F64& a) {
  if (a.ndim() != 2 && a.ndim() != 3) throw DimensionError("expected an HxW or HxWxC array");
  const int h = static_cast<int>(a.shape(0)), w = static_cast<int>(a.shape(1));
  const int c = a.ndim() == 3 ? static_cast<int>(a.shape(2)) : 1;
  return Image(h, w, c, std::vector<double>(a.data(), a.data() + a.size()));
}

template <typename T, typename A>
Raster<T> to_raster(const A& a) {
  if (a.ndim() != 2) throw DimensionError("expected an HxW array");
  return Raster<T>(static_cast<int>(a.shape(0)), static_cast<int>(a.shape(1)),
                   std::vector<T>(a.data(), a.data() + a.size()));
}

py::array_t<double> from_image(const Image& img) {
  py::array_t<double> out({img.height(), img.width(), img.channels()});
  std::copy(img.data().begin(), img.data().end(), out.mutable_data());
  return out;
}

template <typename T>
py::array_t<T> from_raster(const Raster<T>& r) {
  py::array_t<T> out({r.height(), r.width()});
  std::copy(r.values().begin(), r.values().end(), out.mutable_data());
  return out;
}

DepthMap to_depth(const F64& a) {
  const Raster<double> r = to_raster<double>(a);
  return DepthMap::from_values(r.height(), r.width(), r.values());
}

py::array_t<double> from_depth(const DepthMap& d) {
  Raster<double> r = d.depth;
  for (std::size_t i = 0; i < r.size(); ++i) {
    if (!d.valid[i]) r[i] = 0.0;
  }
  return from_raster(r);
}

CameraIntrinsics to_intrinsics(const std::vector<double>& k) {
  if (k.size() != 4) throw ArgumentError("intrinsics must be (fx, fy, cx, cy)");
  CameraIntrinsics c{k[0], k[1], k[2], k[3]};
  c.validate();
  return c;
}

Pose6 to_pose(const std::vector<double>& p) {
  if (p.size() != 6) throw ArgumentError("pose must be (rx, ry, rz, tx, ty, tz)");
  return Pose6{{p[0], p[1], p[2]}, {p[3], p[4], p[5]}};
}

std::vector<double> from_pose(const Pose6& p) {
  return {p.r.x(), p.r.y(), p.r.z(), p.t.x(), p.t.y(), p.t.z()};
}

py::dict from_flow(const FlowField& f) {
  py::dict d;
  d["u"] = from_raster(f.u);
  d["v"] = from_raster(f.v);
  d["valid"] = from_raster(f.valid);
  return d;
}

FlowField to_flow(const F64& u, const F64& v, const std::optional<U8>& valid) {
  FlowField f;
  f.u = to_raster<double>(u);
  f.v = to_raster<double>(v);
  f.valid = valid ? to_raster<std::uint8_t>(*valid) : Mask(f.u.height(), f.u.width(), 1);
  if (f.v.height() != f.u.height() || f.v.width() != f.u.width() || f.valid.height() != f.u.height() ||
      f.valid.width() != f.u.width()) {
    throw DimensionError("flow components differ in size");
  }
  return f;
}

py::dict from_metrics(const DepthMetrics& m) {
  py::dict d;
  d["abs_rel"] = m.abs_rel;
  d["sq_rel"] = m.sq_rel;
  d["rmse"] = m.rmse;
  d["rmse_log"] = m.rmse_log;
  d["d1"] = m.d1;
  d["d2"] = m.d2;
  d["d3"] = m.d3;
  d["pixels"] = m.pixels;
  return d;
}

LossConfig loss_config(double alpha) {
  LossConfig c;
  c.alpha = alpha;
  c.validate();
  return c;
}

Mask mask_or_all(const std::optional<U8>& m, int h, int w) {
  return m ? to_raster<std::uint8_t>(*m) : Mask(h, w, 1);
}

ScenePair pair_from_config(const RunConfig& cfg) {
  const SceneSpec spec = cfg.scene_spec();
  ScenePair pair = make_pair(build_scene(spec), cfg.baseline(), spec.intrinsics);
  pair.problem.config = cfg.loss_config();
  pair.problem.losses = cfg.losses();
  return pair;
}

py::dict synth(const std::string& config) {
  const ScenePair pair = pair_from_config(RunConfig::parse(config));
  py::dict d;
  d["target"] = from_image(pair.problem.target);
  d["source"] = from_image(pair.problem.sources[0]);
  d["labels"] = from_raster(pair.truth.labels.labels);
  d["instances"] = from_raster(pair.truth.instances.ids);
  d["depth"] = from_depth(pair.truth.depth);
  d["pose"] = from_pose(pair.truth.pose);
  d["flow"] = from_flow(pair.truth.flow);
  d["noc"] = from_raster(pair.truth.noc);
  const CameraIntrinsics& k = pair.problem.intrinsics;
  d["intrinsics"] = std::vector<double>{k.fx, k.fy, k.cx, k.cy};
  return d;
}

py::dict align(const std::string& config) {
  const RunConfig cfg = RunConfig::parse(config);
  const ScenePair pair = pair_from_config(cfg);
  AlignOptions opts;
  opts.iters = static_cast<int>(cfg.integer("iters"));
  opts.adam = cfg.adam();
  AlignResult r;
  {
    py::gil_scoped_release release;
    r = direct_align(pair.problem, initial_variables(pair.problem, cfg.init_options()), opts);
  }
  const DepthMap depth = r.variables.depth(0);
  std::vector<double> totals;
  for (const auto& row : r.trace) totals.push_back(row.value.total);
  py::dict d;
  d["depth"] = from_depth(depth);
  d["pose"] = from_pose(r.variables.poses[0]);
  d["trace"] = totals;
  d["metrics"] = from_metrics(depth_metrics(prepare_prediction(depth, pair.truth.depth), pair.truth.depth));
  return d;
}

py::list gradcheck(std::uint64_t seed, const std::string& losses) {
  const GradCheckProblem g = make_gradcheck_problem(seed, LossSelection::parse(losses));
  py::list out;
  for (const TermCheck& c : check_gradients(g.problem, g.variables, {})) {
    py::dict d;
    d["term"] = c.term;
    d["max_rel_error"] = c.report.max_rel_error;
    d["block"] = c.block;
    d["passed"] = c.passed;
    out.append(d);
  }
  return out;
}

py::tuple run(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  int code;
  {
    py::gil_scoped_release release;
    code = run_command(args, out, err);
  }
  return py::make_tuple(code, out.str(), err.str());
}

}  // namespace

PYBIND11_MODULE(semgeo, m) {
  m.doc() = "Semantic-guided photometric depth and pose alignment";

  py::register_exception<DimensionError>(m, "DimensionError", PyExc_ValueError);
  py::register_exception<ArgumentError>(m, "ArgumentError", PyExc_ValueError);
  py::register_exception<DegenerateInputError>(m, "DegenerateInputError", PyExc_ValueError);
  py::register_exception<InvariantError>(m, "InvariantError", PyExc_ValueError);
  py::register_exception<ParseError>(m, "ParseError", PyExc_ValueError);
  py::register_exception<FormatError>(m, "FormatError", PyExc_ValueError);
  py::register_exception<NumericError>(m, "NumericError", PyExc_ArithmeticError);

  m.def(
      "rigid_flow",
      [](const F64& depth, const std::vector<double>& pose, const std::vector<double>& k) {
        return from_flow(rigid_flow(to_depth(depth), to_pose(pose), to_intrinsics(k)));
      },
      py::arg("depth"), py::arg("pose"), py::arg("intrinsics"),
      "Flow (u, v, valid) from target to source for depth HxW, pose (r, t) and (fx, fy, cx, cy).");

  m.def(
      "bilinear_warp",
      [](const F64& src, const F64& u, const F64& v) {
        const WarpResult r = bilinear_warp(to_image(src), to_flow(u, v, std::nullopt));
        return py::make_tuple(from_image(r.image), from_raster(r.valid));
      },
      py::arg("src"), py::arg("u"), py::arg("v"));

  m.def(
      "ssim_map",
      [](const F64& a, const F64& b) {
        const Image s = ssim_map(to_image(a), to_image(b), {});
        return from_raster(Raster<double>(s.height(), s.width(), std::vector<double>(s.data().begin(), s.data().end())));
      },
      py::arg("a"), py::arg("b"), "Per-pixel SSIM averaged over channels.");

  m.def(
      "reconstruction_loss",
      [](const F64& target, const F64& recon, const std::optional<U8>& valid, double alpha) {
        const Image t = to_image(target);
        return reconstruction_loss(t, to_image(recon), mask_or_all(valid, t.height(), t.width()), loss_config(alpha));
      },
      py::arg("target"), py::arg("recon"), py::arg("valid") = py::none(), py::arg("alpha") = 0.85);

  m.def(
      "edge_aware_smoothness",
      [](const F64& depth, const F64& image) { return edge_aware_smoothness(to_depth(depth), to_image(image)); },
      py::arg("depth"), py::arg("image"));

  m.def(
      "masked_reconstruction_loss",
      [](const F64& target, const F64& recon, const I32& labels, int classes, const std::optional<U8>& valid,
         double alpha) {
        const Image t = to_image(target);
        const OneHotSemantic s = one_hot_encode(SemanticLabelMap(to_raster<int>(labels), classes));
        return masked_reconstruction_loss(t, to_image(recon), s, mask_or_all(valid, t.height(), t.width()),
                                          loss_config(alpha));
      },
      py::arg("target"), py::arg("recon"), py::arg("labels"), py::arg("classes"), py::arg("valid") = py::none(),
      py::arg("alpha") = 0.85);

  m.def(
      "boundary_weights",
      [](const I32& labels, int classes, int radius) {
        return from_raster(boundary_weights(SemanticLabelMap(to_raster<int>(labels), classes), radius));
      },
      py::arg("labels"), py::arg("classes"), py::arg("radius") = 1);

  m.def(
      "one_hot_encode",
      [](const I32& labels, int classes) { return from_image(one_hot_encode(SemanticLabelMap(to_raster<int>(labels), classes))); },
      py::arg("labels"), py::arg("classes"));

  m.def(
      "dense_encode",
      [](const I32& labels, int classes) { return from_image(dense_encode(SemanticLabelMap(to_raster<int>(labels), classes))); },
      py::arg("labels"), py::arg("classes"));

  m.def(
      "prepare_prediction",
      [](const F64& pred, const F64& gt) { return from_depth(prepare_prediction(to_depth(pred), to_depth(gt))); },
      py::arg("pred"), py::arg("gt"), "Median scaling to the ground truth, then clipping to [0.001, 80]. 0 = invalid.");

  m.def(
      "depth_metrics", [](const F64& pred, const F64& gt) { return from_metrics(depth_metrics(to_depth(pred), to_depth(gt))); },
      py::arg("pred"), py::arg("gt"));

  m.def(
      "flow_metrics",
      [](const F64& pu, const F64& pv, const F64& gu, const F64& gv, const std::optional<U8>& gt_valid,
         const std::optional<U8>& noc) {
        const FlowField pred = to_flow(pu, pv, std::nullopt);
        const FlowField gt = to_flow(gu, gv, gt_valid);
        const FlowMetrics f = flow_metrics(pred, gt, noc ? to_raster<std::uint8_t>(*noc) : gt.valid);
        py::dict d;
        d["epe_noc"] = f.epe_noc;
        d["epe_all"] = f.epe_all;
        d["acc_noc"] = f.acc_noc;
        d["acc_all"] = f.acc_all;
        return d;
      },
      py::arg("pred_u"), py::arg("pred_v"), py::arg("gt_u"), py::arg("gt_v"), py::arg("gt_valid") = py::none(),
      py::arg("noc") = py::none());

  m.def("synth", &synth, py::arg("config") = "",
        "Render a scene pair from key=value configuration text; returns frames and ground truth.");
  m.def("align", &align, py::arg("config") = "",
        "Synthesize the configured scene, run direct alignment and evaluate the recovered depth.");
  m.def("gradcheck", &gradcheck, py::arg("seed") = 1, py::arg("losses") = "photo,smooth,semwarp,mask,edge,transfer");
  m.def("run_command", &run, py::arg("args"), "Run a CLI subcommand; returns (exit code, stdout, stderr).");
  m.def("default_config", [] { return RunConfig().echo(); });
}

#include "semgeo/cli.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <cstring>
#include <optional>
#include <sstream>

#include "semgeo/encoding.hpp"
#include "semgeo/eval.hpp"
#include "semgeo/io.hpp"
#include "semgeo/synth.hpp"

namespace semgeo {

namespace fs = std::filesystem;

std::string format_pose(const Pose6& p) {
  std::string out;
  for (int i = 0; i < 6; ++i) {
    const double v = i < 3 ? p.r[i] : p.t[i - 3];
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    if (i) out += ' ';
    out += buf;
  }
  return out + '\n';
}

Pose6 parse_pose(const std::string& text) {
  std::istringstream in(text);
  Eigen::Matrix<double, 6, 1> v;
  for (int i = 0; i < 6; ++i) {
    if (!(in >> v[i])) throw FormatError("pose: expected six numbers (rx ry rz tx ty tz)");
  }
  return Pose6::from_vector(v);
}

std::string trace_csv(const std::vector<TraceRow>& trace) {
  std::string out = "iteration,total";
  if (!trace.empty()) {
    for (const auto& t : trace.front().value.terms) out += "," + t.name;
  }
  out += '\n';
  for (const auto& row : trace) {
    out += std::to_string(row.iteration) + "," + format_number(row.value.total);
    for (const auto& t : row.value.terms) out += "," + format_number(t.value);
    out += '\n';
  }
  return out;
}

namespace {

CameraIntrinsics read_intrinsics(const fs::path& path) {
  std::istringstream in(read_file(path));
  CameraIntrinsics k;
  if (!(in >> k.fx >> k.fy >> k.cx >> k.cy)) {
    throw FormatError("'" + path.string() + "': expected fx fy cx cy");
  }
  k.validate();
  return k;
}

std::string format_intrinsics(const CameraIntrinsics& k) {
  char buf[128];
  std::snprintf(buf, sizeof buf, "%.17g %.17g %.17g %.17g\n", k.fx, k.fy, k.cx, k.cy);
  return buf;
}

bool looks_like_ground_truth(const fs::path& dir) {
  if (dir.filename() == "gt") return true;
  for (const char* name : {"depth.png", "pose.txt", "flow.png", "rigid_flow.png"}) {
    if (fs::exists(dir / name)) return true;
  }
  return false;
}

}  // namespace

FrameSet read_frames(const fs::path& dir, int class_count, bool need_labels) {
  if (looks_like_ground_truth(dir) || looks_like_ground_truth(dir / "frames")) {
    throw ArgumentError("refusing to read ground truth from '" + dir.string() +
                        "'; point the command at a directory holding frames/");
  }
  const fs::path f = dir / "frames";
  if (!fs::is_directory(f)) throw Error("missing frames directory '" + f.string() + "'");
  FrameSet s;
  s.target = read_rgb_png(f / "target.png");
  for (int i = 0; fs::exists(f / ("source_" + std::to_string(i) + ".png")); ++i) {
    s.sources.push_back(read_rgb_png(f / ("source_" + std::to_string(i) + ".png")));
  }
  if (s.sources.empty()) throw Error("'" + f.string() + "' holds no source_0.png");
  s.intrinsics = read_intrinsics(f / "intrinsics.txt");
  if (fs::exists(f / "target_labels.png") || need_labels) {
    s.target_labels = read_label_png(f / "target_labels.png", class_count);
    for (std::size_t i = 0; i < s.sources.size(); ++i) {
      const fs::path p = f / ("source_" + std::to_string(i) + "_labels.png");
      if (!fs::exists(p)) break;
      s.source_labels.push_back(read_label_png(p, class_count));
    }
  }
  if (fs::exists(f / "target_instances.png")) s.target_instances = read_instance_png(f / "target_instances.png");
  return s;
}

void write_frames(const fs::path& dir, const FrameSet& s) {
  const fs::path f = dir / "frames";
  fs::create_directories(f);
  write_rgb_png(f / "target.png", s.target);
  for (std::size_t i = 0; i < s.sources.size(); ++i) {
    write_rgb_png(f / ("source_" + std::to_string(i) + ".png"), s.sources[i]);
  }
  if (s.target_labels.labels.size()) write_label_png(f / "target_labels.png", s.target_labels);
  for (std::size_t i = 0; i < s.source_labels.size(); ++i) {
    write_label_png(f / ("source_" + std::to_string(i) + "_labels.png"), s.source_labels[i]);
  }
  if (s.target_instances.ids.size()) write_instance_png(f / "target_instances.png", s.target_instances);
  write_file_atomic(f / "intrinsics.txt", format_intrinsics(s.intrinsics));
}

namespace {

struct CommonOptions {
  std::string config;
  std::optional<long> seed;
  std::string out;
  std::optional<long> iters;
  std::string losses;
  bool losses_given = false;
};

void add_common(CLI::App* sub, CommonOptions& o) {
  sub->add_option("--config", o.config, "Run configuration (key=value lines)");
  sub->add_option("--seed", o.seed, "Seed for scene textures, classifier init and check problems");
  sub->add_option("--out", o.out, "Output directory");
  sub->add_option("--iters", o.iters, "Optimizer iterations");
  sub->add_option("--losses", o.losses, "Comma list from photo,smooth,semwarp,mask,edge,transfer");
}

RunConfig resolve(const CommonOptions& o) {
  RunConfig cfg = o.config.empty() ? RunConfig() : RunConfig::parse(read_file(o.config));
  if (o.seed) cfg.set("seed", std::to_string(*o.seed));
  if (o.iters) cfg.set("iters", std::to_string(*o.iters));
  if (!o.losses.empty()) cfg.set("losses", o.losses);
  return cfg;
}

fs::path prepare_out(const CommonOptions& o, const RunConfig& cfg, bool required) {
  if (o.out.empty()) {
    if (required) throw ArgumentError("--out DIR is required for this command");
    return {};
  }
  const fs::path dir(o.out);
  fs::create_directories(dir);
  write_file_atomic(dir / "config.resolved", cfg.echo());
  return dir;
}

bool needs_labels(const LossSelection& s) {
  return s.has(LossTerm::semwarp) || s.has(LossTerm::mask) || s.has(LossTerm::edge) ||
         s.has(LossTerm::transfer);
}

AlignOptions align_options(const RunConfig& cfg) {
  AlignOptions a;
  const long iters = cfg.integer("iters");
  if (iters < 1 || iters > 100000000) throw ArgumentError("iters must lie in [1, 1e8]");
  a.iters = static_cast<int>(iters);
  a.adam = cfg.adam();
  return a;
}

AlignmentProblem problem_from_config(const RunConfig& cfg, AlignmentProblem p) {
  p.config = cfg.loss_config();
  p.losses = cfg.losses();
  p.validate();
  return p;
}

int cmd_synth(const CommonOptions& o, std::ostream& out) {
  const RunConfig cfg = resolve(o);
  const SceneSpec spec = cfg.scene_spec();
  const Scene scene = build_scene(spec);
  const Pose6 baseline = cfg.baseline();
  const ScenePair pair = make_pair(scene, baseline, spec.intrinsics);
  const fs::path dir = prepare_out(o, cfg, true);

  FrameSet frames;
  frames.target = pair.problem.target;
  frames.sources = pair.problem.sources;
  frames.target_labels = pair.problem.target_semantics;
  frames.source_labels = pair.problem.source_semantics;
  frames.target_instances = pair.truth.instances;
  frames.intrinsics = spec.intrinsics;
  write_frames(dir, frames);

  const fs::path g = dir / "gt";
  fs::create_directories(g);
  const GroundTruth& t = pair.truth;
  write_depth_png(g / "depth.png", t.depth);
  write_file_atomic(g / "pose.txt", format_pose(t.pose));
  write_flow_png(g / "flow.png", t.flow);
  write_flow_png(g / "rigid_flow.png", t.rigid_flow);
  write_label_png(g / "labels.png", t.labels);
  write_instance_png(g / "instances.png", t.instances);
  write_label_png(g / "noc.png", SemanticLabelMap(Raster<int>(t.noc.height(), t.noc.width(),
                                                              std::vector<int>(t.noc.values().begin(),
                                                                               t.noc.values().end())),
                                                   2));
  char motion[128];
  std::snprintf(motion, sizeof motion, "%d %.17g %.17g %.17g\n", t.has_object_motion ? 1 : 0,
                t.object_motion.x(), t.object_motion.y(), t.object_motion.z());
  write_file_atomic(g / "object_motion.txt", motion);
  out << "wrote " << scene_kind_name(spec.kind) << " scene to " << dir.string() << '\n';
  return 0;
}

int cmd_align(const CommonOptions& o, const std::string& input, std::ostream& out) {
  const RunConfig cfg = resolve(o);
  const LossSelection losses = cfg.losses();
  const int classes = static_cast<int>(cfg.integer("classes"));
  const FrameSet frames = read_frames(input, classes, needs_labels(losses));
  AlignmentProblem p;
  p.target = frames.target;
  p.sources = frames.sources;
  p.target_semantics = frames.target_labels;
  p.source_semantics = frames.source_labels;
  p.intrinsics = frames.intrinsics;
  p = problem_from_config(cfg, std::move(p));
  const fs::path dir = prepare_out(o, cfg, true);

  const Variables init = initial_variables(p, cfg.init_options());
  const AlignResult r = direct_align(p, init, align_options(cfg));
  const DepthMap depth = r.variables.depth(0);
  write_depth_png(dir / "depth.png", depth);
  std::string poses;
  for (const auto& pose : r.variables.poses) poses += format_pose(pose);
  write_file_atomic(dir / "pose.txt", poses);
  write_flow_png(dir / "flow.png", rigid_flow(depth, r.variables.poses.front(), p.intrinsics));
  write_file_atomic(dir / "trace.csv", trace_csv(r.trace));
  if (r.variables.classifier) write_classifier(dir / "classifier.bin", *r.variables.classifier);
  out << "final objective " << format_number(r.trace.back().value.total) << " after " << r.trace.size()
      << " iterations\n";
  return 0;
}

int cmd_eval_depth(const CommonOptions& o, const std::string& pred_path, const std::string& gt_path,
                   const std::string& labels_path, std::ostream& out) {
  const RunConfig cfg = resolve(o);
  const DepthMap pred = read_depth_png(pred_path);
  DepthMap gt = read_depth_png(gt_path);
  if (pred.height() != gt.height() || pred.width() != gt.width()) {
    throw DimensionError("prediction is " + std::to_string(pred.height()) + "x" +
                         std::to_string(pred.width()) + " but ground truth is " +
                         std::to_string(gt.height()) + "x" + std::to_string(gt.width()));
  }
  if (cfg.flag("garg_crop")) gt.valid = mask_and(gt.valid, garg_crop_mask(gt.height(), gt.width()));
  const DepthMap prepared = prepare_prediction(pred, gt);
  const DepthMetrics m = depth_metrics(prepared, gt);
  const fs::path dir = prepare_out(o, cfg, false);
  if (!dir.empty()) {
    write_file_atomic(dir / "depth_metrics.csv", depth_csv_header() + "\n" + depth_csv_row(m) + "\n");
  }
  out << format_table_row(m) << '\n';
  if (!labels_path.empty()) {
    const int classes = static_cast<int>(cfg.integer("classes"));
    const SemanticLabelMap sem = read_label_png(labels_path, classes);
    const std::vector<std::string> names =
        classes == 19 ? cityscapes_class_names() : std::vector<std::string>{};
    const CategoryReport rep = category_report(prepared, gt, sem, names, default_dynamic_classes());
    std::string csv = "class,pixels," + depth_csv_header() + "\n";
    const auto row = [&](const CategoryRow& r) {
      csv += r.name + ",";
      if (r.metrics) {
        csv += std::to_string(r.metrics->pixels) + "," + depth_csv_row(*r.metrics) + "\n";
      } else {
        csv += "0,absent,absent,absent,absent,absent,absent,absent\n";
      }
    };
    for (const auto& r : rep.classes) row(r);
    row(rep.dynamic);
    if (!dir.empty()) write_file_atomic(dir / "category_metrics.csv", csv);
    out << csv;
  }
  return 0;
}

int cmd_eval_flow(const CommonOptions& o, const std::string& pred_path, const std::string& gt_path,
                  const std::string& noc_path, std::ostream& out) {
  const RunConfig cfg = resolve(o);
  const FlowField pred = read_flow_png(pred_path);
  const FlowField gt = read_flow_png(gt_path);
  if (pred.height() != gt.height() || pred.width() != gt.width()) {
    throw DimensionError("flow prediction and ground truth sizes differ");
  }
  Mask noc = gt.valid;
  if (!noc_path.empty()) {
    const SemanticLabelMap m = read_label_png(noc_path, 2);
    if (m.height() != gt.height() || m.width() != gt.width()) {
      throw DimensionError("noc mask size differs from the flow");
    }
    for (std::size_t i = 0; i < noc.size(); ++i) noc[i] = m.labels[i] != 0;
  }
  const FlowMetrics m = flow_metrics(pred, gt, noc);
  const std::string csv = "epe_noc,epe_all,acc_noc,acc_all\n" + format_number(m.epe_noc) + "," +
                          format_number(m.epe_all) + "," + format_number(m.acc_noc) + "," +
                          format_number(m.acc_all) + "\n";
  const fs::path dir = prepare_out(o, cfg, false);
  if (!dir.empty()) write_file_atomic(dir / "flow_metrics.csv", csv);
  out << csv;
  return 0;
}

int cmd_gradcheck(const CommonOptions& o, std::ostream& out) {
  const RunConfig cfg = resolve(o);
  const LossSelection losses = cfg.losses();
  if (losses.empty()) throw ArgumentError("no loss term selected");
  GradCheckProblem g = make_gradcheck_problem(static_cast<std::uint64_t>(cfg.integer("seed")), losses);
  LossConfig lc = cfg.loss_config();
  lc.pyramid_levels = g.problem.config.pyramid_levels;
  g.problem.config = lc;
  const GradCheckOptions opts = cfg.gradcheck_options();
  const std::vector<TermCheck> checks = check_gradients(g.problem, g.variables, opts);
  bool ok = true;
  std::string csv = "term,max_rel_error,coordinate,block,passed\n";
  for (const auto& c : checks) {
    ok = ok && c.passed;
    out << c.term << ": max rel err " << format_number(c.report.max_rel_error) << " at " << c.block
        << " [" << c.report.argmax << "] " << (c.passed ? "ok" : "FAILED") << '\n';
    csv += c.term + "," + format_number(c.report.max_rel_error) + "," + std::to_string(c.report.argmax) +
           "," + c.block + "," + (c.passed ? "true" : "false") + "\n";
  }
  const fs::path dir = prepare_out(o, cfg, false);
  if (!dir.empty()) write_file_atomic(dir / "gradcheck.csv", csv);
  out << (ok ? "gradient check passed" : "gradient check failed") << " (tolerance "
      << format_number(opts.tolerance) << ")\n";
  return ok ? 0 : 1;
}

int cmd_sweep(const CommonOptions& o, std::ostream& out) {
  const RunConfig cfg = resolve(o);
  const SceneSpec spec = cfg.scene_spec();
  const ScenePair pair = make_pair(build_scene(spec), cfg.baseline(), spec.intrinsics);
  const AlignmentProblem p = problem_from_config(cfg, pair.problem);
  const fs::path dir = prepare_out(o, cfg, true);
  const Variables init = initial_variables(p, cfg.init_options());
  const auto rows = lighting_sweep(p, init, pair.truth.depth, default_lighting_scales(), align_options(cfg));
  std::ostringstream csv;
  write_lighting_csv(csv, rows);
  write_file_atomic(dir / "lighting.csv", csv.str());
  out << csv.str();
  return 0;
}

int cmd_encode(const CommonOptions& o, const std::string& input, std::ostream& out) {
  const RunConfig cfg = resolve(o);
  const AugmentSpec spec = cfg.augment_spec();
  const FrameSet frames = read_frames(input, static_cast<int>(cfg.integer("classes")), true);
  InstanceLabelMap ids = frames.target_instances;
  if (ids.ids.size() == 0) ids = InstanceLabelMap(frames.target.height(), frames.target.width());
  const Image aug = augment_input(frames.target, frames.target_labels, frames.target_labels, ids, spec);

  std::vector<std::string> names = {"r", "g", "b"};
  if (spec.use_dense) names.push_back("semantic_dense");
  if (spec.use_onehot_semantic) {
    for (int k = 0; k < spec.semantic_classes; ++k) names.push_back("semantic_" + std::to_string(k));
  }
  if (spec.use_onehot_instance_class) {
    for (int k = 0; k < spec.instance_classes; ++k) names.push_back("instance_class_" + std::to_string(k));
  }
  if (spec.use_instance_edge) names.push_back("instance_edge");

  std::string bin;
  const auto put32 = [&](std::uint32_t v) {
    char b[4];
    std::memcpy(b, &v, 4);
    bin.append(b, 4);
  };
  put32(static_cast<std::uint32_t>(aug.height()));
  put32(static_cast<std::uint32_t>(aug.width()));
  put32(static_cast<std::uint32_t>(aug.channels()));
  for (double v : aug.data()) {
    char b[8];
    std::memcpy(b, &v, 8);
    bin.append(b, 8);
  }
  std::string listing;
  for (const auto& n : names) listing += n + "\n";
  const fs::path dir = prepare_out(o, cfg, true);
  write_file_atomic(dir / "augmented.bin", bin);
  write_file_atomic(dir / "channels.txt", listing);
  out << "wrote " << aug.channels() << " channels of " << aug.height() << "x" << aug.width() << '\n';
  return 0;
}

const char* error_kind(const Error& e) {
  if (dynamic_cast<const DimensionError*>(&e)) return "dimension error";
  if (dynamic_cast<const FormatError*>(&e)) return "format error";
  if (dynamic_cast<const ParseError*>(&e)) return "parse error";
  if (dynamic_cast<const ArgumentError*>(&e)) return "argument error";
  if (dynamic_cast<const DegenerateInputError*>(&e)) return "degenerate input";
  if (dynamic_cast<const NumericError*>(&e)) return "numeric error";
  if (dynamic_cast<const InvariantError*>(&e)) return "invariant violated";
  return "error";
}

}  // namespace

int run_command(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Semantic-guided photometric depth and pose alignment", "semgeo"};
  app.require_subcommand(1);

  CommonOptions common;
  std::string input, pred, gt, labels, noc;

  auto* synth = app.add_subcommand("synth", "Render a synthetic scene with ground truth");
  add_common(synth, common);
  auto* align = app.add_subcommand("align", "Recover depth and pose from INPUT/frames");
  add_common(align, common);
  align->add_option("input", input, "Directory holding frames/")->required();
  auto* eval_depth = app.add_subcommand("eval-depth", "Depth metrics against ground truth");
  add_common(eval_depth, common);
  eval_depth->add_option("--pred", pred, "Predicted depth PNG")->required();
  eval_depth->add_option("--gt", gt, "Ground-truth depth PNG")->required();
  eval_depth->add_option("--labels", labels, "Label PNG for per-class rows");
  auto* eval_flow = app.add_subcommand("eval-flow", "Flow endpoint error against ground truth");
  add_common(eval_flow, common);
  eval_flow->add_option("--pred", pred, "Predicted flow PNG")->required();
  eval_flow->add_option("--gt", gt, "Ground-truth flow PNG")->required();
  eval_flow->add_option("--noc", noc, "Non-occluded mask PNG (8-bit, nonzero = noc)");
  auto* gradcheck = app.add_subcommand("gradcheck", "Finite-difference check of active losses");
  add_common(gradcheck, common);
  auto* sweep = app.add_subcommand("sweep-lighting", "Depth error under darkened lighting");
  add_common(sweep, common);
  auto* encode = app.add_subcommand("encode", "Dump augmented input channels");
  add_common(encode, common);
  encode->add_option("input", input, "Directory holding frames/")->required();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err);
  }

  try {
    if (synth->parsed()) return cmd_synth(common, out);
    if (align->parsed()) return cmd_align(common, input, out);
    if (eval_depth->parsed()) return cmd_eval_depth(common, pred, gt, labels, out);
    if (eval_flow->parsed()) return cmd_eval_flow(common, pred, gt, noc, out);
    if (gradcheck->parsed()) return cmd_gradcheck(common, out);
    if (sweep->parsed()) return cmd_sweep(common, out);
    if (encode->parsed()) return cmd_encode(common, input, out);
  } catch (const Error& e) {
    err << "semgeo: " << error_kind(e) << ": " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    err << "semgeo: " << e.what() << '\n';
    return 2;
  }
  return 1;
}

}  // namespace semgeo

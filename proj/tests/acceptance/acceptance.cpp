// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include <Eigen/Geometry>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "semgeo/cli.hpp"
#include "semgeo/config.hpp"
#include "semgeo/eval.hpp"
#include "semgeo/io.hpp"
#include "semgeo/synth.hpp"

using namespace semgeo;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

Image random_image(std::mt19937_64& rng, int h, int w, int c) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Image img(h, w, c, 0.0);
  for (double& v : img.data()) v = u(rng);
  return img;
}

DepthMap random_depth(std::mt19937_64& rng, int h, int w, double lo, double hi, double hole_rate) {
  std::uniform_real_distribution<double> u(lo, hi);
  std::bernoulli_distribution hole(hole_rate);
  DepthMap d(h, w, 1.0);
  for (std::size_t i = 0; i < d.depth.size(); ++i) {
    d.depth[i] = u(rng);
    if (hole(rng)) {
      d.depth[i] = 0.0;
      d.valid[i] = 0;
    }
  }
  return d;
}

const LossSelection kAllTerms = LossSelection::parse("photo,smooth,semwarp,mask,edge,transfer");

// 1. Every loss term's analytic gradient against central differences.
Outcome gradient_integrity() {
  const auto t0 = Clock::now();
  double worst = 0.0;
  std::string where;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const GradCheckProblem g = make_gradcheck_problem(seed, kAllTerms);
    for (const TermCheck& c : check_gradients(g.problem, g.variables, {})) {
      if (c.report.max_rel_error >= worst) {
        worst = c.report.max_rel_error;
        where = c.term + " seed " + std::to_string(seed) + " " + c.block;
      }
    }
  }
  const double secs = seconds_since(t0);
  return {worst < 1e-4 && secs < 120.0,
          "max rel err " + fmt("%.3g", worst) + " (" + where + "), " + fmt("%.1f", secs) + " s, 5 seeds x 6 terms + all"};
}

// 2. Identical frames and identity poses are a fixed point of every data term.
Outcome identity_fixed_point() {
  double worst_value = 0.0, worst_pose = 0.0;
  std::vector<AlignmentProblem> problems;
  {
    SceneSpec spec;
    spec.kind = SceneKind::two_plane;
    problems.push_back(make_pair(build_scene(spec), Pose6::identity(), spec.intrinsics).problem);
  }
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 3; ++trial) {
    AlignmentProblem p;
    p.target = random_image(rng, 32, 32, 3);
    p.sources = {p.target, p.target};
    SemanticLabelMap s(32, 32, 3);
    std::uniform_int_distribution<int> lab(0, 2);
    for (auto& v : s.labels.values()) v = lab(rng);
    p.target_semantics = s;
    p.source_semantics = {s, s};
    p.intrinsics = {30, 30, 15.5, 15.5};
    p.config.pyramid_levels = 3;
    problems.push_back(p);
  }
  for (AlignmentProblem& p : problems) {
    p.losses = LossSelection::parse("photo,semwarp,mask,edge");
    const Variables v = initial_variables(p, {0.5});
    const ObjectiveBreakdown b = objective(p, v);
    for (const auto& t : b.terms) worst_value = std::max(worst_value, std::abs(t.value));
    const Gradients g = gradient(p, v);
    for (const Pose6& pg : g.poses) worst_pose = std::max(worst_pose, pg.as_vector().norm());
  }
  return {worst_value <= 1e-12 && worst_pose < 1e-8,
          "max term value " + fmt("%.3g", worst_value) + ", max pose-gradient norm " + fmt("%.3g", worst_pose)};
}

// 3. Plane scene recovery with photometric + smoothness losses.
Outcome plane_recovery() {
  const auto t0 = Clock::now();
  const RunConfig cfg;  // plane scene, tx 0.5 m, lr 2e-4, 2000 iterations, seed 1
  const SceneSpec spec = cfg.scene_spec();
  const Pose6 baseline = cfg.baseline();
  const ScenePair pair = make_pair(build_scene(spec), baseline, spec.intrinsics);
  AlignmentProblem p = pair.problem;
  p.config = cfg.loss_config();
  p.losses = cfg.losses();
  AlignOptions opts;
  opts.iters = static_cast<int>(cfg.integer("iters"));
  opts.adam = cfg.adam();
  const AlignResult r = direct_align(p, initial_variables(p, cfg.init_options()), opts);
  const double secs = seconds_since(t0);
  const Eigen::Vector3d t = r.variables.poses[0].t;
  const double angle = std::acos(std::clamp(t.normalized().dot(baseline.t.normalized()), -1.0, 1.0)) * 180.0 / M_PI;
  const DepthMap& gt = pair.truth.depth;
  const DepthMetrics m = depth_metrics(prepare_prediction(r.variables.depth(0), gt), gt);
  return {angle < 2.0 && m.abs_rel < 0.05 && secs < 300.0,
          "translation angle " + fmt("%.3f", angle) + " deg, AbsRel " + fmt("%.2e", m.abs_rel) + ", " +
              fmt("%.1f", secs) + " s (lr " + fmt("%g", opts.adam.lr) + ", " + std::to_string(opts.iters) + " iters)"};
}

// 4. Semantic warping + boundary weighting improve the foreground on the ambiguous two-plane scene.
Outcome semantic_benefit() {
  std::string detail;
  bool pass = true;
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    SceneSpec spec;
    spec.kind = SceneKind::two_plane;
    spec.texture_seed = seed;
    const ScenePair pair = make_pair(build_scene(spec), Pose6{{0, 0, 0}, {0.5, 0, 0}}, spec.intrinsics);
    const DepthMap& gt = pair.truth.depth;
    Mask fg(gt.height(), gt.width(), 0);
    for (std::size_t i = 0; i < fg.size(); ++i) fg[i] = pair.truth.labels.labels[i] == 1;
    double abs_rel[2];
    int k = 0;
    for (const char* losses : {"photo,smooth", "photo,smooth,semwarp,edge"}) {
      AlignmentProblem p = pair.problem;
      p.losses = LossSelection::parse(losses);
      AlignOptions opts;
      opts.iters = 2000;
      opts.adam.lr = 2e-4;
      const AlignResult r = direct_align(p, initial_variables(p, {0.5, 32, seed}), opts);
      abs_rel[k++] = depth_metrics(prepare_prediction(r.variables.depth(0), gt), gt, &fg).abs_rel;
    }
    const double reduction = 1.0 - abs_rel[1] / abs_rel[0];
    pass = pass && reduction >= 0.10;
    detail += (seed > 1 ? "; " : "") + std::string("seed ") + std::to_string(seed) + " fg AbsRel " +
              fmt("%.4f", abs_rel[0]) + " -> " + fmt("%.4f", abs_rel[1]) + " (" + fmt("%.0f", 100 * reduction) + "%)";
  }
  return {pass, detail};
}

// 5. With alpha = 0 the per-class masked loss over a hard partition equals plain L1.
Outcome masked_decomposition() {
  std::mt19937_64 rng(5);
  LossConfig cfg;
  cfg.alpha = 0.0;
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const int h = 6 + trial % 7, w = 5 + trial % 9, k = 1 + trial % 6;
    const Image t = random_image(rng, h, w, 3);
    const Image r = random_image(rng, h, w, 3);
    Mask valid(h, w, 1);
    std::bernoulli_distribution drop(0.2);
    for (auto& v : valid.values()) v = drop(rng) ? 0 : 1;
    valid[0] = 1;
    SemanticLabelMap s(h, w, k);
    std::uniform_int_distribution<int> lab(0, k - 1);
    for (auto& v : s.labels.values()) v = lab(rng);
    double l1 = 0.0;
    int n = 0;
    for (std::size_t i = 0; i < valid.size(); ++i) {
      if (!valid[i]) continue;
      double e = 0.0;
      for (int c = 0; c < 3; ++c) e += std::abs(t.data()[i * 3 + c] - r.data()[i * 3 + c]);
      l1 += e / 3.0;
      ++n;
    }
    l1 /= n;
    worst = std::max(worst, std::abs(masked_reconstruction_loss(t, r, one_hot_encode(s), valid, cfg) - l1));
  }
  return {worst <= 1e-12, "max |masked - L1| " + fmt("%.3g", worst) + " over 100 instances"};
}

// 6. Depth metrics against a per-pixel brute-force implementation.
Outcome metric_oracle() {
  std::mt19937_64 rng(6);
  double worst = 0.0, worst_scale = 0.0;
  bool monotone = true;
  for (int trial = 0; trial < 100; ++trial) {
    const DepthMap gt = random_depth(rng, 8, 8, 1.0, 40.0, 0.1);
    const DepthMap pred = random_depth(rng, 8, 8, 1.0, 40.0, 0.1);
    const DepthMetrics m = depth_metrics(pred, gt);
    double ar = 0, sr = 0, se = 0, sl = 0;
    double d[3] = {0, 0, 0};
    int n = 0;
    for (std::size_t i = 0; i < gt.depth.size(); ++i) {
      if (!gt.valid[i] || !pred.valid[i]) continue;
      const double p = pred.depth[i], g = gt.depth[i];
      ar += std::abs(p - g) / g;
      sr += (p - g) * (p - g) / g;
      se += (p - g) * (p - g);
      sl += std::pow(std::log(p) - std::log(g), 2);
      const double ratio = std::max(p / g, g / p);
      for (int k = 0; k < 3; ++k) d[k] += ratio < std::pow(1.25, k + 1);
      ++n;
    }
    const double oracle[7] = {ar / n, sr / n, std::sqrt(se / n), std::sqrt(sl / n), d[0] / n, d[1] / n, d[2] / n};
    const double got[7] = {m.abs_rel, m.sq_rel, m.rmse, m.rmse_log, m.d1, m.d2, m.d3};
    for (int k = 0; k < 7; ++k) worst = std::max(worst, std::abs(got[k] - oracle[k]));
    monotone = monotone && m.d1 <= m.d2 && m.d2 <= m.d3;

    const DepthMap gt_near = random_depth(rng, 8, 8, 2.0, 10.0, 0.0);
    const DepthMap base = random_depth(rng, 8, 8, 2.0, 10.0, 0.0);
    const double scale = std::exp(std::uniform_real_distribution<double>(std::log(0.1), std::log(10.0))(rng));
    DepthMap scaled = base;
    for (double& v : scaled.depth.values()) v *= scale;
    const DepthMetrics a = depth_metrics(prepare_prediction(base, gt_near), gt_near);
    const DepthMetrics b = depth_metrics(prepare_prediction(scaled, gt_near), gt_near);
    const double ga[7] = {a.abs_rel, a.sq_rel, a.rmse, a.rmse_log, a.d1, a.d2, a.d3};
    const double gb[7] = {b.abs_rel, b.sq_rel, b.rmse, b.rmse_log, b.d1, b.d2, b.d3};
    for (int k = 0; k < 7; ++k) worst_scale = std::max(worst_scale, std::abs(ga[k] - gb[k]));
  }
  return {worst <= 1e-12 && monotone && worst_scale <= 1e-12,
          "oracle diff " + fmt("%.3g", worst) + ", delta monotone " + (monotone ? "yes" : "no") +
              ", scaling diff " + fmt("%.3g", worst_scale)};
}

// 7. Ground-truth flow reprojects exactly; EPE of a (3, 4) offset is 5.
Outcome flow_consistency() {
  double worst = 0.0;
  const std::vector<Pose6> poses{{{0, 0, 0}, {0.5, 0, 0}},
                                 {{0.01, -0.02, 0.005}, {0.4, 0.05, 0.1}},
                                 {{-0.03, 0.01, 0.02}, {-0.2, 0.1, -0.3}}};
  for (SceneKind kind : {SceneKind::plane, SceneKind::two_plane}) {
    for (const Pose6& pose : poses) {
      SceneSpec spec;
      spec.kind = kind;
      const ScenePair pair = make_pair(build_scene(spec), pose, spec.intrinsics);
      const CameraIntrinsics& k = spec.intrinsics;
      const Eigen::Matrix3d rot = pose.r.norm() > 0 ? Eigen::AngleAxisd(pose.r.norm(), pose.r.normalized()).toRotationMatrix()
                                                    : Eigen::Matrix3d::Identity();
      const FlowField& f = pair.truth.rigid_flow;
      for (int y = 0; y < spec.height; ++y) {
        for (int x = 0; x < spec.width; ++x) {
          if (!f.valid(y, x)) continue;
          const double z = pair.truth.depth.depth(y, x);
          const Eigen::Vector3d p((x - k.cx) / k.fx * z, (y - k.cy) / k.fy * z, z);
          const Eigen::Vector3d q = rot * p + pose.t;
          const double u = k.fx * q.x() / q.z() + k.cx, v = k.fy * q.y() / q.z() + k.cy;
          worst = std::max(worst, std::hypot(x + f.u(y, x) - u, y + f.v(y, x) - v));
        }
      }
    }
  }
  FlowField gt(1, 1);
  FlowField pred(1, 1);
  pred.u(0, 0) = 3.0;
  pred.v(0, 0) = 4.0;
  const double epe = flow_metrics(pred, gt, gt.valid).epe_all;
  return {worst < 1e-9 && epe == 5.0, "max reprojection error " + fmt("%.3g", worst) + " px, EPE " + fmt("%.17g", epe)};
}

// 8. Joint classifier training on the scene where depth decides the class.
Outcome transfer_loop() {
  const auto t0 = Clock::now();
  double worst_acc = 1.0;
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    SceneSpec spec;
    spec.kind = SceneKind::two_plane;
    spec.texture_seed = seed;
    const ScenePair pair = make_pair(build_scene(spec), Pose6{{0, 0, 0}, {0.5, 0, 0}}, spec.intrinsics);
    AlignmentProblem p = pair.problem;
    p.losses = LossSelection::parse("photo,smooth,transfer");
    AlignOptions opts;
    opts.iters = 500;
    opts.adam.lr = 1e-2;
    const AlignResult r = direct_align(p, initial_variables(p, {0.5, 32, seed}), opts);
    const Image logits = classify(pixel_features_log_depth(p.target, r.variables.log_depth[0]), *r.variables.classifier);
    worst_acc = std::min(worst_acc, transfer_accuracy(logits, p.target_semantics, Mask(64, 64, 1)));
  }
  double worst_err = 0.0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const GradCheckProblem g = make_gradcheck_problem(seed, LossSelection::parse("transfer"));
    for (const TermCheck& c : check_gradients(g.problem, g.variables, {})) {
      worst_err = std::max(worst_err, c.report.max_rel_error);
    }
  }
  return {worst_acc >= 0.95 && worst_err < 1e-4,
          "min accuracy " + fmt("%.4f", worst_acc) + " after 500 steps (3 seeds), transfer gradcheck " +
              fmt("%.3g", worst_err) + ", " + fmt("%.1f", seconds_since(t0)) + " s"};
}

int cli(const std::vector<std::string>& args, std::string* out = nullptr) {
  std::ostringstream o, e;
  const int code = run_command(args, o, e);
  if (out) *out = o.str();
  return code;
}

std::map<std::string, std::string> snapshot(const fs::path& dir) {
  std::map<std::string, std::string> files;
  for (const auto& entry : fs::recursive_directory_iterator(dir)) {
    if (entry.is_regular_file()) files[fs::relative(entry.path(), dir).string()] = read_file(entry.path());
  }
  return files;
}

// 9. Lighting sweep through the command line; the s = 1 row must match an undegraded run.
Outcome lighting_harness(const fs::path& work) {
  const fs::path dir = work / "sweep";
  fs::remove_all(dir);
  if (cli({"sweep-lighting", "--out", dir.string()}) != 0) return {false, "sweep-lighting exited nonzero"};
  const std::string csv = read_file(dir / "lighting.csv");

  const RunConfig cfg;
  const SceneSpec spec = cfg.scene_spec();
  const ScenePair pair = make_pair(build_scene(spec), cfg.baseline(), spec.intrinsics);
  AlignmentProblem p = pair.problem;
  p.config = cfg.loss_config();
  p.losses = cfg.losses();
  AlignOptions opts;
  opts.iters = static_cast<int>(cfg.integer("iters"));
  opts.adam = cfg.adam();
  const AlignResult base = direct_align(p, initial_variables(p, cfg.init_options()), opts);
  const DepthMetrics m = depth_metrics(prepare_prediction(base.variables.depth(0), pair.truth.depth), pair.truth.depth);
  const std::string expected_row = format_number(1.0) + "," + depth_csv_row(m);

  std::istringstream in(csv);
  std::string line;
  std::vector<std::string> rows;
  std::getline(in, line);
  while (std::getline(in, line)) rows.push_back(line);
  const bool has_03 = std::any_of(rows.begin(), rows.end(), [](const std::string& r) { return r.rfind("0.3,", 0) == 0; });
  const bool first_matches = !rows.empty() && rows.front() == expected_row;
  const std::vector<double> scales = default_lighting_scales();
  const auto lib_rows = lighting_sweep(p, initial_variables(p, cfg.init_options()), pair.truth.depth, {1.0}, opts);
  const bool bitwise = lib_rows[0].metrics.abs_rel == m.abs_rel && lib_rows[0].metrics.rmse == m.rmse &&
                       lib_rows[0].metrics.sq_rel == m.sq_rel && lib_rows[0].metrics.d1 == m.d1;
  return {rows.size() == scales.size() && has_03 && first_matches && bitwise,
          std::to_string(rows.size()) + " rows, s=0.3 present " + (has_03 ? "yes" : "no") + ", s=1.0 row equals baseline " +
              (first_matches && bitwise ? "yes" : "no") + " (" + rows.front() + ")"};
}

// 10. Every command twice with the same seed; output trees compared byte for byte.
Outcome reproducibility(const fs::path& work) {
  const std::vector<std::string> commands{"synth", "align", "eval-depth", "eval-flow", "gradcheck", "sweep-lighting", "encode"};
  std::vector<std::map<std::string, std::string>> trees[2];
  std::string failures;
  for (int pass = 0; pass < 2; ++pass) {
    const fs::path root = work / ("repro" + std::to_string(pass));
    fs::remove_all(root);
    fs::create_directories(root);
    const std::string cfg = (root / "run.cfg").string();
    write_file_atomic(cfg, "scene=two_plane\nsemantic_classes=2\n");
    const std::string scene = (root / "synth").string();
    const std::vector<std::vector<std::string>> runs{
        {"synth", "--config", cfg, "--seed", "4", "--out", scene},
        {"align", scene, "--config", cfg, "--seed", "4", "--iters", "40", "--losses", "photo,smooth,semwarp,mask,edge,transfer",
         "--out", (root / "align").string()},
        {"eval-depth", "--config", cfg, "--pred", (root / "align" / "depth.png").string(), "--gt", scene + "/gt/depth.png",
         "--labels", scene + "/gt/labels.png", "--out", (root / "eval-depth").string()},
        {"eval-flow", "--config", cfg, "--pred", (root / "align" / "flow.png").string(), "--gt", scene + "/gt/flow.png",
         "--noc", scene + "/gt/noc.png", "--out", (root / "eval-flow").string()},
        {"gradcheck", "--config", cfg, "--seed", "4", "--losses", "photo,smooth,semwarp,mask,edge,transfer", "--out",
         (root / "gradcheck").string()},
        {"sweep-lighting", "--config", cfg, "--seed", "4", "--iters", "20", "--out", (root / "sweep-lighting").string()},
        {"encode", scene, "--config", cfg, "--out", (root / "encode").string()}};
    for (std::size_t i = 0; i < runs.size(); ++i) {
      const int code = cli(runs[i]);
      if (code != 0) failures += commands[i] + " exited " + std::to_string(code) + "; ";
    }
    for (const auto& c : commands) trees[pass].push_back(snapshot(root / c));
  }
  std::size_t files = 0;
  for (std::size_t i = 0; i < commands.size(); ++i) {
    files += trees[0][i].size();
    if (trees[0][i] != trees[1][i]) failures += commands[i] + " output differs; ";
    if (trees[0][i].empty()) failures += commands[i] + " wrote nothing; ";
  }
  return {failures.empty(), failures.empty() ? std::to_string(commands.size()) + " commands, " + std::to_string(files) +
                                                   " files identical across two runs"
                                             : failures};
}

}  // namespace

int main(int argc, char** argv) {
  const fs::path work = argc > 1 ? fs::path(argv[1]) : fs::temp_directory_path() / "semgeo_acceptance";
  fs::create_directories(work);
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"gradient integrity", gradient_integrity},
      {"identity fixed point", identity_fixed_point},
      {"plane recovery", plane_recovery},
      {"semantic-loss benefit", semantic_benefit},
      {"masked-loss decomposition", masked_decomposition},
      {"metric oracle", metric_oracle},
      {"flow consistency", flow_consistency},
      {"transfer loop", transfer_loop},
      {"lighting sweep harness", [&] { return lighting_harness(work); }},
      {"reproducibility", [&] { return reproducibility(work); }},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += !o.pass;
    std::cout << (o.pass ? "PASS" : "FAIL") << " " << (i + 1) << " " << criteria[i].first << ": " << o.detail << std::endl;
  }
  std::cout << (criteria.size() - failed) << "/" << criteria.size() << " criteria passed" << std::endl;
  return failed == 0 ? 0 : 1;
}

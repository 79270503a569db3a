#include "semgeo/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace semgeo {

double median(std::vector<double> values) {
  if (values.empty()) throw DegenerateInputError("median of an empty set");
  const std::size_t mid = values.size() / 2;
  std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(mid), values.end());
  const double upper = values[mid];
  if (values.size() % 2 == 1) return upper;
  const double lower = *std::max_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (lower + upper);
}

namespace {

void require_same_size(const DepthMap& a, const DepthMap& b, const char* what) {
  if (a.height() != b.height() || a.width() != b.width()) {
    throw DimensionError(std::string(what) + ": prediction is " + std::to_string(a.height()) + "x" +
                         std::to_string(a.width()) + " but ground truth is " +
                         std::to_string(b.height()) + "x" + std::to_string(b.width()));
  }
}

}  // namespace

DepthMap prepare_prediction(const DepthMap& pred, const DepthMap& gt) {
  require_same_size(pred, gt, "prepare_prediction");
  std::vector<double> p;
  std::vector<double> g;
  for (std::size_t i = 0; i < gt.depth.size(); ++i) {
    if (gt.valid[i] && pred.valid[i]) {
      p.push_back(pred.depth[i]);
      g.push_back(gt.depth[i]);
    }
  }
  if (g.empty()) throw DegenerateInputError("prepare_prediction: no pixel is valid in both maps");
  const double ratio = median(std::move(g)) / median(std::move(p));
  DepthMap out = pred;
  for (std::size_t i = 0; i < out.depth.size(); ++i) {
    if (!out.valid[i]) continue;
    out.depth[i] = std::clamp(pred.depth[i] * ratio, kMinEvalDepth, kMaxEvalDepth);
  }
  return out;
}

DepthMetrics depth_metrics(const DepthMap& pred, const DepthMap& gt, const Mask* mask) {
  require_same_size(pred, gt, "depth_metrics");
  if (mask && (mask->height() != gt.height() || mask->width() != gt.width())) {
    throw DimensionError("depth_metrics: mask size differs from the depth maps");
  }
  double abs_rel = 0.0, sq_rel = 0.0, sq = 0.0, sq_log = 0.0;
  std::size_t n = 0, a1 = 0, a2 = 0, a3 = 0;
  for (std::size_t i = 0; i < gt.depth.size(); ++i) {
    if (!gt.valid[i] || !pred.valid[i] || (mask && !(*mask)[i])) continue;
    const double d = pred.depth[i];
    const double t = gt.depth[i];
    const double diff = d - t;
    abs_rel += std::abs(diff) / t;
    sq_rel += diff * diff / t;
    sq += diff * diff;
    const double ld = std::log(d) - std::log(t);
    sq_log += ld * ld;
    const double ratio = std::max(d / t, t / d);
    a1 += ratio < 1.25;
    a2 += ratio < 1.25 * 1.25;
    a3 += ratio < 1.25 * 1.25 * 1.25;
    ++n;
  }
  if (n == 0) throw DegenerateInputError("depth_metrics: no evaluable pixel");
  const double inv = 1.0 / static_cast<double>(n);
  DepthMetrics m;
  m.abs_rel = abs_rel * inv;
  m.sq_rel = sq_rel * inv;
  m.rmse = std::sqrt(sq * inv);
  m.rmse_log = std::sqrt(sq_log * inv);
  m.d1 = static_cast<double>(a1) * inv;
  m.d2 = static_cast<double>(a2) * inv;
  m.d3 = static_cast<double>(a3) * inv;
  m.pixels = n;
  return m;
}

FlowMetrics flow_metrics(const FlowField& pred, const FlowField& gt, const Mask& noc) {
  if (pred.height() != gt.height() || pred.width() != gt.width() || noc.height() != gt.height() ||
      noc.width() != gt.width()) {
    throw DimensionError("flow_metrics: prediction, ground truth and noc mask sizes differ");
  }
  double epe_all = 0.0, epe_noc = 0.0;
  std::size_t n_all = 0, n_noc = 0, in_all = 0, in_noc = 0;
  for (std::size_t i = 0; i < gt.u.size(); ++i) {
    if (!gt.valid[i] || !pred.valid[i]) continue;
    const double e = std::hypot(pred.u[i] - gt.u[i], pred.v[i] - gt.v[i]);
    const bool inlier = e < 3.0 || e < 0.05 * std::hypot(gt.u[i], gt.v[i]);
    epe_all += e;
    ++n_all;
    in_all += inlier;
    if (noc[i]) {
      epe_noc += e;
      ++n_noc;
      in_noc += inlier;
    }
  }
  if (n_all == 0 || n_noc == 0) throw DegenerateInputError("flow_metrics: empty evaluation region");
  FlowMetrics m;
  m.epe_all = epe_all / static_cast<double>(n_all);
  m.epe_noc = epe_noc / static_cast<double>(n_noc);
  m.acc_all = static_cast<double>(in_all) / static_cast<double>(n_all);
  m.acc_noc = static_cast<double>(in_noc) / static_cast<double>(n_noc);
  return m;
}

const std::vector<std::string>& cityscapes_class_names() {
  static const std::vector<std::string> names = {
      "road",  "sidewalk", "building", "wall",  "fence", "pole",  "traffic light",
      "traffic sign", "vegetation", "terrain", "sky", "person", "rider", "car",
      "truck", "bus", "train", "motorcycle", "bicycle"};
  return names;
}

const std::vector<std::string>& default_dynamic_classes() {
  static const std::vector<std::string> names = {"person", "rider", "car",        "truck",
                                                 "bus",    "train", "motorcycle", "bicycle"};
  return names;
}

CategoryReport category_report(const DepthMap& pred, const DepthMap& gt, const SemanticLabelMap& sem,
                               const std::vector<std::string>& class_names,
                               const std::vector<std::string>& dynamic_set) {
  require_same_size(pred, gt, "category_report");
  if (sem.height() != gt.height() || sem.width() != gt.width()) {
    throw DimensionError("category_report: label map size differs from the depth maps");
  }
  sem.validate();
  const auto evaluate = [&](const Mask& m) -> std::optional<DepthMetrics> {
    std::size_t n = 0;
    for (std::size_t i = 0; i < m.size(); ++i) n += m[i] && gt.valid[i] && pred.valid[i];
    if (n == 0) return std::nullopt;
    return depth_metrics(pred, gt, &m);
  };

  CategoryReport report;
  Mask dynamic(gt.height(), gt.width(), 0);
  for (int k = 0; k < sem.class_count; ++k) {
    const std::string name = k < static_cast<int>(class_names.size()) ? class_names[k]
                                                                      : "class" + std::to_string(k);
    Mask m(gt.height(), gt.width(), 0);
    for (std::size_t i = 0; i < m.size(); ++i) m[i] = sem.labels[i] == k;
    if (std::find(dynamic_set.begin(), dynamic_set.end(), name) != dynamic_set.end()) {
      for (std::size_t i = 0; i < m.size(); ++i) dynamic[i] |= m[i];
    }
    report.classes.push_back({name, evaluate(m)});
  }
  report.dynamic = {"dynamic", evaluate(dynamic)};
  return report;
}

std::string format_table_row(const DepthMetrics& m) {
  char buf[128];
  std::snprintf(buf, sizeof buf, "%.3f, %.3f, %.3f, %.3f, %.3f, %.3f, %.3f", m.abs_rel, m.sq_rel,
                m.rmse, m.rmse_log, m.d1, m.d2, m.d3);
  return buf;
}

std::string format_number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

std::string depth_csv_header() { return "abs_rel,sq_rel,rmse,rmse_log,d1,d2,d3"; }

std::string depth_csv_row(const DepthMetrics& m) {
  std::string out;
  for (double v : {m.abs_rel, m.sq_rel, m.rmse, m.rmse_log, m.d1, m.d2, m.d3}) {
    if (!out.empty()) out += ',';
    out += format_number(v);
  }
  return out;
}

Mask garg_crop_mask(int height, int width) {
  Mask m(height, width, 0);
  const int y0 = static_cast<int>(0.40810811 * height);
  const int y1 = static_cast<int>(0.99189189 * height);
  const int x0 = static_cast<int>(0.03594771 * width);
  const int x1 = static_cast<int>(0.96405229 * width);
  for (int y = y0; y < y1; ++y) {
    for (int x = x0; x < x1; ++x) m(y, x) = 1;
  }
  return m;
}

std::vector<double> default_lighting_scales() {
  std::vector<double> s;
  for (int i = 10; i >= 1; --i) s.push_back(i / 10.0);
  return s;
}

std::vector<LightingRow> lighting_sweep(const AlignmentProblem& prob, const Variables& init,
                                        const DepthMap& gt, const std::vector<double>& scales,
                                        const AlignOptions& opts) {
  for (std::size_t i = 0; i < scales.size(); ++i) {
    if (!(scales[i] > 0.0 && scales[i] <= 1.0)) throw ArgumentError("lighting scales must lie in (0, 1]");
    if (i > 0 && !(scales[i] < scales[i - 1])) throw ArgumentError("lighting scales must be descending");
  }
  std::vector<LightingRow> rows;
  for (double s : scales) {
    AlignmentProblem p = prob;
    p.target = degrade_lighting(prob.target, s);
    for (auto& src : p.sources) src = degrade_lighting(src, s);
    const AlignResult r = direct_align(p, init, opts);
    const DepthMap pred = r.variables.depth(0);
    rows.push_back({s, depth_metrics(prepare_prediction(pred, gt), gt)});
  }
  return rows;
}

void write_lighting_csv(std::ostream& os, const std::vector<LightingRow>& rows) {
  os << "scale," << depth_csv_header() << '\n';
  for (const auto& r : rows) os << format_number(r.scale) << ',' << depth_csv_row(r.metrics) << '\n';
}

}  // namespace semgeo

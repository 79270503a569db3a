#pragma once

// Depth and flow evaluation: median scaling with clipping, the standard
// depth error/accuracy suite, endpoint error, per-class reports and the
// lighting sweep.

#include <cstdint>
#include <functional>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "semgeo/core.hpp"
#include "semgeo/diffopt.hpp"

namespace semgeo {

inline constexpr double kMinEvalDepth = 0.001;
inline constexpr double kMaxEvalDepth = 80.0;

struct DepthMetrics {
  double abs_rel = 0.0;
  double sq_rel = 0.0;
  double rmse = 0.0;
  double rmse_log = 0.0;
  double d1 = 0.0;
  double d2 = 0.0;
  double d3 = 0.0;
  std::size_t pixels = 0;
};

struct FlowMetrics {
  double epe_noc = 0.0;
  double epe_all = 0.0;
  double acc_noc = 0.0;
  double acc_all = 0.0;
};

double median(std::vector<double> values);

/// Scales pred by median(gt) / median(pred) over pixels valid in both, then
/// clips to [0.001, 80]. Pixels invalid in pred stay invalid.
DepthMap prepare_prediction(const DepthMap& pred, const DepthMap& gt);

/// Metrics over pixels valid in gt and pred and set in `mask` (when given).
/// delta_k counts max(d/d*, d*/d) < 1.25^k, strictly.
DepthMetrics depth_metrics(const DepthMap& pred_prepared, const DepthMap& gt,
                           const Mask* mask = nullptr);

/// Endpoint error and inlier rate (EPE < 3 px or < 5% of |gt|) over pixels
/// valid in both fields, and over that set intersected with `noc`.
FlowMetrics flow_metrics(const FlowField& pred, const FlowField& gt, const Mask& noc);

/// Cityscapes train-id names, 19 classes.
const std::vector<std::string>& cityscapes_class_names();
/// person, rider, car, truck, bus, train, motorcycle, bicycle.
const std::vector<std::string>& default_dynamic_classes();

struct CategoryRow {
  std::string name;
  /// Empty when the class has no evaluable pixels.
  std::optional<DepthMetrics> metrics;
};

struct CategoryReport {
  std::vector<CategoryRow> classes;
  CategoryRow dynamic;
};

/// Per-class depth_metrics on a prepared prediction, plus the aggregate over
/// the union of the classes named in `dynamic_set`.
CategoryReport category_report(const DepthMap& pred_prepared, const DepthMap& gt,
                               const SemanticLabelMap& sem,
                               const std::vector<std::string>& class_names,
                               const std::vector<std::string>& dynamic_set);

/// "0.133, 0.905, 5.181, 0.208, 0.825, 0.947, 0.981"
std::string format_table_row(const DepthMetrics& m);

/// Shortest round-trip-free representation with 6 significant digits.
std::string format_number(double v);

/// Columns: abs_rel,sq_rel,rmse,rmse_log,d1,d2,d3
std::string depth_csv_header();
std::string depth_csv_row(const DepthMetrics& m);

/// Drops everything outside the conventional crop of a KITTI-sized frame
/// (rows 0.40810811 H .. 0.99189189 H, columns 0.03594771 W .. 0.96405229 W).
Mask garg_crop_mask(int height, int width);

struct LightingRow {
  double scale = 1.0;
  DepthMetrics metrics;
};

/// For each scale, degrades every frame of the problem and runs direct_align
/// from `init`, evaluating depth level 0 against `gt`.
std::vector<LightingRow> lighting_sweep(const AlignmentProblem& prob, const Variables& init,
                                        const DepthMap& gt, const std::vector<double>& scales,
                                        const AlignOptions& opts);

/// 1.0, 0.9, ..., 0.1
std::vector<double> default_lighting_scales();

void write_lighting_csv(std::ostream& os, const std::vector<LightingRow>& rows);

}  // namespace semgeo

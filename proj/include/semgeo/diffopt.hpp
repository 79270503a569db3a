#pragma once

// Direct alignment: per-pixel log-depth fields (one per pyramid level) and
// per-source poses are optimized with Adam against a configurable sum of the
// photometric and semantic losses. Gradients are exact reverse-mode
// derivatives written out by hand for every term.

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "semgeo/core.hpp"
#include "semgeo/geometry.hpp"
#include "semgeo/photometric.hpp"
#include "semgeo/semantic_losses.hpp"
#include "semgeo/transfer.hpp"

namespace semgeo {

enum class LossTerm { photo, smooth, semwarp, mask, edge, transfer };

inline constexpr std::array<LossTerm, 6> kAllLossTerms = {
    LossTerm::photo, LossTerm::smooth, LossTerm::semwarp,
    LossTerm::mask,  LossTerm::edge,   LossTerm::transfer};

std::string_view term_name(LossTerm t);

/// Set of active loss terms, written as a comma list such as "photo,smooth".
class LossSelection {
 public:
  LossSelection() = default;
  LossSelection(std::initializer_list<LossTerm> terms);

  /// Throws ArgumentError on unknown names. The empty string selects nothing.
  static LossSelection parse(std::string_view list);

  bool has(LossTerm t) const { return on_[static_cast<int>(t)]; }
  void set(LossTerm t, bool enabled) { on_[static_cast<int>(t)] = enabled; }
  bool empty() const;
  /// Canonical order: photo,smooth,semwarp,mask,edge,transfer.
  std::string to_string() const;
  bool operator==(const LossSelection&) const = default;

 private:
  std::array<bool, 6> on_{};
};

struct AlignmentProblem {
  Image target;
  std::vector<Image> sources;
  SemanticLabelMap target_semantics;
  std::vector<SemanticLabelMap> source_semantics;
  CameraIntrinsics intrinsics;
  LossConfig config;
  LossSelection losses{LossTerm::photo, LossTerm::smooth};

  /// Throws DimensionError / ArgumentError when frames, maps or config disagree.
  void validate() const;
};

/// Optimization variables. Depth at level l is exp(log_depth[l]), positive by
/// construction. Also used to hold gradients (same shape).
struct Variables {
  std::vector<Raster<double>> log_depth;
  std::vector<Pose6> poses;
  std::optional<TransferClassifier> classifier;

  DepthMap depth(int level = 0) const;
  std::size_t size() const;
  std::vector<double> flatten() const;
  void assign(std::span<const double> packed);
  /// Same shape, all zeros.
  Variables zeros_like() const;
};

using Gradients = Variables;

/// Visits every contiguous parameter block in a fixed order:
/// log_depth/l<level>, pose/s<i> (rotation then translation), classifier.
void for_each_block(Variables& v, const std::function<void(const std::string&, std::span<double>)>& fn);
void for_each_block(const Variables& v,
                    const std::function<void(const std::string&, std::span<const double>)>& fn);

struct InitOptions {
  double depth = 1.0;
  int hidden_width = 32;
  std::uint64_t seed = 0;
};

/// Constant depth on every level, identity poses, and a seeded classifier
/// when the transfer term is active.
Variables initial_variables(const AlignmentProblem& prob, const InitOptions& opts);

/// The composite objective with its pyramid data precomputed.
class CompositeObjective {
 public:
  explicit CompositeObjective(AlignmentProblem problem);

  /// Weighted sum of the active terms. Breakdown entries use the names of
  /// LossTerm; each value is summed over levels and sources (smoothness of
  /// level l enters with factor 2^-l) and carries its configured weight.
  /// When `grad` is given it is overwritten with the exact gradient.
  ObjectiveBreakdown evaluate(const Variables& v, Gradients* grad = nullptr) const;

  /// Freezes masks that drop pixels sitting within `margin` of a
  /// non-differentiable point at `v`: bilinear sampling coordinates near an
  /// integer, L1 residuals near zero, depth differences near zero in the
  /// smoothness term and classifier pre-activations near zero. Used by
  /// finite-difference checks.
  void exclude_kinks(const Variables& v, double margin);
  void clear_exclusions();

  const AlignmentProblem& problem() const { return problem_; }
  int levels() const { return static_cast<int>(levels_.size()); }

 private:
  struct Level {
    Image target;
    std::vector<Image> sources;
    OneHotSemantic target_onehot;
    std::vector<OneHotSemantic> source_onehot;
    BoundaryWeights boundary;
    CameraIntrinsics k;
  };

  AlignmentProblem problem_;
  std::vector<Level> levels_;
  // [level][source], 1 = keep. Empty when no exclusions are active.
  std::vector<std::vector<Mask>> sample_keep_;
  std::vector<std::vector<Mask>> residual_keep_;
  // [level], pixels whose smoothness differences are kept.
  std::vector<Mask> smooth_keep_;
  Mask transfer_keep_;
};

ObjectiveBreakdown objective(const AlignmentProblem& prob, const Variables& v);
Gradients gradient(const AlignmentProblem& prob, const Variables& v);

struct AdamConfig {
  double lr = 2e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  AdamConfig config;
  long step = 0;
  Variables m;
  Variables v;

  static AdamState for_variables(const Variables& vars, const AdamConfig& cfg);
};

/// Bias-corrected Adam update applied blockwise. A non-finite gradient
/// throws NumericError naming the block, before anything is modified.
void adam_step(AdamState& state, const Gradients& grads, Variables& vars);

struct AlignOptions {
  int iters = 2000;
  AdamConfig adam;
};

struct TraceRow {
  int iteration = 0;
  ObjectiveBreakdown value;
};

struct AlignResult {
  Variables variables;
  std::vector<TraceRow> trace;
};

/// Full-batch Adam on the composite objective. Trace row i holds the
/// objective at the variables entering step i.
AlignResult direct_align(const AlignmentProblem& prob, Variables init, const AlignOptions& opts);

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::size_t argmax = 0;
  std::size_t coordinates = 0;
};

/// Central differences per coordinate against `analytic`. Relative error is
/// |analytic - numeric| / max(|numeric|, floor).
GradCheckReport finite_diff_check(const std::function<double(std::span<const double>)>& f,
                                  std::span<const double> x, std::span<const double> analytic,
                                  double step, double floor = 1e-6);

struct GradCheckOptions {
  double step = 1e-5;
  double kink_margin = 1e-3;
  double tolerance = 1e-4;
};

struct TermCheck {
  std::string term;
  GradCheckReport report;
  std::string block;
  bool passed = false;
};

/// Checks the analytic gradient of each active term alone, then of the full
/// objective, at `at`.
std::vector<TermCheck> check_gradients(const AlignmentProblem& prob, const Variables& at,
                                       const GradCheckOptions& opts);

/// Name of the block holding flat coordinate `index` ("pose/s0", ...).
std::string block_of(const Variables& v, std::size_t index);

}  // namespace semgeo

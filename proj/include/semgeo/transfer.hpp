#pragma once

// Per-pixel semantic classifier fed with RGB and predicted depth. Its
// cross-entropy against known labels yields a loss whose gradient reaches
// the depth map, so depth is pushed towards maps that explain the semantics.

#include <cstdint>
#include <span>
#include <vector>

#include "semgeo/core.hpp"

namespace semgeo {

/// r, g, b, log d, then the 3x3 log-depth neighbourhood (row-major, edges replicated).
inline constexpr int kTransferFeatureWidth = 13;

/// Per-pixel feature vectors, pixel-major: feature f of pixel i at i * features + f.
struct FeatureField {
  int height = 0;
  int width = 0;
  int features = 0;
  std::vector<double> data;

  std::span<const double> row(std::size_t pixel) const {
    return {data.data() + pixel * features, static_cast<std::size_t>(features)};
  }
};

/// Features from RGB and a depth map. Every pixel must hold a valid positive
/// depth; otherwise throws InvariantError.
FeatureField pixel_features(const Image& rgb, const DepthMap& d);

/// Same features from a log-depth field (the optimizer's native variable).
FeatureField pixel_features_log_depth(const Image& rgb, const Raster<double>& log_depth);

/// Two dense layers, relu in between: logits = W2 relu(W1 f + b1) + b2.
/// Matrices are row-major: w1 is hidden x input, w2 is classes x hidden.
struct TransferClassifier {
  int input_width = kTransferFeatureWidth;
  int hidden_width = 32;
  int classes = 2;
  std::vector<double> w1, b1, w2, b2;

  /// All parameters zero.
  static TransferClassifier zeros(int input_width, int hidden_width, int classes);
  /// He-style normal initialisation from a seeded generator; biases zero.
  static TransferClassifier random(int input_width, int hidden_width, int classes,
                                   std::uint64_t seed);

  std::size_t parameter_count() const;
  /// Parameters packed as w1, b1, w2, b2.
  std::vector<double> flatten() const;
  void assign(std::span<const double> packed);
  /// Throws DimensionError on inconsistent sizes, NumericError on non-finite values.
  void validate() const;
};

/// Per-pixel logits, one channel per class.
Image classify(const FeatureField& f, const TransferClassifier& c);

/// Mean over valid pixels of -log softmax(logits)[label]. `grad_logits`
/// (optional) receives grad_scale * dL/d(logits).
double transfer_loss(const Image& logits, const SemanticLabelMap& s_tgt, const Mask& valid,
                     Image* grad_logits = nullptr, double grad_scale = 1.0);

/// Fraction of valid pixels whose argmax logit equals the label.
double transfer_accuracy(const Image& logits, const SemanticLabelMap& s_tgt, const Mask& valid);

/// Loss through classify and pixel_features, with gradients accumulated
/// (scaled by grad_scale) into the classifier-shaped `grad_params` and the
/// log-depth field `grad_log_depth`. Either sink may be null.
double transfer_objective_log_depth(const Image& rgb, const Raster<double>& log_depth,
                                    const SemanticLabelMap& s_tgt, const Mask& valid,
                                    const TransferClassifier& c,
                                    TransferClassifier* grad_params,
                                    Raster<double>* grad_log_depth, double grad_scale = 1.0);

struct TransferGradients {
  double loss = 0.0;
  TransferClassifier params;
  /// dL/d(depth) per pixel.
  Raster<double> depth;
};

/// Exact gradients of transfer_loss with respect to the classifier parameters and depth.
TransferGradients transfer_gradients(const Image& rgb, const DepthMap& d,
                                     const SemanticLabelMap& s_tgt, const TransferClassifier& c,
                                     const Mask& valid);

}  // namespace semgeo

#pragma once

// Semantic input augmentation: label maps turned into extra image channels.

#include "semgeo/core.hpp"
#include "semgeo/semantic_losses.hpp"

namespace semgeo {

/// One channel, 2 * label / (K - 1) - 1; all zeros when K = 1.
Image dense_encode(const SemanticLabelMap& labels);

/// K channels; channel k is 1 where label == k. Labels outside [0, K) throw InvariantError.
OneHotSemantic one_hot_encode(const SemanticLabelMap& labels);

/// One binary channel marking instance boundaries: 1 where the forward
/// difference of ids along x or y is nonzero. The last column and row use the
/// backward difference instead.
Image instance_edge(const InstanceLabelMap& ids);

/// Which encodings to append to RGB. Dense and one-hot semantic encodings are
/// mutually exclusive.
struct AugmentSpec {
  bool use_dense = false;
  bool use_onehot_semantic = false;
  bool use_onehot_instance_class = false;
  bool use_instance_edge = false;
  int semantic_classes = 19;
  int instance_classes = 81;

  void validate() const;
  /// 3 + widths of the enabled encodings.
  int channel_count() const;
};

/// Channels in fixed order: [RGB | semantic encoding | instance-class
/// encoding | instance edge], enabled parts only.
Image augment_input(const Image& rgb, const SemanticLabelMap& sem,
                    const SemanticLabelMap& inst_class, const InstanceLabelMap& inst,
                    const AugmentSpec& spec);

}  // namespace semgeo

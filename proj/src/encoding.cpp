#include "semgeo/encoding.hpp"

#include <vector>

namespace semgeo {

Image dense_encode(const SemanticLabelMap& labels) {
  labels.validate();
  Image out(labels.height(), labels.width(), 1, 0.0);
  const int k = labels.class_count;
  if (k == 1) return out;
  for (std::size_t i = 0; i < labels.labels.size(); ++i) {
    out.data()[i] = 2.0 * labels.labels[i] / (k - 1) - 1.0;
  }
  return out;
}

OneHotSemantic one_hot_encode(const SemanticLabelMap& labels) {
  labels.validate();
  const int k = labels.class_count;
  Image out(labels.height(), labels.width(), k, 0.0);
  for (std::size_t i = 0; i < labels.labels.size(); ++i) {
    out.data()[i * k + labels.labels[i]] = 1.0;
  }
  return out;
}

Image instance_edge(const InstanceLabelMap& ids) {
  const int h = ids.height();
  const int w = ids.width();
  Image out(h, w, 1, 0.0);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      bool edge = false;
      if (w >= 2) {
        edge |= x + 1 < w ? ids.ids(y, x + 1) != ids.ids(y, x) : ids.ids(y, x) != ids.ids(y, x - 1);
      }
      if (h >= 2) {
        edge |= y + 1 < h ? ids.ids(y + 1, x) != ids.ids(y, x) : ids.ids(y, x) != ids.ids(y - 1, x);
      }
      out.at(y, x) = edge ? 1.0 : 0.0;
    }
  }
  return out;
}

void AugmentSpec::validate() const {
  if (use_dense && use_onehot_semantic) {
    throw ArgumentError("augment spec: dense and one-hot semantic encodings are exclusive");
  }
  if ((use_dense || use_onehot_semantic) && semantic_classes < 1) {
    throw ArgumentError("augment spec: semantic class count must be >= 1");
  }
  if (use_onehot_instance_class && instance_classes < 1) {
    throw ArgumentError("augment spec: instance class count must be >= 1");
  }
}

int AugmentSpec::channel_count() const {
  int c = 3;
  if (use_dense) c += 1;
  if (use_onehot_semantic) c += semantic_classes;
  if (use_onehot_instance_class) c += instance_classes;
  if (use_instance_edge) c += 1;
  return c;
}

Image augment_input(const Image& rgb, const SemanticLabelMap& sem,
                    const SemanticLabelMap& inst_class, const InstanceLabelMap& inst,
                    const AugmentSpec& spec) {
  spec.validate();
  if (rgb.channels() != 3) throw DimensionError("augment_input: expects an RGB image");
  const int h = rgb.height();
  const int w = rgb.width();
  std::vector<Image> parts{rgb};
  if (spec.use_dense || spec.use_onehot_semantic) {
    if (sem.height() != h || sem.width() != w) throw DimensionError("augment_input: semantic map size");
    const SemanticLabelMap s(sem.labels, spec.semantic_classes);
    parts.push_back(spec.use_dense ? dense_encode(s) : one_hot_encode(s));
  }
  if (spec.use_onehot_instance_class) {
    if (inst_class.height() != h || inst_class.width() != w) {
      throw DimensionError("augment_input: instance-class map size");
    }
    parts.push_back(one_hot_encode(SemanticLabelMap(inst_class.labels, spec.instance_classes)));
  }
  if (spec.use_instance_edge) {
    if (inst.height() != h || inst.width() != w) throw DimensionError("augment_input: instance map size");
    parts.push_back(instance_edge(inst));
  }
  return concat_channels(parts);
}

}  // namespace semgeo

#include "semgeo/core.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace semgeo {

std::size_t count_set(const Mask& mask) {
  std::size_t n = 0;
  for (auto v : mask.values()) n += v ? 1 : 0;
  return n;
}

Mask mask_and(const Mask& a, const Mask& b) {
  if (a.height() != b.height() || a.width() != b.width()) {
    throw DimensionError("mask_and: size mismatch");
  }
  Mask out(a.height(), a.width());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = (a[i] && b[i]) ? 1 : 0;
  return out;
}

Image::Image(int height, int width, int channels, double fill)
    : height_(height), width_(width), channels_(channels) {
  if (height < 0 || width < 0 || channels < 0) throw DimensionError("negative image size");
  data_.assign(static_cast<std::size_t>(height) * width * channels, fill);
}

Image::Image(int height, int width, int channels, std::vector<double> data)
    : height_(height), width_(width), channels_(channels), data_(std::move(data)) {
  if (height < 0 || width < 0 || channels < 0) throw DimensionError("negative image size");
  if (data_.size() != static_cast<std::size_t>(height) * width * channels) {
    throw DimensionError("image sample count does not match H * W * C");
  }
}

Image Image::channel(int c) const {
  if (c < 0 || c >= channels_) throw DimensionError("channel index out of range");
  Image out(height_, width_, 1);
  for (std::size_t i = 0; i < pixel_count(); ++i) out.data_[i] = data_[i * channels_ + c];
  return out;
}

DepthMap::DepthMap(int height, int width, double fill)
    : depth(height, width, fill), valid(height, width, std::isfinite(fill) && fill > 0.0 ? 1 : 0) {}

DepthMap DepthMap::from_values(int height, int width, std::vector<double> values) {
  DepthMap out;
  out.depth = Raster<double>(height, width, std::move(values));
  out.valid = Mask(height, width, 0);
  for (std::size_t i = 0; i < out.depth.size(); ++i) {
    const double d = out.depth[i];
    out.valid[i] = (std::isfinite(d) && d > 0.0) ? 1 : 0;
  }
  return out;
}

SemanticLabelMap::SemanticLabelMap(int height, int width, int classes, int fill)
    : labels(height, width, fill), class_count(classes) {}

SemanticLabelMap::SemanticLabelMap(Raster<int> values, int classes)
    : labels(std::move(values)), class_count(classes) {}

void SemanticLabelMap::validate() const {
  if (class_count < 1) throw InvariantError("semantic label map needs at least one class");
  for (int l : labels.values()) {
    if (l < 0 || l >= class_count) {
      throw InvariantError("label " + std::to_string(l) + " outside [0, " +
                           std::to_string(class_count) + ")");
    }
  }
}

InstanceLabelMap::InstanceLabelMap(Raster<int> values) : ids(std::move(values)) {
  for (int id : ids.values()) {
    if (id < 0) throw InvariantError("instance ids must be non-negative");
  }
}

InstanceLabelMap::InstanceLabelMap(int height, int width, int fill) : ids(height, width, fill) {}

FlowField::FlowField(int height, int width)
    : u(height, width, 0.0), v(height, width, 0.0), valid(height, width, 1) {}

Image concat_channels(std::span<const Image> parts) {
  if (parts.empty()) throw DimensionError("concat_channels: empty part list");
  const int h = parts.front().height();
  const int w = parts.front().width();
  int total = 0;
  for (const auto& p : parts) {
    if (!p.same_size(h, w)) throw DimensionError("concat_channels: parts differ in H or W");
    total += p.channels();
  }
  Image out(h, w, total);
  const std::size_t n = out.pixel_count();
  for (std::size_t i = 0; i < n; ++i) {
    int dst = 0;
    for (const auto& p : parts) {
      const int c = p.channels();
      for (int k = 0; k < c; ++k) out.data()[i * total + dst + k] = p.data()[i * c + k];
      dst += c;
    }
  }
  return out;
}

Image downsample_half(const Image& img) {
  if (img.height() < 2 || img.width() < 2) {
    throw DimensionError("downsample_half: input must be at least 2x2");
  }
  const int h = (img.height() + 1) / 2;
  const int w = (img.width() + 1) / 2;
  const int ch = img.channels();
  Image out(h, w, ch);
  for (int y = 0; y < h; ++y) {
    const int y1 = std::min(2 * y + 1, img.height() - 1);
    for (int x = 0; x < w; ++x) {
      const int x1 = std::min(2 * x + 1, img.width() - 1);
      const double n = static_cast<double>((y1 - 2 * y + 1) * (x1 - 2 * x + 1));
      for (int c = 0; c < ch; ++c) {
        // Pairwise: row sums first, so constant blocks average exactly.
        const double top = img.at(2 * y, 2 * x, c) + (x1 > 2 * x ? img.at(2 * y, x1, c) : 0.0);
        const double bottom =
            y1 > 2 * y ? img.at(y1, 2 * x, c) + (x1 > 2 * x ? img.at(y1, x1, c) : 0.0) : 0.0;
        out.at(y, x, c) = (top + bottom) / n;
      }
    }
  }
  return out;
}

Image degrade_lighting(const Image& img, double s) {
  if (!(s > 0.0 && s <= 1.0)) throw ArgumentError("degrade_lighting: scale must lie in (0, 1]");
  if (img.channels() != 3) throw DimensionError("degrade_lighting: expects an RGB image");
  Image out = img;
  for (auto& v : out.data()) v *= s;
  return out;
}

}  // namespace semgeo

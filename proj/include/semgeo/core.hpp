#pragma once

// Raster containers shared by every module.
//
// Layout convention (whole library): row-major, channel-last. Sample (y, x, c)
// of an H x W x C image lives at offset (y * W + x) * C + c. Single-channel
// fields (depth, labels, masks, flow components) use offset y * W + x.

#include <cstddef>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "semgeo/errors.hpp"

namespace semgeo {

/// Single-channel H x W field.
template <typename T>
class Raster {
 public:
  Raster() = default;
  Raster(int height, int width, T fill = T{})
      : height_(height), width_(width),
        values_(static_cast<std::size_t>(checked_area(height, width)), fill) {}
  Raster(int height, int width, std::vector<T> values)
      : height_(height), width_(width), values_(std::move(values)) {
    if (values_.size() != static_cast<std::size_t>(checked_area(height, width))) {
      throw DimensionError("raster value count does not match height * width");
    }
  }

  int height() const { return height_; }
  int width() const { return width_; }
  std::size_t size() const { return values_.size(); }

  T& operator()(int y, int x) { return values_[static_cast<std::size_t>(y) * width_ + x]; }
  const T& operator()(int y, int x) const {
    return values_[static_cast<std::size_t>(y) * width_ + x];
  }
  T& operator[](std::size_t i) { return values_[i]; }
  const T& operator[](std::size_t i) const { return values_[i]; }

  std::vector<T>& values() & { return values_; }
  const std::vector<T>& values() const& { return values_; }
  // By value on temporaries so `for (v : f().values())` does not dangle.
  std::vector<T> values() && { return std::move(values_); }

  bool operator==(const Raster&) const = default;

 private:
  static long checked_area(int height, int width) {
    if (height < 0 || width < 0) throw DimensionError("negative raster size");
    return static_cast<long>(height) * width;
  }

  int height_ = 0;
  int width_ = 0;
  std::vector<T> values_;
};

/// Per-pixel boolean stored as 0/1 bytes.
using Mask = Raster<std::uint8_t>;

std::size_t count_set(const Mask& mask);
Mask mask_and(const Mask& a, const Mask& b);

/// H x W x C real samples, channel-last.
class Image {
 public:
  Image() = default;
  Image(int height, int width, int channels, double fill = 0.0);
  Image(int height, int width, int channels, std::vector<double> data);

  int height() const { return height_; }
  int width() const { return width_; }
  int channels() const { return channels_; }
  std::size_t pixel_count() const { return static_cast<std::size_t>(height_) * width_; }

  std::size_t offset(int y, int x, int c = 0) const {
    return (static_cast<std::size_t>(y) * width_ + x) * channels_ + c;
  }
  double& at(int y, int x, int c = 0) { return data_[offset(y, x, c)]; }
  double at(int y, int x, int c = 0) const { return data_[offset(y, x, c)]; }

  std::span<double> data() & { return data_; }
  std::span<const double> data() const& { return data_; }
  std::vector<double> data() && { return std::move(data_); }

  bool same_size(int height, int width) const { return height_ == height && width_ == width; }
  bool same_shape(const Image& other) const {
    return height_ == other.height_ && width_ == other.width_ && channels_ == other.channels_;
  }

  /// Channel c as a standalone one-channel image.
  Image channel(int c) const;

  bool operator==(const Image&) const = default;

 private:
  int height_ = 0;
  int width_ = 0;
  int channels_ = 0;
  std::vector<double> data_;
};

/// Metric depth with per-pixel validity. Valid depths are strictly positive.
struct DepthMap {
  Raster<double> depth;
  Mask valid;

  DepthMap() = default;
  /// Every pixel holds `fill`; all are valid iff fill is finite and positive.
  DepthMap(int height, int width, double fill);
  /// Pixels holding a finite positive value are valid; everything else is not.
  static DepthMap from_values(int height, int width, std::vector<double> values);

  int height() const { return depth.height(); }
  int width() const { return depth.width(); }
  bool operator==(const DepthMap&) const = default;
};

/// Integer class label per pixel, 0 <= label < class_count.
struct SemanticLabelMap {
  Raster<int> labels;
  int class_count = 0;

  SemanticLabelMap() = default;
  SemanticLabelMap(int height, int width, int classes, int fill = 0);
  SemanticLabelMap(Raster<int> values, int classes);

  int height() const { return labels.height(); }
  int width() const { return labels.width(); }
  /// Throws InvariantError when a label falls outside [0, class_count).
  void validate() const;
  bool operator==(const SemanticLabelMap&) const = default;
};

/// Instance id per pixel; 0 is background.
struct InstanceLabelMap {
  Raster<int> ids;

  InstanceLabelMap() = default;
  explicit InstanceLabelMap(Raster<int> values);
  InstanceLabelMap(int height, int width, int fill = 0);

  int height() const { return ids.height(); }
  int width() const { return ids.width(); }
  bool operator==(const InstanceLabelMap&) const = default;
};

/// Target-to-source pixel displacement: the target pixel p samples the source at p + (u, v).
struct FlowField {
  Raster<double> u;
  Raster<double> v;
  Mask valid;

  FlowField() = default;
  FlowField(int height, int width);

  int height() const { return u.height(); }
  int width() const { return u.width(); }
  bool operator==(const FlowField&) const = default;
};

/// Stack images along the channel axis, keeping the given order.
Image concat_channels(std::span<const Image> parts);

/// 2x2 mean pooling to ceil(H/2) x ceil(W/2); edge blocks are truncated.
Image downsample_half(const Image& img);

/// Multiply every sample by s in (0, 1]; models darker capture conditions.
Image degrade_lighting(const Image& img, double s);

}  // namespace semgeo

#pragma once

// File formats. Rasters use PNG with KITTI conventions:
//   depth   16-bit gray, meters = raw / 256, raw 0 = invalid
//   flow    16-bit RGB, component = (raw - 2^15) / 64, third channel = validity
//   labels  8-bit gray, value = class id
//   ids     16-bit gray, value = instance id
//   rgb     8-bit RGB, value / 255
// Classifier parameters: three little-endian uint32 (input width, hidden
// width, classes) followed by w1, b1, w2, b2 as little-endian float64.
// Every writer goes through a temporary file and a rename.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "semgeo/core.hpp"
#include "semgeo/transfer.hpp"

namespace semgeo {

/// Raw PNG samples, row-major and interleaved.
struct PngData {
  int width = 0;
  int height = 0;
  int channels = 0;
  int bit_depth = 8;
  std::vector<std::uint16_t> samples;
};

/// Reads gray, gray+alpha-free RGB PNGs of bit depth 8 or 16 without any
/// conversion. Palette and alpha images are format errors.
PngData read_png(const std::filesystem::path& path);
void write_png(const std::filesystem::path& path, const PngData& png);

DepthMap read_depth_png(const std::filesystem::path& path);
/// Valid depths are rounded to the nearest 1/256 m and clamped to raw [1, 65535].
void write_depth_png(const std::filesystem::path& path, const DepthMap& d);

FlowField read_flow_png(const std::filesystem::path& path);
/// Components are rounded to 1/64 px and clamped to the representable range.
void write_flow_png(const std::filesystem::path& path, const FlowField& f);

/// `class_count` is attached to the map; values >= class_count are format errors.
SemanticLabelMap read_label_png(const std::filesystem::path& path, int class_count);
void write_label_png(const std::filesystem::path& path, const SemanticLabelMap& labels);

InstanceLabelMap read_instance_png(const std::filesystem::path& path);
void write_instance_png(const std::filesystem::path& path, const InstanceLabelMap& ids);

Image read_rgb_png(const std::filesystem::path& path);
/// Values are clamped to [0, 1] and rounded to 8 bits.
void write_rgb_png(const std::filesystem::path& path, const Image& rgb);

TransferClassifier read_classifier(const std::filesystem::path& path);
void write_classifier(const std::filesystem::path& path, const TransferClassifier& c);

/// Writes `bytes` to a sibling temporary file, then renames it over `path`.
void write_file_atomic(const std::filesystem::path& path, const std::string& bytes);
std::string read_file(const std::filesystem::path& path);

}  // namespace semgeo

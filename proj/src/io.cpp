#include "semgeo/io.hpp"

#include <png.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <csetjmp>
#include <cstring>
#include <fstream>
#include <sstream>

namespace semgeo {

namespace fs = std::filesystem;

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file_atomic(const fs::path& path, const std::string& bytes) {
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write '" + tmp.string() + "'");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error("short write to '" + tmp.string() + "'");
  }
  fs::rename(tmp, path);
}

namespace {

struct ReadCursor {
  const std::string* bytes;
  std::size_t at;
};

void read_from_string(png_structp png, png_bytep out, png_size_t n) {
  auto* cur = static_cast<ReadCursor*>(png_get_io_ptr(png));
  if (cur->at + n > cur->bytes->size()) png_error(png, "truncated PNG data");
  std::memcpy(out, cur->bytes->data() + cur->at, n);
  cur->at += n;
}

void write_to_string(png_structp png, png_bytep in, png_size_t n) {
  static_cast<std::string*>(png_get_io_ptr(png))->append(reinterpret_cast<const char*>(in), n);
}

void flush_nothing(png_structp) {}

[[noreturn]] void throw_png_error(png_structp png, png_const_charp msg) {
  auto* what = static_cast<std::string*>(png_get_error_ptr(png));
  *what = msg;
  png_longjmp(png, 1);
}

void warn_nothing(png_structp, png_const_charp) {}

}  // namespace

PngData read_png(const fs::path& path) {
  const std::string bytes = read_file(path);
  if (bytes.size() < 8 || png_sig_cmp(reinterpret_cast<png_const_bytep>(bytes.data()), 0, 8) != 0) {
    throw FormatError("'" + path.string() + "' is not a PNG file");
  }
  std::string err;
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &err, throw_png_error, warn_nothing);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw Error("libpng initialisation failed");
  }
  PngData out;
  ReadCursor cur{&bytes, 0};
  std::vector<png_bytep> rows;
  std::vector<png_byte> buffer;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw FormatError("'" + path.string() + "': " + err);
  }
  png_set_read_fn(png, &cur, read_from_string);
  png_read_info(png, info);
  const int color = png_get_color_type(png, info);
  out.width = static_cast<int>(png_get_image_width(png, info));
  out.height = static_cast<int>(png_get_image_height(png, info));
  out.bit_depth = png_get_bit_depth(png, info);
  const bool ok_color = color == PNG_COLOR_TYPE_GRAY || color == PNG_COLOR_TYPE_RGB;
  if (!ok_color || (out.bit_depth != 8 && out.bit_depth != 16) ||
      png_get_valid(png, info, PNG_INFO_tRNS)) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw FormatError("'" + path.string() + "': only 8/16-bit gray or RGB PNGs are supported");
  }
  out.channels = color == PNG_COLOR_TYPE_RGB ? 3 : 1;
  if (png_get_interlace_type(png, info) != PNG_INTERLACE_NONE) png_set_interlace_handling(png);
  png_read_update_info(png, info);
  const std::size_t stride = png_get_rowbytes(png, info);
  buffer.resize(stride * static_cast<std::size_t>(out.height));
  rows.resize(static_cast<std::size_t>(out.height));
  for (int y = 0; y < out.height; ++y) rows[y] = buffer.data() + stride * y;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);

  const std::size_t n = static_cast<std::size_t>(out.width) * out.height * out.channels;
  out.samples.resize(n);
  if (out.bit_depth == 8) {
    for (std::size_t i = 0; i < n; ++i) out.samples[i] = buffer[i];
  } else {
    for (std::size_t i = 0; i < n; ++i) {
      out.samples[i] = static_cast<std::uint16_t>((buffer[2 * i] << 8) | buffer[2 * i + 1]);
    }
  }
  return out;
}

void write_png(const fs::path& path, const PngData& img) {
  if (img.width < 1 || img.height < 1) throw DimensionError("write_png: empty image");
  if (img.channels != 1 && img.channels != 3) throw FormatError("write_png: channels must be 1 or 3");
  if (img.bit_depth != 8 && img.bit_depth != 16) throw FormatError("write_png: bit depth must be 8 or 16");
  const std::size_t n = static_cast<std::size_t>(img.width) * img.height * img.channels;
  if (img.samples.size() != n) throw DimensionError("write_png: sample count mismatch");

  const std::size_t bytes_per = img.bit_depth / 8;
  const std::size_t stride = static_cast<std::size_t>(img.width) * img.channels * bytes_per;
  std::vector<png_byte> buffer(stride * img.height);
  for (std::size_t i = 0; i < n; ++i) {
    const std::uint16_t s = img.samples[i];
    if (bytes_per == 1) {
      if (s > 255) throw FormatError("write_png: sample exceeds 8 bits");
      buffer[i] = static_cast<png_byte>(s);
    } else {
      buffer[2 * i] = static_cast<png_byte>(s >> 8);
      buffer[2 * i + 1] = static_cast<png_byte>(s & 0xff);
    }
  }

  std::string err;
  std::string encoded;
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, &err, throw_png_error, warn_nothing);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw Error("libpng initialisation failed");
  }
  std::vector<png_bytep> rows(static_cast<std::size_t>(img.height));
  for (int y = 0; y < img.height; ++y) rows[y] = buffer.data() + stride * y;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw FormatError("encoding '" + path.string() + "': " + err);
  }
  png_set_write_fn(png, &encoded, write_to_string, flush_nothing);
  png_set_compression_level(png, 6);
  png_set_IHDR(png, info, static_cast<png_uint_32>(img.width), static_cast<png_uint_32>(img.height),
               img.bit_depth, img.channels == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  write_file_atomic(path, encoded);
}

namespace {

PngData expect(PngData png, int channels, int bit_depth, const fs::path& path, const char* what) {
  if (png.channels != channels || png.bit_depth != bit_depth) {
    throw FormatError("'" + path.string() + "': " + what + " must be a " + std::to_string(bit_depth) +
                      "-bit " + std::to_string(channels) + "-channel PNG, got " +
                      std::to_string(png.bit_depth) + "-bit " + std::to_string(png.channels) + "-channel");
  }
  return png;
}

std::uint16_t clamp_raw(double v, double lo, double hi) {
  return static_cast<std::uint16_t>(std::clamp(std::round(v), lo, hi));
}

}  // namespace

DepthMap read_depth_png(const fs::path& path) {
  const PngData png = expect(read_png(path), 1, 16, path, "depth");
  DepthMap d(png.height, png.width, 0.0);
  for (std::size_t i = 0; i < png.samples.size(); ++i) {
    d.depth[i] = png.samples[i] / 256.0;
    d.valid[i] = png.samples[i] != 0;
  }
  return d;
}

void write_depth_png(const fs::path& path, const DepthMap& d) {
  PngData png{d.width(), d.height(), 1, 16, std::vector<std::uint16_t>(d.depth.size(), 0)};
  for (std::size_t i = 0; i < d.depth.size(); ++i) {
    if (d.valid[i] && std::isfinite(d.depth[i])) png.samples[i] = clamp_raw(d.depth[i] * 256.0, 1.0, 65535.0);
  }
  write_png(path, png);
}

FlowField read_flow_png(const fs::path& path) {
  const PngData png = expect(read_png(path), 3, 16, path, "flow");
  FlowField f(png.height, png.width);
  for (std::size_t i = 0; i < f.u.size(); ++i) {
    f.u[i] = (png.samples[3 * i] - 32768.0) / 64.0;
    f.v[i] = (png.samples[3 * i + 1] - 32768.0) / 64.0;
    f.valid[i] = png.samples[3 * i + 2] != 0;
  }
  return f;
}

void write_flow_png(const fs::path& path, const FlowField& f) {
  PngData png{f.width(), f.height(), 3, 16, std::vector<std::uint16_t>(f.u.size() * 3, 0)};
  for (std::size_t i = 0; i < f.u.size(); ++i) {
    const bool ok = f.valid[i] && std::isfinite(f.u[i]) && std::isfinite(f.v[i]);
    png.samples[3 * i] = ok ? clamp_raw(f.u[i] * 64.0 + 32768.0, 0.0, 65535.0) : 32768;
    png.samples[3 * i + 1] = ok ? clamp_raw(f.v[i] * 64.0 + 32768.0, 0.0, 65535.0) : 32768;
    png.samples[3 * i + 2] = ok ? 1 : 0;
  }
  write_png(path, png);
}

SemanticLabelMap read_label_png(const fs::path& path, int class_count) {
  const PngData png = expect(read_png(path), 1, 8, path, "label map");
  Raster<int> labels(png.height, png.width, 0);
  for (std::size_t i = 0; i < png.samples.size(); ++i) {
    if (png.samples[i] >= class_count) {
      throw FormatError("'" + path.string() + "': label " + std::to_string(png.samples[i]) +
                        " outside 0.." + std::to_string(class_count - 1));
    }
    labels[i] = png.samples[i];
  }
  return SemanticLabelMap(std::move(labels), class_count);
}

void write_label_png(const fs::path& path, const SemanticLabelMap& labels) {
  PngData png{labels.width(), labels.height(), 1, 8, std::vector<std::uint16_t>(labels.labels.size())};
  for (std::size_t i = 0; i < png.samples.size(); ++i) {
    const int v = labels.labels[i];
    if (v < 0 || v > 255) throw FormatError("write_label_png: label does not fit in 8 bits");
    png.samples[i] = static_cast<std::uint16_t>(v);
  }
  write_png(path, png);
}

InstanceLabelMap read_instance_png(const fs::path& path) {
  const PngData png = expect(read_png(path), 1, 16, path, "instance map");
  Raster<int> ids(png.height, png.width, 0);
  for (std::size_t i = 0; i < png.samples.size(); ++i) ids[i] = png.samples[i];
  return InstanceLabelMap(std::move(ids));
}

void write_instance_png(const fs::path& path, const InstanceLabelMap& ids) {
  PngData png{ids.width(), ids.height(), 1, 16, std::vector<std::uint16_t>(ids.ids.size())};
  for (std::size_t i = 0; i < png.samples.size(); ++i) {
    const int v = ids.ids[i];
    if (v < 0 || v > 65535) throw FormatError("write_instance_png: id does not fit in 16 bits");
    png.samples[i] = static_cast<std::uint16_t>(v);
  }
  write_png(path, png);
}

Image read_rgb_png(const fs::path& path) {
  const PngData png = expect(read_png(path), 3, 8, path, "image");
  Image img(png.height, png.width, 3, 0.0);
  for (std::size_t i = 0; i < png.samples.size(); ++i) img.data()[i] = png.samples[i] / 255.0;
  return img;
}

void write_rgb_png(const fs::path& path, const Image& rgb) {
  if (rgb.channels() != 3) throw FormatError("write_rgb_png: image must have 3 channels");
  PngData png{rgb.width(), rgb.height(), 3, 8, std::vector<std::uint16_t>(rgb.data().size())};
  for (std::size_t i = 0; i < png.samples.size(); ++i) {
    const double v = rgb.data()[i];
    png.samples[i] = std::isfinite(v) ? clamp_raw(v * 255.0, 0.0, 255.0) : 0;
  }
  write_png(path, png);
}

namespace {

static_assert(std::endian::native == std::endian::little, "binary formats assume a little-endian host");

template <typename T>
void put(std::string& out, T v) {
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  out.append(buf, sizeof(T));
}

template <typename T>
T take(const std::string& in, std::size_t& at, const fs::path& path) {
  if (at + sizeof(T) > in.size()) throw FormatError("'" + path.string() + "': truncated parameter file");
  T v;
  std::memcpy(&v, in.data() + at, sizeof(T));
  at += sizeof(T);
  return v;
}

}  // namespace

TransferClassifier read_classifier(const fs::path& path) {
  const std::string bytes = read_file(path);
  std::size_t at = 0;
  const auto in = take<std::uint32_t>(bytes, at, path);
  const auto hidden = take<std::uint32_t>(bytes, at, path);
  const auto classes = take<std::uint32_t>(bytes, at, path);
  if (in == 0 || hidden == 0 || classes == 0 || in > 4096 || hidden > 4096 || classes > 4096) {
    throw FormatError("'" + path.string() + "': implausible classifier widths");
  }
  TransferClassifier c = TransferClassifier::zeros(static_cast<int>(in), static_cast<int>(hidden),
                                                   static_cast<int>(classes));
  std::vector<double> params(c.parameter_count());
  for (double& p : params) p = take<double>(bytes, at, path);
  if (at != bytes.size()) throw FormatError("'" + path.string() + "': trailing bytes after parameters");
  c.assign(params);
  return c;
}

void write_classifier(const fs::path& path, const TransferClassifier& c) {
  c.validate();
  std::string out;
  put<std::uint32_t>(out, static_cast<std::uint32_t>(c.input_width));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(c.hidden_width));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(c.classes));
  for (double p : c.flatten()) put<double>(out, p);
  write_file_atomic(path, out);
}

}  // namespace semgeo

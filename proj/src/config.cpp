#include "semgeo/config.hpp"

#include <charconv>
#include <cmath>
#include <set>

namespace semgeo {

std::string format_real(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general);
  std::string s(buf, r.ptr);
  // Keep reals recognisable as reals in the echo.
  if (s.find_first_of(".eEn") == std::string::npos) s += ".0";
  return s;
}

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

const char* kind_name(ValueKind k) {
  switch (k) {
    case ValueKind::integer: return "an integer";
    case ValueKind::real: return "a real";
    case ValueKind::flag: return "true or false";
    case ValueKind::text: return "a string";
  }
  return "";
}

}  // namespace

RunConfig::RunConfig() {
  const SceneSpec s;
  const LossConfig l;
  const AdamConfig a;
  const GradCheckOptions g;
  const AugmentSpec e;
  const auto add = [this](std::string key, ConfigValue v) {
    const ValueKind k = static_cast<ValueKind>(v.index());
    entries_.push_back({std::move(key), k, std::move(v)});
  };
  add("seed", 1L);
  add("scene", std::string("plane"));
  add("height", static_cast<long>(s.height));
  add("width", static_cast<long>(s.width));
  add("fx", s.intrinsics.fx);
  add("fy", s.intrinsics.fy);
  add("cx", s.intrinsics.cx);
  add("cy", s.intrinsics.cy);
  add("background_depth", s.background_depth);
  add("foreground_depth", s.foreground_depth);
  add("fg_x0", static_cast<long>(s.foreground.x0));
  add("fg_y0", static_cast<long>(s.foreground.y0));
  add("fg_x1", static_cast<long>(s.foreground.x1));
  add("fg_y1", static_cast<long>(s.foreground.y1));
  add("feature_px", s.feature_px);
  add("contrast", s.contrast);
  add("foreground_phase", s.foreground_phase);
  add("object_motion_x", s.object_motion.x());
  add("object_motion_y", s.object_motion.y());
  add("object_motion_z", s.object_motion.z());
  add("baseline_rx", 0.0);
  add("baseline_ry", 0.0);
  add("baseline_rz", 0.0);
  add("baseline_tx", 0.5);
  add("baseline_ty", 0.0);
  add("baseline_tz", 0.0);
  add("classes", 2L);
  add("losses", std::string("photo,smooth"));
  add("alpha", l.alpha);
  add("ssim_c1", l.ssim_c1);
  add("ssim_c2", l.ssim_c2);
  add("pyramid_levels", static_cast<long>(l.pyramid_levels));
  add("smoothness_weight", l.smoothness_weight);
  add("semantic_warp_weight", l.semantic_warp_weight);
  add("masked_weight", l.masked_weight);
  add("boundary_weight", l.boundary_weight);
  add("transfer_weight", l.transfer_weight);
  add("boundary_radius", static_cast<long>(l.boundary_radius));
  add("iters", 2000L);
  add("lr", a.lr);
  add("beta1", a.beta1);
  add("beta2", a.beta2);
  add("eps", a.eps);
  add("init_depth", 0.5);
  add("hidden_width", 32L);
  add("gradcheck_step", g.step);
  add("gradcheck_margin", g.kink_margin);
  add("gradcheck_tolerance", g.tolerance);
  add("garg_crop", false);
  add("encode_dense", e.use_dense);
  add("encode_onehot", true);
  add("encode_instance_class", e.use_onehot_instance_class);
  add("encode_instance_edge", true);
  add("semantic_classes", static_cast<long>(e.semantic_classes));
  add("instance_classes", static_cast<long>(e.instance_classes));
}

RunConfig::Entry* RunConfig::lookup(std::string_view key) {
  for (auto& e : entries_) {
    if (e.key == key) return &e;
  }
  return nullptr;
}

const RunConfig::Entry& RunConfig::find(std::string_view key, ValueKind kind) const {
  for (const auto& e : entries_) {
    if (e.key == key) {
      if (e.kind != kind) throw ArgumentError("config key '" + e.key + "' is not " + kind_name(kind));
      return e;
    }
  }
  throw ArgumentError("unknown config key '" + std::string(key) + "'");
}

ConfigValue RunConfig::parse_value(const Entry& e, std::string_view text) {
  const char* first = text.data();
  const char* last = text.data() + text.size();
  const auto fail = [&]() -> ConfigValue {
    throw ArgumentError("key '" + e.key + "' expects " + kind_name(e.kind) + ", got '" +
                        std::string(text) + "'");
  };
  switch (e.kind) {
    case ValueKind::integer: {
      long v = 0;
      const auto r = std::from_chars(first, last, v);
      if (text.empty() || r.ec != std::errc() || r.ptr != last) return fail();
      return v;
    }
    case ValueKind::real: {
      double v = 0.0;
      const auto r = std::from_chars(first, last, v);
      if (text.empty() || r.ec != std::errc() || r.ptr != last || !std::isfinite(v)) return fail();
      return v;
    }
    case ValueKind::flag:
      if (text == "true") return true;
      if (text == "false") return false;
      return fail();
    case ValueKind::text: {
      std::string v(text);
      if (e.key == "losses") return LossSelection::parse(v).to_string();
      if (e.key == "scene") parse_scene_kind(v);
      return v;
    }
  }
  return fail();
}

void RunConfig::set(std::string_view key, std::string_view value) {
  Entry* e = lookup(key);
  if (!e) throw ArgumentError("unknown config key '" + std::string(key) + "'");
  e->value = parse_value(*e, trim(value));
}

RunConfig RunConfig::parse(std::string_view text) {
  RunConfig cfg;
  std::set<std::string, std::less<>> seen;
  int line_no = 0;
  std::size_t start = 0;
  while (start < text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(start, end - start);
    start = end + 1;
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const std::string where = "line " + std::to_string(line_no) + ": ";
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw ParseError(where + "expected key=value");
    const std::string_view key = trim(line.substr(0, eq));
    Entry* e = cfg.lookup(key);
    if (!e) throw ParseError(where + "unknown key '" + std::string(key) + "'");
    if (!seen.insert(std::string(key)).second) {
      throw ParseError(where + "duplicate key '" + std::string(key) + "'");
    }
    try {
      e->value = parse_value(*e, trim(line.substr(eq + 1)));
    } catch (const ArgumentError& ex) {
      throw ParseError(where + ex.what());
    }
  }
  return cfg;
}

long RunConfig::integer(std::string_view key) const {
  return std::get<long>(find(key, ValueKind::integer).value);
}
double RunConfig::real(std::string_view key) const {
  return std::get<double>(find(key, ValueKind::real).value);
}
bool RunConfig::flag(std::string_view key) const {
  return std::get<bool>(find(key, ValueKind::flag).value);
}
const std::string& RunConfig::text(std::string_view key) const {
  return std::get<std::string>(find(key, ValueKind::text).value);
}

std::string RunConfig::echo() const {
  std::string out;
  for (const auto& e : entries_) {
    out += e.key;
    out += '=';
    switch (e.kind) {
      case ValueKind::integer: out += std::to_string(std::get<long>(e.value)); break;
      case ValueKind::real: out += format_real(std::get<double>(e.value)); break;
      case ValueKind::flag: out += std::get<bool>(e.value) ? "true" : "false"; break;
      case ValueKind::text: out += std::get<std::string>(e.value); break;
    }
    out += '\n';
  }
  return out;
}

namespace {

int as_int(long v, const char* key) {
  if (v < -(1L << 30) || v > (1L << 30)) throw ArgumentError(std::string("config key '") + key + "' out of range");
  return static_cast<int>(v);
}

}  // namespace

SceneSpec RunConfig::scene_spec() const {
  SceneSpec s;
  s.kind = parse_scene_kind(text("scene"));
  s.height = as_int(integer("height"), "height");
  s.width = as_int(integer("width"), "width");
  s.intrinsics = {real("fx"), real("fy"), real("cx"), real("cy")};
  s.background_depth = real("background_depth");
  s.foreground_depth = real("foreground_depth");
  s.foreground = {as_int(integer("fg_x0"), "fg_x0"), as_int(integer("fg_y0"), "fg_y0"),
                  as_int(integer("fg_x1"), "fg_x1"), as_int(integer("fg_y1"), "fg_y1")};
  s.texture_seed = static_cast<std::uint64_t>(integer("seed"));
  s.feature_px = real("feature_px");
  s.contrast = real("contrast");
  s.foreground_phase = real("foreground_phase");
  s.object_motion = {real("object_motion_x"), real("object_motion_y"), real("object_motion_z")};
  return s;
}

Pose6 RunConfig::baseline() const {
  Pose6 p;
  p.r = {real("baseline_rx"), real("baseline_ry"), real("baseline_rz")};
  p.t = {real("baseline_tx"), real("baseline_ty"), real("baseline_tz")};
  return p;
}

LossConfig RunConfig::loss_config() const {
  LossConfig c;
  c.alpha = real("alpha");
  c.ssim_c1 = real("ssim_c1");
  c.ssim_c2 = real("ssim_c2");
  c.pyramid_levels = as_int(integer("pyramid_levels"), "pyramid_levels");
  c.smoothness_weight = real("smoothness_weight");
  c.semantic_warp_weight = real("semantic_warp_weight");
  c.masked_weight = real("masked_weight");
  c.boundary_weight = real("boundary_weight");
  c.transfer_weight = real("transfer_weight");
  c.boundary_radius = as_int(integer("boundary_radius"), "boundary_radius");
  c.validate();
  return c;
}

LossSelection RunConfig::losses() const { return LossSelection::parse(text("losses")); }

AdamConfig RunConfig::adam() const {
  return {real("lr"), real("beta1"), real("beta2"), real("eps")};
}

InitOptions RunConfig::init_options() const {
  InitOptions o;
  o.depth = real("init_depth");
  o.hidden_width = as_int(integer("hidden_width"), "hidden_width");
  o.seed = static_cast<std::uint64_t>(integer("seed"));
  return o;
}

GradCheckOptions RunConfig::gradcheck_options() const {
  return {real("gradcheck_step"), real("gradcheck_margin"), real("gradcheck_tolerance")};
}

AugmentSpec RunConfig::augment_spec() const {
  AugmentSpec a;
  a.use_dense = flag("encode_dense");
  a.use_onehot_semantic = flag("encode_onehot");
  a.use_onehot_instance_class = flag("encode_instance_class");
  a.use_instance_edge = flag("encode_instance_edge");
  a.semantic_classes = as_int(integer("semantic_classes"), "semantic_classes");
  a.instance_classes = as_int(integer("instance_classes"), "instance_classes");
  a.validate();
  return a;
}

}  // namespace semgeo

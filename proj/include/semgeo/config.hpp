#pragma once

// Flat key=value run configuration. Every key has a type and a default; the
// resolved configuration echoes back as one "key=value" line per key in a
// fixed order, byte-stable under parse/echo round trips.

#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "semgeo/diffopt.hpp"
#include "semgeo/encoding.hpp"
#include "semgeo/photometric.hpp"
#include "semgeo/synth.hpp"

namespace semgeo {

enum class ValueKind { integer, real, flag, text };

using ConfigValue = std::variant<long, double, bool, std::string>;

class RunConfig {
 public:
  /// All keys at their defaults.
  RunConfig();

  /// Throws ParseError("line N: ...") on unknown keys, type mismatches,
  /// duplicates and lines without '='. Blank lines and '#' comments are ignored.
  static RunConfig parse(std::string_view text);

  /// Sets one key from its textual form (used for command-line overrides).
  /// Throws ArgumentError on unknown keys or bad values.
  void set(std::string_view key, std::string_view value);

  long integer(std::string_view key) const;
  double real(std::string_view key) const;
  bool flag(std::string_view key) const;
  const std::string& text(std::string_view key) const;

  std::string echo() const;

  SceneSpec scene_spec() const;
  Pose6 baseline() const;
  LossConfig loss_config() const;
  LossSelection losses() const;
  AdamConfig adam() const;
  InitOptions init_options() const;
  GradCheckOptions gradcheck_options() const;
  AugmentSpec augment_spec() const;

  bool operator==(const RunConfig&) const = default;

 private:
  struct Entry {
    std::string key;
    ValueKind kind;
    ConfigValue value;
    bool operator==(const Entry&) const = default;
  };

  const Entry& find(std::string_view key, ValueKind kind) const;
  Entry* lookup(std::string_view key);
  static ConfigValue parse_value(const Entry& e, std::string_view text);

  std::vector<Entry> entries_;
};

std::string format_real(double v);

}  // namespace semgeo

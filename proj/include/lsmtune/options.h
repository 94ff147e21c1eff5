#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "lsmtune/config.h"

namespace lsmtune {

enum class OptionSection { kDBOptions, kCFOptions };
enum class ValueKind { kInteger, kBytes, kBoolean, kEnum };

// Where an entry's default comes from: the engine's documented compaction
// defaults, an engine option whose default is picked here, or a knob that
// exists only in this harness.
enum class Provenance { kEngineDefault, kEngineNamed, kHarness };

std::string_view OptionSectionName(OptionSection section);
std::string_view ValueKindName(ValueKind kind);
std::string_view ProvenanceName(Provenance provenance);

// Integer and byte values share int64 so out-of-range input (negative
// counts, zero multipliers) survives lenient parsing for later repair.
using OptionValue = std::variant<std::int64_t, bool, std::string>;

std::string FormatOptionValue(const OptionValue& value);

struct OptionSchemaEntry {
  std::string_view key;
  OptionSection section = OptionSection::kCFOptions;
  ValueKind kind = ValueKind::kInteger;
  std::optional<OptionValue> default_value;  // nullopt: unset by default
  std::int64_t min_value = 0;                // integer and bytes kinds
  std::int64_t max_value = 0;
  std::vector<std::string_view> variants;    // enum kind, canonical spelling
  Provenance provenance = Provenance::kEngineDefault;
  bool tunable = true;
  bool optional = false;  // may be absent from a config

  std::optional<OptionValue> (*get)(const TuningConfig&) = nullptr;
  void (*set)(TuningConfig&, const std::optional<OptionValue>&) = nullptr;

  bool InRange(const OptionValue& value) const;
  // Nearest legal value for an out-of-range number. Enums and booleans have
  // no nearest value and come back unchanged.
  OptionValue Clamp(const OptionValue& value) const;
  std::string LegalRangeText() const;
};

// Registry in a fixed order: the compaction options first, then the memtable
// and cache auxiliaries.
const std::vector<OptionSchemaEntry>& Schema();

const OptionSchemaEntry* FindOption(std::string_view key);

std::vector<std::string> OptionKeys();
std::vector<std::string> TunableOptionKeys();

enum class OptionsErrorKind { kSyntax, kRange, kType };

std::string_view OptionsErrorKindName(OptionsErrorKind kind);

class OptionsError : public std::runtime_error {
 public:
  OptionsError(OptionsErrorKind kind, int line, const std::string& message);

  OptionsErrorKind kind() const { return kind_; }
  int line() const { return line_; }

 private:
  OptionsErrorKind kind_;
  int line_;
};

struct OptionAssignment {
  std::string key;
  OptionValue value;
  int line = 0;
};

struct UnknownOption {
  std::string key;
  std::string raw_value;
  int line = 0;
};

struct ParseIssue {
  OptionsErrorKind kind;
  int line = 0;
  std::string key;  // empty for syntax issues
  std::string raw;
  std::string message;
};

struct ParsedOptions {
  // One entry per key, in first-appearance order; a repeated key keeps its
  // slot and takes the last value.
  std::vector<OptionAssignment> assignments;
  std::vector<UnknownOption> unknown_keys;
  // Lenient mode only: lines that strict mode would have rejected. Range
  // issues also leave their (out-of-range) value in `assignments`.
  std::vector<ParseIssue> issues;
  std::vector<std::string> warnings;

  const OptionAssignment* Find(std::string_view key) const;
};

enum class ParseMode { kStrict, kLenient };

// INI-style text: [DBOptions] / [CFOptions "default"] sections (any other
// section header is accepted), key=value lines, '#' comments, byte sizes
// with optional K/M/G/T binary suffixes. Strict mode throws OptionsError at
// the first bad line; lenient mode records it in `issues` and keeps going.
ParsedOptions ParseOptions(std::string_view text,
                           ParseMode mode = ParseMode::kStrict);

// Canonical text: DBOptions then CFOptions "default", keys sorted within a
// section, raw integers, unset optionals omitted, trailing newline.
std::string SerializeOptions(const TuningConfig& config);

// Applies every in-range assignment onto `baseline`. Throws OptionsError
// (kRange) for an out-of-range value left by lenient parsing.
TuningConfig ApplyOptions(const ParsedOptions& parsed,
                          const TuningConfig& baseline);

// Strict parse applied onto the defaults.
TuningConfig ConfigFromOptionsText(std::string_view text);

struct ConfigChange {
  std::string key;
  std::string old_value;  // "unset" for an absent optional
  std::string new_value;

  bool operator==(const ConfigChange&) const = default;
};

std::vector<ConfigChange> DiffConfigs(const TuningConfig& a,
                                      const TuningConfig& b);

}  // namespace lsmtune

#include "lsmtune/options.h"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <limits>
#include <map>

namespace lsmtune {

namespace {

constexpr std::int64_t kI64Max = std::numeric_limits<std::int64_t>::max();
constexpr std::int64_t kTiB = static_cast<std::int64_t>(kGiB) * 1024;
constexpr std::int64_t kMiBi = static_cast<std::int64_t>(kMiB);
constexpr std::int64_t kGiBi = static_cast<std::int64_t>(kGiB);

std::int64_t AsInt(const OptionValue& v) { return std::get<std::int64_t>(v); }

OptionValue Int(std::int64_t v) { return OptionValue{v}; }
OptionValue Size(Bytes v) { return OptionValue{static_cast<std::int64_t>(v)}; }

OptionSchemaEntry Entry(std::string_view key, OptionSection section,
                        ValueKind kind, std::optional<OptionValue> def) {
  OptionSchemaEntry e;
  e.key = key;
  e.section = section;
  e.kind = kind;
  e.default_value = std::move(def);
  return e;
}

#define LSMTUNE_INT_FIELD(field)                                              \
  [](const TuningConfig& c) -> std::optional<OptionValue> {                   \
    return Int(c.field);                                                      \
  },                                                                          \
      [](TuningConfig& c, const std::optional<OptionValue>& v) {              \
        c.field = static_cast<int>(AsInt(*v));                                \
      }

#define LSMTUNE_BYTES_FIELD(field)                                            \
  [](const TuningConfig& c) -> std::optional<OptionValue> {                   \
    return Size(c.field);                                                     \
  },                                                                          \
      [](TuningConfig& c, const std::optional<OptionValue>& v) {              \
        c.field = static_cast<Bytes>(AsInt(*v));                              \
      }

std::vector<OptionSchemaEntry> BuildSchema() {
  using S = OptionSection;
  using K = ValueKind;
  using P = Provenance;
  std::vector<OptionSchemaEntry> s;

  auto add_int = [&s](std::string_view key, S section, std::int64_t def,
                      std::int64_t lo, std::int64_t hi, P prov, auto get,
                      auto set) {
    OptionSchemaEntry e = Entry(key, section, K::kInteger, Int(def));
    e.min_value = lo;
    e.max_value = hi;
    e.provenance = prov;
    e.get = get;
    e.set = set;
    s.push_back(std::move(e));
  };
  auto add_bytes = [&s](std::string_view key, S section, std::int64_t def,
                        std::int64_t lo, std::int64_t hi, P prov, auto get,
                        auto set) {
    OptionSchemaEntry e = Entry(key, section, K::kBytes, Int(def));
    e.min_value = lo;
    e.max_value = hi;
    e.provenance = prov;
    e.get = get;
    e.set = set;
    s.push_back(std::move(e));
  };

  add_int("level0_file_num_compaction_trigger", S::kCFOptions, 4, 1, 1024,
          P::kEngineDefault, LSMTUNE_INT_FIELD(level0_file_num_compaction_trigger));
  add_int("level0_slowdown_writes_trigger", S::kCFOptions, 20, 1, 1024,
          P::kEngineDefault, LSMTUNE_INT_FIELD(level0_slowdown_writes_trigger));
  add_int("level0_stop_writes_trigger", S::kCFOptions, 36, 1, 1024,
          P::kEngineDefault, LSMTUNE_INT_FIELD(level0_stop_writes_trigger));
  add_bytes("max_bytes_for_level_base", S::kCFOptions, 256 * kMiBi, kMiBi,
            64 * kGiBi, P::kEngineDefault,
            LSMTUNE_BYTES_FIELD(max_bytes_for_level_base));
  add_int("max_bytes_for_level_multiplier", S::kCFOptions, 10, 1, 100,
          P::kEngineDefault, LSMTUNE_INT_FIELD(max_bytes_for_level_multiplier));
  add_int("max_background_compactions", S::kDBOptions, 1, 1, 64,
          P::kEngineDefault, LSMTUNE_INT_FIELD(max_background_compactions));
  add_int("max_background_jobs", S::kDBOptions, 2, 1, 64, P::kEngineDefault,
          LSMTUNE_INT_FIELD(max_background_jobs));
  add_bytes("target_file_size_base", S::kCFOptions, 64 * kMiBi, kMiBi,
            16 * kGiBi, P::kEngineDefault,
            LSMTUNE_BYTES_FIELD(target_file_size_base));
  add_int("target_file_size_multiplier", S::kCFOptions, 1, 1, 100,
          P::kEngineDefault, LSMTUNE_INT_FIELD(target_file_size_multiplier));

  {
    OptionSchemaEntry e = Entry("max_compaction_bytes", S::kCFOptions, K::kBytes,
                        std::nullopt);
    e.min_value = kMiBi;
    e.max_value = kTiB;
    e.optional = true;
    e.get = [](const TuningConfig& c) -> std::optional<OptionValue> {
      if (!c.max_compaction_bytes) return std::nullopt;
      return Size(*c.max_compaction_bytes);
    };
    e.set = [](TuningConfig& c, const std::optional<OptionValue>& v) {
      if (v) {
        c.max_compaction_bytes = static_cast<Bytes>(AsInt(*v));
      } else {
        c.max_compaction_bytes.reset();
      }
    };
    s.push_back(std::move(e));
  }

  add_bytes("compaction_readahead_size", S::kDBOptions, 0, 0, kGiBi,
            P::kEngineDefault, LSMTUNE_BYTES_FIELD(compaction_readahead_size));

  {
    OptionSchemaEntry e = Entry("compaction_style", S::kCFOptions, K::kEnum,
                                OptionValue{std::string("level")});
    e.variants = {"level", "universal", "fifo"};
    // Only leveled compaction is simulated.
    e.tunable = false;
    e.get = [](const TuningConfig& c) -> std::optional<OptionValue> {
      return OptionValue{std::string(CompactionStyleName(c.compaction_style))};
    };
    e.set = [](TuningConfig& c, const std::optional<OptionValue>& v) {
      const auto& name = std::get<std::string>(*v);
      if (name == "universal") {
        c.compaction_style = CompactionStyle::kUniversal;
      } else if (name == "fifo") {
        c.compaction_style = CompactionStyle::kFifo;
      } else {
        c.compaction_style = CompactionStyle::kLevel;
      }
    };
    s.push_back(std::move(e));
  }
  {
    OptionSchemaEntry e = Entry("compaction_pri", S::kCFOptions, K::kEnum, std::nullopt);
    e.variants = {"kByCompensatedSize", "kOldestLargestSeqFirst",
                  "kMinOverlappingRatio"};
    e.optional = true;
    e.get = [](const TuningConfig& c) -> std::optional<OptionValue> {
      if (!c.compaction_pri) return std::nullopt;
      return OptionValue{std::string(CompactionPriName(*c.compaction_pri))};
    };
    e.set = [](TuningConfig& c, const std::optional<OptionValue>& v) {
      if (!v) {
        c.compaction_pri.reset();
        return;
      }
      const auto& name = std::get<std::string>(*v);
      if (name == "kByCompensatedSize") {
        c.compaction_pri = CompactionPri::kByCompensatedSize;
      } else if (name == "kOldestLargestSeqFirst") {
        c.compaction_pri = CompactionPri::kOldestLargestSeqFirst;
      } else {
        c.compaction_pri = CompactionPri::kMinOverlappingRatio;
      }
    };
    s.push_back(std::move(e));
  }

  add_bytes("write_buffer_size", S::kCFOptions, 64 * kMiBi, kMiBi, 16 * kGiBi,
            P::kEngineNamed, LSMTUNE_BYTES_FIELD(write_buffer_size));
  add_int("max_write_buffer_number", S::kCFOptions, 2, 1, 64, P::kEngineNamed,
          LSMTUNE_INT_FIELD(max_write_buffer_number));
  add_bytes("block_cache_size", S::kCFOptions, 8 * kMiBi, 0, kTiB,
            P::kEngineNamed, LSMTUNE_BYTES_FIELD(block_cache_size));
  {
    OptionSchemaEntry e = Entry("cache_index_and_filter_blocks",
                                S::kCFOptions, K::kBoolean, OptionValue{false});
    e.provenance = P::kEngineNamed;
    e.get = [](const TuningConfig& c) -> std::optional<OptionValue> {
      return OptionValue{c.cache_index_and_filter_blocks};
    };
    e.set = [](TuningConfig& c, const std::optional<OptionValue>& v) {
      c.cache_index_and_filter_blocks = std::get<bool>(*v);
    };
    s.push_back(std::move(e));
  }
  return s;
}

#undef LSMTUNE_INT_FIELD
#undef LSMTUNE_BYTES_FIELD

std::string_view Trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) {
    s.remove_prefix(1);
  }
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) {
    s.remove_suffix(1);
  }
  return s;
}

bool EqualsIgnoreCase(std::string_view a, std::string_view b) {
  return a.size() == b.size() &&
         std::equal(a.begin(), a.end(), b.begin(), [](char x, char y) {
           return std::tolower(static_cast<unsigned char>(x)) ==
                  std::tolower(static_cast<unsigned char>(y));
         });
}

bool IsKeyChar(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '.' ||
         c == '-';
}

// Strips a '#' comment that starts the value or follows whitespace.
std::string_view StripComment(std::string_view value) {
  for (std::size_t i = 0; i < value.size(); ++i) {
    if (value[i] == '#' &&
        (i == 0 || std::isspace(static_cast<unsigned char>(value[i - 1])))) {
      return Trim(value.substr(0, i));
    }
  }
  return value;
}

// Sign and decimal digits; saturates at int64 bounds.
std::optional<std::int64_t> ParseSignedDigits(std::string_view text) {
  bool negative = false;
  if (!text.empty() && (text.front() == '-' || text.front() == '+')) {
    negative = text.front() == '-';
    text.remove_prefix(1);
  }
  if (text.empty()) return std::nullopt;
  std::int64_t value = 0;
  for (char c : text) {
    if (!std::isdigit(static_cast<unsigned char>(c))) return std::nullopt;
    const int d = c - '0';
    if (value > (kI64Max - d) / 10) {
      value = kI64Max;
    } else {
      value = value * 10 + d;
    }
  }
  return negative ? -value : value;
}

std::optional<std::int64_t> ParseByteSize(std::string_view text) {
  std::size_t digits_end = 0;
  while (digits_end < text.size() &&
         (std::isdigit(static_cast<unsigned char>(text[digits_end])) ||
          (digits_end == 0 && (text[0] == '-' || text[0] == '+')))) {
    ++digits_end;
  }
  auto number = ParseSignedDigits(text.substr(0, digits_end));
  if (!number) return std::nullopt;
  std::string_view suffix = Trim(text.substr(digits_end));
  if (suffix.empty()) return number;
  int shift = 0;
  switch (std::toupper(static_cast<unsigned char>(suffix.front()))) {
    case 'K':
      shift = 10;
      break;
    case 'M':
      shift = 20;
      break;
    case 'G':
      shift = 30;
      break;
    case 'T':
      shift = 40;
      break;
    default:
      return std::nullopt;
  }
  suffix.remove_prefix(1);
  if (!suffix.empty() && !EqualsIgnoreCase(suffix, "B") &&
      !EqualsIgnoreCase(suffix, "iB")) {
    return std::nullopt;
  }
  const std::int64_t limit = kI64Max >> shift;
  if (*number > limit) return kI64Max;
  if (*number < -limit) return -kI64Max;
  return *number * (std::int64_t{1} << shift);
}

std::optional<bool> ParseBool(std::string_view text) {
  if (EqualsIgnoreCase(text, "true") || text == "1") return true;
  if (EqualsIgnoreCase(text, "false") || text == "0") return false;
  return std::nullopt;
}

// Canonical variant for an enum spelling, or nullopt when it names none.
std::optional<std::string> ParseEnum(const OptionSchemaEntry& entry,
                                     std::string_view text) {
  for (auto v : entry.variants) {
    if (EqualsIgnoreCase(text, v)) return std::string(v);
  }
  if (entry.key == "compaction_style") {
    static constexpr std::pair<std::string_view, std::string_view> kAliases[] = {
        {"kCompactionStyleLevel", "level"},
        {"kCompactionStyleUniversal", "universal"},
        {"kCompactionStyleFIFO", "fifo"},
        {"leveled", "level"},
    };
    for (auto [alias, canonical] : kAliases) {
      if (EqualsIgnoreCase(text, alias)) return std::string(canonical);
    }
  }
  return std::nullopt;
}

enum class SectionState { kNone, kDB, kCF, kOther };

}  // namespace

std::string_view OptionSectionName(OptionSection section) {
  return section == OptionSection::kDBOptions ? "DBOptions" : "CFOptions";
}

std::string_view ValueKindName(ValueKind kind) {
  switch (kind) {
    case ValueKind::kInteger:
      return "integer";
    case ValueKind::kBytes:
      return "bytes";
    case ValueKind::kBoolean:
      return "boolean";
    case ValueKind::kEnum:
      return "enum";
  }
  return "integer";
}

std::string_view ProvenanceName(Provenance provenance) {
  switch (provenance) {
    case Provenance::kEngineDefault:
      return "engine-default";
    case Provenance::kEngineNamed:
      return "engine-named";
    case Provenance::kHarness:
      return "harness";
  }
  return "harness";
}

std::string FormatOptionValue(const OptionValue& value) {
  if (const auto* i = std::get_if<std::int64_t>(&value)) {
    return std::to_string(*i);
  }
  if (const auto* b = std::get_if<bool>(&value)) return *b ? "true" : "false";
  return std::get<std::string>(value);
}

bool OptionSchemaEntry::InRange(const OptionValue& value) const {
  switch (kind) {
    case ValueKind::kInteger:
    case ValueKind::kBytes: {
      const auto* i = std::get_if<std::int64_t>(&value);
      return i != nullptr && *i >= min_value && *i <= max_value;
    }
    case ValueKind::kBoolean:
      return std::holds_alternative<bool>(value);
    case ValueKind::kEnum: {
      const auto* s = std::get_if<std::string>(&value);
      return s != nullptr &&
             std::find(variants.begin(), variants.end(), *s) != variants.end();
    }
  }
  return false;
}

OptionValue OptionSchemaEntry::Clamp(const OptionValue& value) const {
  if (kind != ValueKind::kInteger && kind != ValueKind::kBytes) return value;
  const auto* i = std::get_if<std::int64_t>(&value);
  if (i == nullptr) return value;
  return OptionValue{std::clamp(*i, min_value, max_value)};
}

std::string OptionSchemaEntry::LegalRangeText() const {
  if (kind == ValueKind::kBoolean) return "{true, false}";
  if (kind == ValueKind::kEnum) {
    std::string out = "{";
    for (std::size_t i = 0; i < variants.size(); ++i) {
      if (i) out += ", ";
      out += variants[i];
    }
    return out + "}";
  }
  return "[" + std::to_string(min_value) + ", " + std::to_string(max_value) + "]";
}

const std::vector<OptionSchemaEntry>& Schema() {
  static const std::vector<OptionSchemaEntry> schema = BuildSchema();
  return schema;
}

const OptionSchemaEntry* FindOption(std::string_view key) {
  for (const auto& e : Schema()) {
    if (e.key == key) return &e;
  }
  return nullptr;
}

std::vector<std::string> OptionKeys() {
  std::vector<std::string> keys;
  for (const auto& e : Schema()) keys.emplace_back(e.key);
  return keys;
}

std::vector<std::string> TunableOptionKeys() {
  std::vector<std::string> keys;
  for (const auto& e : Schema()) {
    if (e.tunable) keys.emplace_back(e.key);
  }
  return keys;
}

std::string_view OptionsErrorKindName(OptionsErrorKind kind) {
  switch (kind) {
    case OptionsErrorKind::kSyntax:
      return "SyntaxError";
    case OptionsErrorKind::kRange:
      return "RangeError";
    case OptionsErrorKind::kType:
      return "TypeError";
  }
  return "SyntaxError";
}

OptionsError::OptionsError(OptionsErrorKind kind, int line,
                           const std::string& message)
    : std::runtime_error(std::string(OptionsErrorKindName(kind)) + " at line " +
                         std::to_string(line) + ": " + message),
      kind_(kind),
      line_(line) {}

const OptionAssignment* ParsedOptions::Find(std::string_view key) const {
  for (const auto& a : assignments) {
    if (a.key == key) return &a;
  }
  return nullptr;
}

ParsedOptions ParseOptions(std::string_view text, ParseMode mode) {
  ParsedOptions out;
  SectionState section = SectionState::kNone;

  auto problem = [&](OptionsErrorKind kind, int line, std::string key,
                     std::string raw, std::string message) {
    if (mode == ParseMode::kStrict) throw OptionsError(kind, line, message);
    out.issues.push_back(
        {kind, line, std::move(key), std::move(raw), std::move(message)});
  };

  int line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t nl = text.find('\n', pos);
    const std::size_t end = nl == std::string_view::npos ? text.size() : nl;
    std::string_view line = Trim(text.substr(pos, end - pos));
    pos = end + 1;
    ++line_no;
    if (nl == std::string_view::npos && line.empty()) break;

    if (line.empty() || line.front() == '#') continue;

    if (line.front() == '[') {
      if (line.back() != ']') {
        problem(OptionsErrorKind::kSyntax, line_no, "", std::string(line),
                "unterminated section header '" + std::string(line) + "'");
        continue;
      }
      std::string_view name = Trim(line.substr(1, line.size() - 2));
      const std::string_view head = name.substr(0, name.find_first_of(" \t\""));
      if (head == "DBOptions") {
        section = SectionState::kDB;
      } else if (head == "CFOptions") {
        section = SectionState::kCF;
      } else {
        section = SectionState::kOther;
      }
      continue;
    }

    const std::size_t eq = line.find('=');
    if (eq == std::string_view::npos) {
      problem(OptionsErrorKind::kSyntax, line_no, "", std::string(line),
              "expected key=value, got '" + std::string(line) + "'");
      continue;
    }
    const std::string_view key = Trim(line.substr(0, eq));
    const std::string_view value = StripComment(Trim(line.substr(eq + 1)));
    if (key.empty() || !std::all_of(key.begin(), key.end(), IsKeyChar)) {
      problem(OptionsErrorKind::kSyntax, line_no, "", std::string(line),
              "malformed key '" + std::string(key) + "'");
      continue;
    }

    const OptionSchemaEntry* entry = FindOption(key);
    if (entry == nullptr) {
      out.unknown_keys.push_back(
          {std::string(key), std::string(value), line_no});
      continue;
    }
    if ((section == SectionState::kDB &&
         entry->section != OptionSection::kDBOptions) ||
        (section == SectionState::kCF &&
         entry->section != OptionSection::kCFOptions)) {
      out.warnings.push_back("line " + std::to_string(line_no) + ": " +
                             std::string(key) + " belongs in [" +
                             std::string(OptionSectionName(entry->section)) +
                             "]");
    }

    std::optional<OptionValue> parsed;
    switch (entry->kind) {
      case ValueKind::kInteger: {
        // The engine writes multipliers as doubles ("10.000000").
        std::string_view whole = value;
        const std::size_t dot = value.find('.');
        if (dot != std::string_view::npos &&
            value.find_first_not_of('0', dot + 1) == std::string_view::npos) {
          whole = value.substr(0, dot);
        }
        if (auto v = ParseSignedDigits(whole)) parsed = OptionValue{*v};
        break;
      }
      case ValueKind::kBytes:
        if (auto v = ParseByteSize(value)) parsed = OptionValue{*v};
        break;
      case ValueKind::kBoolean:
        if (auto v = ParseBool(value)) parsed = OptionValue{*v};
        break;
      case ValueKind::kEnum:
        if (auto v = ParseEnum(*entry, value)) {
          parsed = OptionValue{*v};
        } else if (!value.empty()) {
          problem(OptionsErrorKind::kRange, line_no, std::string(key),
                  std::string(value),
                  std::string(key) + "=" + std::string(value) +
                      " is not one of " + entry->LegalRangeText());
          continue;
        }
        break;
    }
    if (!parsed) {
      problem(OptionsErrorKind::kType, line_no, std::string(key),
              std::string(value),
              std::string(key) + " expects " +
                  std::string(ValueKindName(entry->kind)) + ", got '" +
                  std::string(value) + "'");
      continue;
    }
    if (!entry->InRange(*parsed)) {
      problem(OptionsErrorKind::kRange, line_no, std::string(key),
              std::string(value),
              std::string(key) + "=" + FormatOptionValue(*parsed) +
                  " outside " + entry->LegalRangeText());
    }

    auto it = std::find_if(out.assignments.begin(), out.assignments.end(),
                           [&](const OptionAssignment& a) { return a.key == key; });
    if (it != out.assignments.end()) {
      out.warnings.push_back("line " + std::to_string(line_no) +
                             ": duplicate " + std::string(key) +
                             " overrides line " + std::to_string(it->line));
      it->value = *parsed;
      it->line = line_no;
    } else {
      out.assignments.push_back({std::string(key), *parsed, line_no});
    }
  }
  return out;
}

std::string SerializeOptions(const TuningConfig& config) {
  std::string out;
  for (auto section : {OptionSection::kDBOptions, OptionSection::kCFOptions}) {
    std::map<std::string_view, std::string> lines;
    for (const auto& e : Schema()) {
      if (e.section != section) continue;
      if (auto v = e.get(config)) lines[e.key] = FormatOptionValue(*v);
    }
    if (!out.empty()) out += '\n';
    out += section == OptionSection::kDBOptions ? "[DBOptions]\n"
                                                : "[CFOptions \"default\"]\n";
    for (const auto& [key, value] : lines) {
      out += "  ";
      out += key;
      out += '=';
      out += value;
      out += '\n';
    }
  }
  return out;
}

TuningConfig ApplyOptions(const ParsedOptions& parsed,
                          const TuningConfig& baseline) {
  TuningConfig config = baseline;
  for (const auto& a : parsed.assignments) {
    const OptionSchemaEntry* entry = FindOption(a.key);
    if (!entry->InRange(a.value)) {
      throw OptionsError(OptionsErrorKind::kRange, a.line,
                         a.key + "=" + FormatOptionValue(a.value) +
                             " outside " + entry->LegalRangeText());
    }
    entry->set(config, a.value);
  }
  return config;
}

TuningConfig ConfigFromOptionsText(std::string_view text) {
  return ApplyOptions(ParseOptions(text, ParseMode::kStrict), DefaultConfig());
}

std::vector<ConfigChange> DiffConfigs(const TuningConfig& a,
                                      const TuningConfig& b) {
  std::vector<ConfigChange> changes;
  for (const auto& e : Schema()) {
    const auto va = e.get(a);
    const auto vb = e.get(b);
    if (va == vb) continue;
    changes.push_back({std::string(e.key),
                       va ? FormatOptionValue(*va) : "unset",
                       vb ? FormatOptionValue(*vb) : "unset"});
  }
  return changes;
}

}  // namespace lsmtune

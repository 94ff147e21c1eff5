#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "lsmtune/config.h"
#include "lsmtune/options.h"

namespace lsmtune {

enum class FailureClass {
  kFormatError,
  kTruncated,
  kRepetition,
  kUnknownKeys,
  kRangeViolation,
};

std::string_view FailureClassName(FailureClass failure);
std::optional<FailureClass> ParseFailureClass(std::string_view name);

enum class Outcome { kAccepted, kRejected };

std::string_view OutcomeName(Outcome outcome);

enum class RepairAction { kClamped, kDropped, kRestoredFromBaseline };

std::string_view RepairActionName(RepairAction action);

struct Repair {
  std::string key;
  RepairAction action;
  std::string detail;

  bool operator==(const Repair&) const = default;
};

enum class ConsistencyWarning {
  kCacheThrashRisk,
  kTriggerOrderRisk,
  kConcurrencyRisk,
};

std::string_view ConsistencyWarningName(ConsistencyWarning warning);

struct GuardVerdict {
  Outcome outcome = Outcome::kRejected;
  // Always set when rejected. An accepted verdict carries the class of the
  // repairs it needed (UnknownKeys or RangeViolation), if any.
  std::optional<FailureClass> failure;
  std::vector<Repair> repairs;
  std::vector<ConsistencyWarning> warnings;
  std::optional<TuningConfig> config;  // present iff accepted
  std::vector<std::string> notes;

  bool accepted() const { return outcome == Outcome::kAccepted; }
  // "<Accepted|Rejected> <failure|->"
  std::string Summary() const;
};

// Keys a proposal may change. Kept sorted.
using Subspace = std::vector<std::string>;

// max_background_compactions, max_background_jobs and
// level0_file_num_compaction_trigger.
Subspace SmallModelSubspace();
// Every tunable schema key.
Subspace FullSubspace();
// "small-model" or "full"; nullopt for anything else.
std::optional<Subspace> SubspacePreset(std::string_view name);
// Keys separated by newlines, commas or whitespace; '#' starts a comment.
// Throws std::invalid_argument naming the first key not in the schema.
Subspace ParseSubspace(std::string_view text);
bool InSubspace(const Subspace& subspace, std::string_view key);
// Subspace keys a complete proposal must mention (optional keys excluded).
std::vector<std::string> RequiredKeys(const Subspace& subspace);

class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// The configuration part of a reasoning-plus-config response. The last
// complete fenced block wins (config-looking blocks preferred over others);
// failing that, the body of an unterminated final fence; failing that,
// everything from the first [DBOptions]/[CFOptions] header on.
std::string ExtractConfigBlock(std::string_view response);

// The final non-blank line is a cut-off assignment (a bare identifier, a
// dangling '=', or an unclosed section header), or some required key never
// appears as `key=`.
bool DetectTruncation(std::string_view block,
                      const std::vector<std::string>& required_keys);

// Trailing whitespace is ignored. True iff for some period p <= max_period
// the longest p-periodic suffix spans at least min_repeats full periods and
// at least 30% of the text.
bool DetectRepetition(std::string_view text, int max_period, int min_repeats);

std::vector<ConsistencyWarning> ConsistencyCheck(const TuningConfig& candidate,
                                                 const TuningConfig& baseline);

GuardVerdict Sanitize(const ParsedOptions& parsed, const TuningConfig& baseline,
                      const Subspace& subspace);

struct GuardOptions {
  int max_period = 64;
  int min_repeats = 5;
};

// Repetition, extraction, truncation, lenient parse, then Sanitize.
// Test fixtures and validation inputs may start with "# expect: <class>"
// ("none" for a clean reply). The label line is stripped from `body`.
struct LabeledResponse {
  bool labeled = false;
  std::optional<FailureClass> expect;
  std::string body;
};

// Throws std::invalid_argument for a label naming no failure class.
LabeledResponse SplitExpectLabel(std::string_view text);

GuardVerdict GuardResponse(std::string_view response,
                           const TuningConfig& baseline,
                           const Subspace& subspace,
                           const GuardOptions& options = {});

inline constexpr double kInitialTemperature = 0.3;
inline constexpr double kMaxTemperature = 0.7;
inline constexpr double kRigidityStep = 0.2;
inline constexpr double kFormatFailureStep = 0.15;

struct TemperatureState {
  double current = kInitialTemperature;
  int rigidity_events = 0;
  int format_failures = 0;

  bool operator==(const TemperatureState&) const = default;
};

enum class TemperatureEvent { kRigidity, kFormatFailure, kSuccess };

std::string_view TemperatureEventName(TemperatureEvent event);

// Rigidity raises the temperature by 0.2 up to 0.7, a format failure lowers
// it by 0.15 down to 0, success leaves it alone.
TemperatureState NextTemperature(TemperatureState state, TemperatureEvent event);

}  // namespace lsmtune

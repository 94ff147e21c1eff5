#include "lsmtune/guard.h"

#include <algorithm>
#include <cctype>
#include <cmath>

namespace lsmtune {

namespace {

std::string_view Trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) {
    s.remove_prefix(1);
  }
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) {
    s.remove_suffix(1);
  }
  return s;
}

std::vector<std::string_view> SplitLines(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    lines.push_back(text.substr(pos, nl - pos));
    pos = nl + 1;
  }
  return lines;
}

std::string JoinLines(const std::vector<std::string_view>& lines,
                      std::size_t begin, std::size_t end) {
  std::string out;
  for (std::size_t i = begin; i < end; ++i) {
    out += lines[i];
    out += '\n';
  }
  return out;
}

bool IsFence(std::string_view line) {
  line = Trim(line);
  return line.substr(0, 3) == "```" || line.substr(0, 3) == "~~~";
}

bool IsSectionHeader(std::string_view line) {
  line = Trim(line);
  return line.substr(0, 10) == "[DBOptions" || line.substr(0, 10) == "[CFOptions";
}

bool IsKeyChar(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '.' ||
         c == '-';
}

bool LooksLikeConfig(const std::vector<std::string_view>& lines,
                     std::size_t begin, std::size_t end) {
  for (std::size_t i = begin; i < end; ++i) {
    const auto line = Trim(lines[i]);
    if (line.empty() || line.front() == '#') continue;
    if (line.front() == '[' || line.find('=') != std::string_view::npos) {
      return true;
    }
  }
  return false;
}

bool MentionsKey(const std::vector<std::string_view>& lines,
                 std::string_view key) {
  for (auto raw : lines) {
    auto line = Trim(raw);
    if (line.substr(0, key.size()) != key) continue;
    line.remove_prefix(key.size());
    line = Trim(line);
    if (!line.empty() && line.front() == '=') return true;
  }
  return false;
}

double RoundTemperature(double t) { return std::round(t * 1e6) / 1e6; }

}  // namespace

std::string_view FailureClassName(FailureClass failure) {
  switch (failure) {
    case FailureClass::kFormatError:
      return "FormatError";
    case FailureClass::kTruncated:
      return "Truncated";
    case FailureClass::kRepetition:
      return "Repetition";
    case FailureClass::kUnknownKeys:
      return "UnknownKeys";
    case FailureClass::kRangeViolation:
      return "RangeViolation";
  }
  return "FormatError";
}

std::optional<FailureClass> ParseFailureClass(std::string_view name) {
  for (auto f : {FailureClass::kFormatError, FailureClass::kTruncated,
                 FailureClass::kRepetition, FailureClass::kUnknownKeys,
                 FailureClass::kRangeViolation}) {
    if (FailureClassName(f) == name) return f;
  }
  return std::nullopt;
}

std::string_view OutcomeName(Outcome outcome) {
  return outcome == Outcome::kAccepted ? "Accepted" : "Rejected";
}

std::string_view RepairActionName(RepairAction action) {
  switch (action) {
    case RepairAction::kClamped:
      return "clamped";
    case RepairAction::kDropped:
      return "dropped";
    case RepairAction::kRestoredFromBaseline:
      return "restored_from_baseline";
  }
  return "dropped";
}

std::string_view ConsistencyWarningName(ConsistencyWarning warning) {
  switch (warning) {
    case ConsistencyWarning::kCacheThrashRisk:
      return "CacheThrashRisk";
    case ConsistencyWarning::kTriggerOrderRisk:
      return "TriggerOrderRisk";
    case ConsistencyWarning::kConcurrencyRisk:
      return "ConcurrencyRisk";
  }
  return "CacheThrashRisk";
}

std::string GuardVerdict::Summary() const {
  std::string out(OutcomeName(outcome));
  out += ' ';
  out += failure ? std::string(FailureClassName(*failure)) : "-";
  return out;
}

Subspace SmallModelSubspace() {
  return {"level0_file_num_compaction_trigger", "max_background_compactions",
          "max_background_jobs"};
}

Subspace FullSubspace() {
  Subspace keys = TunableOptionKeys();
  std::sort(keys.begin(), keys.end());
  return keys;
}

std::optional<Subspace> SubspacePreset(std::string_view name) {
  if (name == "small-model") return SmallModelSubspace();
  if (name == "full") return FullSubspace();
  return std::nullopt;
}

Subspace ParseSubspace(std::string_view text) {
  Subspace keys;
  for (auto raw : SplitLines(text)) {
    auto line = raw.substr(0, raw.find('#'));
    std::size_t pos = 0;
    while (pos < line.size()) {
      while (pos < line.size() &&
             (line[pos] == ',' || std::isspace(static_cast<unsigned char>(line[pos])))) {
        ++pos;
      }
      std::size_t end = pos;
      while (end < line.size() && line[end] != ',' &&
             !std::isspace(static_cast<unsigned char>(line[end]))) {
        ++end;
      }
      if (end > pos) {
        std::string key(line.substr(pos, end - pos));
        if (FindOption(key) == nullptr) {
          throw std::invalid_argument("unknown option in subspace: " + key);
        }
        keys.push_back(std::move(key));
      }
      pos = end;
    }
  }
  std::sort(keys.begin(), keys.end());
  keys.erase(std::unique(keys.begin(), keys.end()), keys.end());
  return keys;
}

bool InSubspace(const Subspace& subspace, std::string_view key) {
  return std::find(subspace.begin(), subspace.end(), key) != subspace.end();
}

std::vector<std::string> RequiredKeys(const Subspace& subspace) {
  std::vector<std::string> keys;
  for (const auto& key : subspace) {
    const auto* entry = FindOption(key);
    if (entry != nullptr && !entry->optional) keys.push_back(key);
  }
  return keys;
}

std::string ExtractConfigBlock(std::string_view response) {
  const auto lines = SplitLines(response);

  std::optional<std::pair<std::size_t, std::size_t>> last_complete;
  constexpr std::size_t kClosed = std::string_view::npos;
  std::size_t open_at = kClosed;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (!IsFence(lines[i])) continue;
    if (open_at != kClosed) {
      if (LooksLikeConfig(lines, open_at, i)) {
        last_complete = std::make_pair(open_at, i);
      }
      open_at = kClosed;
    } else {
      open_at = i + 1;
    }
  }
  if (last_complete) {
    return JoinLines(lines, last_complete->first, last_complete->second);
  }
  if (open_at != kClosed) {
    std::string body = JoinLines(lines, open_at, lines.size());
    if (!Trim(body).empty()) return body;
  }
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (IsSectionHeader(lines[i])) return JoinLines(lines, i, lines.size());
  }
  throw FormatError("no configuration block found in response");
}

bool DetectTruncation(std::string_view block,
                      const std::vector<std::string>& required_keys) {
  const auto lines = SplitLines(block);
  std::string_view last;
  for (auto it = lines.rbegin(); it != lines.rend(); ++it) {
    last = Trim(*it);
    if (!last.empty()) break;
  }
  if (last.empty()) return true;
  if (last.front() == '[') {
    if (last.back() != ']') return true;
  } else if (last.front() != '#') {
    const std::size_t eq = last.find('=');
    if (eq != std::string_view::npos) {
      if (Trim(last.substr(eq + 1)).empty()) return true;
    } else if (std::all_of(last.begin(), last.end(), IsKeyChar)) {
      return true;
    }
  }
  for (const auto& key : required_keys) {
    if (!MentionsKey(lines, key)) return true;
  }
  return false;
}

bool DetectRepetition(std::string_view text, int max_period, int min_repeats) {
  while (!text.empty() && std::isspace(static_cast<unsigned char>(text.back()))) {
    text.remove_suffix(1);
  }
  const std::size_t n = text.size();
  if (n == 0 || max_period < 1) return false;
  const std::size_t max_p = std::min<std::size_t>(max_period, n);
  for (std::size_t p = 1; p <= max_p; ++p) {
    // Longest suffix with text[i] == text[i + p] throughout.
    std::size_t length = p;
    while (length < n && text[n - length - 1] == text[n - length - 1 + p]) {
      ++length;
    }
    if (length / p >= static_cast<std::size_t>(std::max(min_repeats, 1)) &&
        10 * length >= 3 * n) {
      return true;
    }
  }
  return false;
}

std::vector<ConsistencyWarning> ConsistencyCheck(const TuningConfig& candidate,
                                                 const TuningConfig& baseline) {
  std::vector<ConsistencyWarning> out;
  if (!baseline.cache_index_and_filter_blocks &&
      candidate.cache_index_and_filter_blocks &&
      candidate.block_cache_size <= baseline.block_cache_size) {
    out.push_back(ConsistencyWarning::kCacheThrashRisk);
  }
  const bool triggers_moved =
      candidate.level0_file_num_compaction_trigger !=
          baseline.level0_file_num_compaction_trigger ||
      candidate.level0_slowdown_writes_trigger !=
          baseline.level0_slowdown_writes_trigger ||
      candidate.level0_stop_writes_trigger != baseline.level0_stop_writes_trigger;
  const int trigger = candidate.level0_file_num_compaction_trigger;
  if (triggers_moved &&
      (candidate.level0_slowdown_writes_trigger - trigger <= 2 ||
       candidate.level0_stop_writes_trigger - trigger <= 2)) {
    out.push_back(ConsistencyWarning::kTriggerOrderRisk);
  }
  if (candidate.max_background_compactions > candidate.max_background_jobs) {
    out.push_back(ConsistencyWarning::kConcurrencyRisk);
  }
  return out;
}

GuardVerdict Sanitize(const ParsedOptions& parsed, const TuningConfig& baseline,
                      const Subspace& subspace) {
  GuardVerdict verdict;
  int unknown = 0;
  int bad_values = 0;
  int restored = 0;
  int clamped = 0;
  int applied = 0;

  for (const auto& u : parsed.unknown_keys) {
    verdict.repairs.push_back({u.key, RepairAction::kDropped,
                               "unknown option '" + u.key + "'"});
    ++unknown;
  }
  for (const auto& issue : parsed.issues) {
    if (issue.kind == OptionsErrorKind::kSyntax) {
      verdict.notes.push_back("line " + std::to_string(issue.line) +
                              ": ignored: " + issue.message);
      continue;
    }
    // Out-of-range numbers stay in the assignments and are clamped below.
    if (parsed.Find(issue.key) != nullptr) continue;
    verdict.repairs.push_back({issue.key, RepairAction::kDropped, issue.message});
    ++bad_values;
  }

  TuningConfig candidate = baseline;
  for (const auto& a : parsed.assignments) {
    const OptionSchemaEntry* entry = FindOption(a.key);
    if (!InSubspace(subspace, a.key)) {
      if (entry->get(baseline) != std::optional<OptionValue>(a.value)) {
        verdict.repairs.push_back(
            {a.key, RepairAction::kRestoredFromBaseline,
             "outside the tunable subspace; kept " +
                 (entry->get(baseline) ? FormatOptionValue(*entry->get(baseline))
                                       : std::string("unset"))});
        ++restored;
      }
      continue;
    }
    OptionValue value = a.value;
    if (!entry->InRange(value)) {
      const OptionValue fixed = entry->Clamp(value);
      if (!entry->InRange(fixed)) {
        verdict.repairs.push_back({a.key, RepairAction::kDropped,
                                   "illegal value " + FormatOptionValue(value)});
        ++bad_values;
        continue;
      }
      verdict.repairs.push_back(
          {a.key, RepairAction::kClamped,
           FormatOptionValue(value) + " -> " + FormatOptionValue(fixed)});
      value = fixed;
      ++clamped;
    }
    entry->set(candidate, value);
    ++applied;
  }

  verdict.warnings = ConsistencyCheck(candidate, baseline);

  if (applied == 0 && unknown + bad_values + restored > 0) {
    verdict.outcome = Outcome::kRejected;
    verdict.failure = unknown >= bad_values + restored
                          ? FailureClass::kUnknownKeys
                          : FailureClass::kRangeViolation;
    verdict.notes.push_back("no usable assignment survived repair");
    return verdict;
  }
  if (applied == 0 && parsed.assignments.empty()) {
    verdict.outcome = Outcome::kRejected;
    verdict.failure = FailureClass::kFormatError;
    verdict.notes.push_back("no assignments found");
    return verdict;
  }
  const auto violations = ConfigViolations(candidate);
  if (!violations.empty()) {
    verdict.outcome = Outcome::kRejected;
    verdict.failure = FailureClass::kRangeViolation;
    verdict.notes.insert(verdict.notes.end(), violations.begin(), violations.end());
    return verdict;
  }
  verdict.outcome = Outcome::kAccepted;
  if (unknown > 0) {
    verdict.failure = FailureClass::kUnknownKeys;
  } else if (clamped + bad_values > 0) {
    verdict.failure = FailureClass::kRangeViolation;
  }
  verdict.config = candidate;
  return verdict;
}

GuardVerdict GuardResponse(std::string_view response,
                           const TuningConfig& baseline,
                           const Subspace& subspace,
                           const GuardOptions& options) {
  GuardVerdict verdict;
  verdict.outcome = Outcome::kRejected;
  if (DetectRepetition(response, options.max_period, options.min_repeats)) {
    verdict.failure = FailureClass::kRepetition;
    verdict.notes.push_back("degenerate repetition at the end of the response");
    return verdict;
  }
  std::string block;
  try {
    block = ExtractConfigBlock(response);
  } catch (const FormatError& e) {
    verdict.failure = FailureClass::kFormatError;
    verdict.notes.push_back(e.what());
    return verdict;
  }
  if (DetectTruncation(block, RequiredKeys(subspace))) {
    verdict.failure = FailureClass::kTruncated;
    verdict.notes.push_back("configuration block is cut off or incomplete");
    return verdict;
  }
  return Sanitize(ParseOptions(block, ParseMode::kLenient), baseline, subspace);
}

LabeledResponse SplitExpectLabel(std::string_view text) {
  LabeledResponse out;
  constexpr std::string_view kPrefix = "# expect:";
  if (text.substr(0, kPrefix.size()) != kPrefix) {
    out.body = std::string(text);
    return out;
  }
  std::size_t nl = text.find('\n');
  if (nl == std::string_view::npos) nl = text.size();
  const auto label = Trim(text.substr(kPrefix.size(), nl - kPrefix.size()));
  out.labeled = true;
  if (label != "none") {
    out.expect = ParseFailureClass(label);
    if (!out.expect) {
      throw std::invalid_argument("unknown failure class label: " + std::string(label));
    }
  }
  out.body = std::string(text.substr(std::min(nl + 1, text.size())));
  return out;
}

std::string_view TemperatureEventName(TemperatureEvent event) {
  switch (event) {
    case TemperatureEvent::kRigidity:
      return "Rigidity";
    case TemperatureEvent::kFormatFailure:
      return "FormatFailure";
    case TemperatureEvent::kSuccess:
      return "Success";
  }
  return "Success";
}

TemperatureState NextTemperature(TemperatureState state, TemperatureEvent event) {
  switch (event) {
    case TemperatureEvent::kRigidity:
      state.current =
          RoundTemperature(std::min(kMaxTemperature, state.current + kRigidityStep));
      ++state.rigidity_events;
      break;
    case TemperatureEvent::kFormatFailure:
      state.current =
          RoundTemperature(std::max(0.0, state.current - kFormatFailureStep));
      ++state.format_failures;
      break;
    case TemperatureEvent::kSuccess:
      break;
  }
  state.current = std::clamp(state.current, 0.0, kMaxTemperature);
  return state;
}

}  // namespace lsmtune

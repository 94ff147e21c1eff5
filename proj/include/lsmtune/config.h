#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace lsmtune {

using Bytes = std::uint64_t;

inline constexpr Bytes kKiB = 1024;
inline constexpr Bytes kMiB = 1024 * kKiB;
inline constexpr Bytes kGiB = 1024 * kMiB;

enum class CompactionStyle { kLevel, kUniversal, kFifo };

enum class CompactionPri {
  kByCompensatedSize,
  kOldestLargestSeqFirst,
  kMinOverlappingRatio,
};

std::string_view CompactionStyleName(CompactionStyle style);
std::string_view CompactionPriName(CompactionPri pri);

// Typed snapshot of the compaction-related options plus the auxiliaries the
// simulator and the consistency checks need. Defaults are the engine's
// stock leveled-compaction values.
struct TuningConfig {
  int level0_file_num_compaction_trigger = 4;
  int level0_slowdown_writes_trigger = 20;
  int level0_stop_writes_trigger = 36;
  Bytes max_bytes_for_level_base = 256 * kMiB;
  int max_bytes_for_level_multiplier = 10;
  int max_background_compactions = 1;
  int max_background_jobs = 2;
  Bytes target_file_size_base = 64 * kMiB;
  int target_file_size_multiplier = 1;
  std::optional<Bytes> max_compaction_bytes;  // unset: derived
  Bytes compaction_readahead_size = 0;
  CompactionStyle compaction_style = CompactionStyle::kLevel;
  std::optional<CompactionPri> compaction_pri;  // unset: kMinOverlappingRatio

  // Not compaction knobs, but the memtable pipeline and cache settings
  // that interact with them.
  Bytes write_buffer_size = 64 * kMiB;
  int max_write_buffer_number = 2;
  Bytes block_cache_size = 8 * kMiB;
  bool cache_index_and_filter_blocks = false;

  bool operator==(const TuningConfig&) const = default;
};

TuningConfig DefaultConfig();

// Human-readable descriptions of every violated invariant; empty when valid.
std::vector<std::string> ConfigViolations(const TuningConfig& config);
inline bool IsValid(const TuningConfig& config) {
  return ConfigViolations(config).empty();
}

// max_bytes_for_level_base * multiplier^(level-1), saturating at
// UINT64_MAX. Throws std::invalid_argument for level 0, which is governed
// by file count rather than bytes.
Bytes LevelTargetSize(const TuningConfig& config, int level);

// Largest output file allowed when compacting into `level` (>= 1).
Bytes TargetFileSize(const TuningConfig& config, int level);

Bytes EffectiveMaxCompactionBytes(const TuningConfig& config);

CompactionPri EffectiveCompactionPri(const TuningConfig& config);

enum class WriteState { kNormal, kSlowdown, kStopped };

std::string_view WriteStateName(WriteState state);

WriteState WriteStateFor(const TuningConfig& config, int l0_count);

}  // namespace lsmtune

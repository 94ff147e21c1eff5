#include "lsmtune/config.h"

#include <limits>
#include <stdexcept>

namespace lsmtune {

namespace {

Bytes SaturatingMul(Bytes a, Bytes b) {
  if (a != 0 && b > std::numeric_limits<Bytes>::max() / a) {
    return std::numeric_limits<Bytes>::max();
  }
  return a * b;
}

Bytes SaturatingPow(Bytes base, Bytes factor, int exponent) {
  Bytes result = base;
  for (int i = 0; i < exponent; ++i) {
    result = SaturatingMul(result, factor);
  }
  return result;
}

}  // namespace

std::string_view CompactionStyleName(CompactionStyle style) {
  switch (style) {
    case CompactionStyle::kLevel:
      return "level";
    case CompactionStyle::kUniversal:
      return "universal";
    case CompactionStyle::kFifo:
      return "fifo";
  }
  return "level";
}

std::string_view CompactionPriName(CompactionPri pri) {
  switch (pri) {
    case CompactionPri::kByCompensatedSize:
      return "kByCompensatedSize";
    case CompactionPri::kOldestLargestSeqFirst:
      return "kOldestLargestSeqFirst";
    case CompactionPri::kMinOverlappingRatio:
      return "kMinOverlappingRatio";
  }
  return "kMinOverlappingRatio";
}

TuningConfig DefaultConfig() { return TuningConfig{}; }

std::vector<std::string> ConfigViolations(const TuningConfig& c) {
  std::vector<std::string> out;
  if (c.level0_file_num_compaction_trigger <= 0) {
    out.emplace_back("level0_file_num_compaction_trigger must be > 0");
  }
  if (c.level0_slowdown_writes_trigger < c.level0_file_num_compaction_trigger) {
    out.emplace_back(
        "level0_slowdown_writes_trigger must be >= "
        "level0_file_num_compaction_trigger");
  }
  if (c.level0_stop_writes_trigger < c.level0_slowdown_writes_trigger) {
    out.emplace_back(
        "level0_stop_writes_trigger must be >= level0_slowdown_writes_trigger");
  }
  if (c.max_bytes_for_level_base == 0) {
    out.emplace_back("max_bytes_for_level_base must be > 0");
  }
  if (c.max_bytes_for_level_multiplier < 1) {
    out.emplace_back("max_bytes_for_level_multiplier must be >= 1");
  }
  if (c.max_background_compactions < 1) {
    out.emplace_back("max_background_compactions must be >= 1");
  }
  if (c.max_background_compactions > c.max_background_jobs) {
    out.emplace_back(
        "max_background_compactions must be <= max_background_jobs");
  }
  if (c.target_file_size_base == 0) {
    out.emplace_back("target_file_size_base must be > 0");
  }
  if (c.target_file_size_multiplier < 1) {
    out.emplace_back("target_file_size_multiplier must be >= 1");
  }
  if (c.max_compaction_bytes && *c.max_compaction_bytes == 0) {
    out.emplace_back("max_compaction_bytes must be > 0 when set");
  }
  if (c.write_buffer_size == 0) {
    out.emplace_back("write_buffer_size must be > 0");
  }
  if (c.max_write_buffer_number < 1) {
    out.emplace_back("max_write_buffer_number must be >= 1");
  }
  return out;
}

Bytes LevelTargetSize(const TuningConfig& config, int level) {
  if (level < 1) {
    throw std::invalid_argument(
        "level 0 has no byte target; it is governed by file count");
  }
  return SaturatingPow(config.max_bytes_for_level_base,
                       static_cast<Bytes>(config.max_bytes_for_level_multiplier),
                       level - 1);
}

Bytes TargetFileSize(const TuningConfig& config, int level) {
  if (level < 1) {
    throw std::invalid_argument("output level must be >= 1");
  }
  return SaturatingPow(config.target_file_size_base,
                       static_cast<Bytes>(config.target_file_size_multiplier),
                       level - 1);
}

Bytes EffectiveMaxCompactionBytes(const TuningConfig& config) {
  if (config.max_compaction_bytes) return *config.max_compaction_bytes;
  return SaturatingMul(config.target_file_size_base, 25);
}

CompactionPri EffectiveCompactionPri(const TuningConfig& config) {
  return config.compaction_pri.value_or(CompactionPri::kMinOverlappingRatio);
}

std::string_view WriteStateName(WriteState state) {
  switch (state) {
    case WriteState::kNormal:
      return "Normal";
    case WriteState::kSlowdown:
      return "Slowdown";
    case WriteState::kStopped:
      return "Stopped";
  }
  return "Normal";
}

WriteState WriteStateFor(const TuningConfig& config, int l0_count) {
  if (l0_count >= config.level0_stop_writes_trigger) {
    return WriteState::kStopped;
  }
  if (l0_count >= config.level0_slowdown_writes_trigger) {
    return WriteState::kSlowdown;
  }
  return WriteState::kNormal;
}

}  // namespace lsmtune

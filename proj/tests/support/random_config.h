#pragma once

#include <cstdint>
#include <random>

#include "lsmtune/config.h"

namespace lsmtune::testing {

inline std::uint64_t Between(std::mt19937_64& rng, std::uint64_t lo,
                             std::uint64_t hi) {
  return lo + rng() % (hi - lo + 1);
}

// A config satisfying every invariant, with values inside the option
// schema's legal ranges.
inline TuningConfig RandomValidConfig(std::mt19937_64& rng) {
  TuningConfig c;
  c.level0_file_num_compaction_trigger = static_cast<int>(Between(rng, 1, 16));
  c.level0_slowdown_writes_trigger =
      c.level0_file_num_compaction_trigger + static_cast<int>(Between(rng, 0, 40));
  c.level0_stop_writes_trigger =
      c.level0_slowdown_writes_trigger + static_cast<int>(Between(rng, 0, 40));
  c.max_bytes_for_level_base = Between(rng, 1, 4096) * kMiB + Between(rng, 0, 1);
  c.max_bytes_for_level_multiplier = static_cast<int>(Between(rng, 1, 20));
  c.max_background_compactions = static_cast<int>(Between(rng, 1, 16));
  c.max_background_jobs =
      c.max_background_compactions + static_cast<int>(Between(rng, 0, 16));
  c.target_file_size_base = Between(rng, 1, 1024) * kMiB;
  c.target_file_size_multiplier = static_cast<int>(Between(rng, 1, 4));
  if (rng() % 2) c.max_compaction_bytes = Between(rng, 1, 1 << 16) * kMiB;
  c.compaction_readahead_size = Between(rng, 0, 8) * kMiB;
  c.compaction_style = static_cast<CompactionStyle>(Between(rng, 0, 2));
  if (rng() % 2) c.compaction_pri = static_cast<CompactionPri>(Between(rng, 0, 2));
  c.write_buffer_size = Between(rng, 1, 512) * kMiB;
  c.max_write_buffer_number = static_cast<int>(Between(rng, 1, 8));
  c.block_cache_size = Between(rng, 0, 1 << 14) * kMiB;
  c.cache_index_and_filter_blocks = rng() % 2 == 0;
  return c;
}

}  // namespace lsmtune::testing

#pragma once

#include <cstdint>
#include <deque>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "lsmtune/config.h"

namespace lsmtune {

using Key = std::uint32_t;

inline constexpr Key kMaxKeySpace = Key{1} << 31;
inline constexpr int kNumLevels = 7;

struct SstFile {
  std::uint64_t id = 0;
  int level = 0;
  Bytes size = 0;
  Key key_min = 0;
  Key key_max = 0;
  std::uint64_t seq = 0;
  // Sorted, duplicate-free user keys. Only populated for key-tracked
  // (miniature) instances, where size == keys.size() * entry_bytes.
  std::vector<Key> keys;
  bool being_compacted = false;

  bool tracked() const { return !keys.empty(); }
  bool Overlaps(Key lo, Key hi) const { return key_max >= lo && key_min <= hi; }
};

struct Memtable {
  Bytes bytes = 0;
  std::uint64_t entries = 0;
  std::vector<Key> keys;  // key-tracked instances only
};

// The simulated tree. Levels >= 1 are kept sorted by key_min; level 0 is in
// flush order.
struct LsmState {
  std::vector<std::vector<SstFile>> levels =
      std::vector<std::vector<SstFile>>(kNumLevels);
  Bytes memtable_bytes = 0;
  std::uint64_t memtable_entries = 0;
  std::deque<Memtable> immutables;

  Bytes logical_written = 0;  // user bytes persisted by flushes
  Bytes physical_written = 0;
  Bytes logical_live = 0;
  Bytes discarded = 0;
  Bytes flushed_bytes = 0;
  Bytes preloaded_bytes = 0;
  Bytes compaction_output_bytes = 0;

  double clock = 0.0;
  double stall_seconds = 0.0;
  double stopped_seconds = 0.0;
  std::uint64_t ops_completed = 0;

  std::uint64_t next_seq = 1;
  std::uint64_t next_file_id = 1;

  Key key_space = Key{1} << 22;
  Bytes entry_bytes = 1024;
  std::uint64_t entries_persisted = 0;
  std::uint64_t preload_entries = 0;

  std::mt19937_64 rng{0};

  int immutable_memtables() const {
    return static_cast<int>(immutables.size());
  }
  int l0_count() const { return static_cast<int>(levels[0].size()); }
  Bytes LevelBytes(int level) const;
  Bytes OnDiskBytes() const;
};

struct CompactionTask {
  int input_level = 0;
  int output_level = 1;
  std::vector<std::uint64_t> input_ids;  // both levels
  Bytes input_bytes = 0;
  Key key_lo = 0;
  Key key_hi = 0;
};

struct CompactionStats {
  Bytes input_bytes = 0;
  Bytes output_bytes = 0;
  Bytes discarded = 0;
  int output_files = 0;
};

struct AmpMetrics {
  double write_amp = 1.0;
  double read_amp = 0.0;
  double space_amp = 1.0;
  double stall_seconds = 0.0;
  double stopped_seconds = 0.0;
  double achieved_ops_rate = 0.0;

  bool operator==(const AmpMetrics&) const = default;
};

class StaleTaskError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Moves bytes into the active memtable, sealing it into an immutable
// memtable each time it reaches write_buffer_size. Writes that would need a
// new memtable while max_write_buffer_number immutables are pending are
// refused; the number of accepted entries is returned.
std::uint64_t AcceptWrites(LsmState& state, const TuningConfig& config,
                           std::uint64_t entries);

// Turns the oldest immutable memtable into an L0 file.
// Precondition: state.immutable_memtables() >= 1.
const SstFile& Flush(LsmState& state, const TuningConfig& config);

// Levels eligible for compaction, most urgent first. L0 scores
// file_count / level0_file_num_compaction_trigger once the trigger is
// reached; level L >= 1 scores idle_bytes / LevelTargetSize(L) when that
// exceeds 1. Ties go to the lower level.
std::vector<std::pair<int, double>> CompactionScores(const LsmState& state,
                                                     const TuningConfig& config);

// The task for the most urgent level that has a compactable file set, or
// nullopt. Files already being compacted are never reused.
std::optional<CompactionTask> PickCompaction(const LsmState& state,
                                             const TuningConfig& config);

// For key-tracked inputs the surviving entries are computed exactly by
// merging keys and `obsolete_fraction` is ignored; otherwise
// round(input * obsolete_fraction) bytes are discarded. Throws
// StaleTaskError if any input file is no longer present.
CompactionStats ApplyCompaction(LsmState& state, const CompactionTask& task,
                                const TuningConfig& config,
                                double obsolete_fraction);

AmpMetrics Amplification(const LsmState& state);

// Fills levels 1.. as a settled tree holding `bytes` of distinct data, as if
// bulk-loaded. Counted in preloaded_bytes, not in logical/physical writes.
void Preload(LsmState& state, const TuningConfig& config, Bytes bytes);

// Empty when every structural invariant holds.
std::vector<std::string> StateViolations(const LsmState& state);

// Recomputes logical_live from the persisted entry counts (or the exact key
// sets for tracked instances).
void RefreshLiveBytes(LsmState& state);

}  // namespace lsmtune

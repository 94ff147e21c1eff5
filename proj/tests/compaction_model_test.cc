#include <gtest/gtest.h>

#include <algorithm>
#include <map>
#include <random>
#include <set>

#include "lsmtune/config.h"
#include "lsmtune/lsm_state.h"
#include "lsmtune/simulator.h"

namespace lsmtune {
namespace {

SstFile MakeFile(LsmState& state, int level, Key lo, Key hi, Bytes size) {
  SstFile f;
  f.id = state.next_file_id++;
  f.seq = state.next_seq++;
  f.level = level;
  f.key_min = lo;
  f.key_max = hi;
  f.size = size;
  return f;
}

// Adds an untracked file as if it had been flushed and compacted down, so
// the conservation counters stay balanced.
void Place(LsmState& state, int level, Key lo, Key hi, Bytes size) {
  auto f = MakeFile(state, level, lo, hi, size);
  state.preloaded_bytes += size;
  auto& files = state.levels[level];
  files.push_back(std::move(f));
  if (level >= 1) {
    std::sort(files.begin(), files.end(),
              [](const SstFile& a, const SstFile& b) { return a.key_min < b.key_min; });
  }
}

void PlaceTracked(LsmState& state, int level, std::vector<Key> keys) {
  std::sort(keys.begin(), keys.end());
  keys.erase(std::unique(keys.begin(), keys.end()), keys.end());
  auto f = MakeFile(state, level, keys.front(), keys.back(),
                    keys.size() * state.entry_bytes);
  f.keys = std::move(keys);
  state.preloaded_bytes += f.size;
  auto& files = state.levels[level];
  files.push_back(std::move(f));
  if (level >= 1) {
    std::sort(files.begin(), files.end(),
              [](const SstFile& a, const SstFile& b) { return a.key_min < b.key_min; });
  }
}

TEST(ConfigTest, DefaultsMatchStockValues) {
  const TuningConfig c = DefaultConfig();
  EXPECT_EQ(c.level0_file_num_compaction_trigger, 4);
  EXPECT_EQ(c.level0_slowdown_writes_trigger, 20);
  EXPECT_EQ(c.level0_stop_writes_trigger, 36);
  EXPECT_EQ(c.max_bytes_for_level_base, 256 * kMiB);
  EXPECT_EQ(c.max_bytes_for_level_multiplier, 10);
  EXPECT_EQ(c.max_background_compactions, 1);
  EXPECT_EQ(c.max_background_jobs, 2);
  EXPECT_EQ(c.target_file_size_base, 64 * kMiB);
  EXPECT_EQ(c.target_file_size_multiplier, 1);
  EXPECT_FALSE(c.max_compaction_bytes.has_value());
  EXPECT_EQ(c.compaction_readahead_size, 0u);
  EXPECT_EQ(c.compaction_style, CompactionStyle::kLevel);
  EXPECT_FALSE(c.compaction_pri.has_value());
  EXPECT_TRUE(IsValid(c));
}

TEST(ConfigTest, LevelTargetSize) {
  const TuningConfig c = DefaultConfig();
  EXPECT_EQ(LevelTargetSize(c, 1), 256 * kMiB);
  EXPECT_EQ(LevelTargetSize(c, 3), 25600 * kMiB);
  EXPECT_THROW(LevelTargetSize(c, 0), std::invalid_argument);

  TuningConfig flat = c;
  flat.max_bytes_for_level_multiplier = 1;
  for (int level = 1; level < kNumLevels; ++level) {
    EXPECT_EQ(LevelTargetSize(flat, level), flat.max_bytes_for_level_base);
  }
}

TEST(ConfigTest, LevelTargetSizeSaturates) {
  TuningConfig c;
  c.max_bytes_for_level_base = Bytes{1} << 62;
  c.max_bytes_for_level_multiplier = 100;
  EXPECT_EQ(LevelTargetSize(c, 6), std::numeric_limits<Bytes>::max());
}

TEST(ConfigTest, EffectiveMaxCompactionBytes) {
  TuningConfig c;
  EXPECT_EQ(EffectiveMaxCompactionBytes(c), 1600 * kMiB);
  c.target_file_size_base = 128 * kMiB;
  EXPECT_EQ(EffectiveMaxCompactionBytes(c), 3200 * kMiB);
  c.max_compaction_bytes = 500 * kMiB;
  EXPECT_EQ(EffectiveMaxCompactionBytes(c), 500 * kMiB);
}

TEST(ConfigTest, WriteStateThresholds) {
  const TuningConfig c;
  EXPECT_EQ(WriteStateFor(c, 3), WriteState::kNormal);
  EXPECT_EQ(WriteStateFor(c, 19), WriteState::kNormal);
  EXPECT_EQ(WriteStateFor(c, 20), WriteState::kSlowdown);
  EXPECT_EQ(WriteStateFor(c, 35), WriteState::kSlowdown);
  EXPECT_EQ(WriteStateFor(c, 36), WriteState::kStopped);
}

TEST(ConfigTest, WriteStateIsMonotoneInL0Count) {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 200; ++trial) {
    TuningConfig c;
    c.level0_file_num_compaction_trigger = 1 + static_cast<int>(rng() % 10);
    c.level0_slowdown_writes_trigger =
        c.level0_file_num_compaction_trigger + static_cast<int>(rng() % 20);
    c.level0_stop_writes_trigger =
        c.level0_slowdown_writes_trigger + static_cast<int>(rng() % 20);
    for (int n = 0; n < 60; ++n) {
      EXPECT_LE(static_cast<int>(WriteStateFor(c, n)),
                static_cast<int>(WriteStateFor(c, n + 1)));
    }
  }
}

TEST(ConfigTest, ViolationsNameTheBrokenInvariant) {
  TuningConfig c;
  c.max_background_compactions = 3;
  c.max_background_jobs = 2;
  auto v = ConfigViolations(c);
  ASSERT_EQ(v.size(), 1u);
  EXPECT_NE(v[0].find("max_background_jobs"), std::string::npos);

  c = TuningConfig{};
  c.level0_slowdown_writes_trigger = 2;
  EXPECT_FALSE(IsValid(c));
  c = TuningConfig{};
  c.max_bytes_for_level_multiplier = 0;
  EXPECT_FALSE(IsValid(c));
  c = TuningConfig{};
  c.target_file_size_base = 0;
  EXPECT_FALSE(IsValid(c));
}

TEST(FlushTest, FirstFlushProducesOneL0File) {
  LsmState state;
  TuningConfig c;
  ASSERT_EQ(AcceptWrites(state, c, 64 * 1024), 64u * 1024u);
  ASSERT_EQ(state.immutable_memtables(), 1);
  const SstFile& f = Flush(state, c);
  EXPECT_EQ(f.size, 64 * kMiB);
  EXPECT_EQ(state.l0_count(), 1);
  EXPECT_EQ(state.immutable_memtables(), 0);
  EXPECT_EQ(state.physical_written, 64 * kMiB);
  EXPECT_DOUBLE_EQ(Amplification(state).write_amp, 1.0);
  EXPECT_TRUE(StateViolations(state).empty());
}

TEST(FlushTest, FullMemtablePipelineBlocksWrites) {
  LsmState state;
  TuningConfig c;
  const std::uint64_t per_table = c.write_buffer_size / state.entry_bytes;
  // Two immutables plus a full active memtable.
  EXPECT_EQ(AcceptWrites(state, c, 10 * per_table), 3 * per_table);
  EXPECT_EQ(state.immutable_memtables(), c.max_write_buffer_number);
  EXPECT_EQ(AcceptWrites(state, c, 100), 0u);
  Flush(state, c);
  EXPECT_GT(AcceptWrites(state, c, 100), 0u);
}

TEST(FlushTest, OverlappingFlushesCoexistInL0) {
  LsmState state;
  TuningConfig c;
  c.write_buffer_size = 4 * state.entry_bytes;
  Memtable a{4 * state.entry_bytes, 4, {10, 20, 30, 40}};
  Memtable b{4 * state.entry_bytes, 4, {15, 25, 35, 45}};
  state.immutables.push_back(a);
  state.immutables.push_back(b);
  Flush(state, c);
  Flush(state, c);
  ASSERT_EQ(state.l0_count(), 2);
  EXPECT_TRUE(state.levels[0][0].Overlaps(state.levels[0][1].key_min,
                                          state.levels[0][1].key_max));
  EXPECT_TRUE(StateViolations(state).empty());
}

TEST(FlushTest, RequiresImmutableMemtable) {
  LsmState state;
  EXPECT_THROW(Flush(state, TuningConfig{}), std::logic_error);
}

TEST(PickCompactionTest, EmptyTreeHasNothingToDo) {
  LsmState state;
  EXPECT_FALSE(PickCompaction(state, TuningConfig{}).has_value());
}

TEST(PickCompactionTest, L0TriggerSelectsEveryL0FileAndOverlappingL1) {
  LsmState state;
  TuningConfig c;
  for (int i = 0; i < 4; ++i) {
    Place(state, 0, 100 + 10 * i, 200 + 10 * i, 64 * kMiB);
  }
  Place(state, 1, 0, 50, 64 * kMiB);      // disjoint from L0
  Place(state, 1, 150, 160, 64 * kMiB);   // overlaps
  Place(state, 1, 1000, 2000, 64 * kMiB);  // disjoint
  auto task = PickCompaction(state, c);
  ASSERT_TRUE(task.has_value());
  EXPECT_EQ(task->input_level, 0);
  EXPECT_EQ(task->output_level, 1);
  EXPECT_EQ(task->input_ids.size(), 5u);
  EXPECT_EQ(task->input_bytes, 5 * 64 * kMiB);

  Place(state, 1, 3000, 3001, 64 * kMiB);
  state.levels[0].pop_back();
  EXPECT_FALSE(PickCompaction(state, c).has_value());
}

// Score every level the slow way and pick the file by scanning the whole
// next level for each candidate.
struct OracleChoice {
  int level = -1;
  std::uint64_t file_id = 0;
};

OracleChoice BruteForcePick(const LsmState& state, const TuningConfig& c) {
  OracleChoice best;
  double best_score = 1.0;
  for (int level = 1; level + 1 < kNumLevels; ++level) {
    Bytes total = 0;
    for (const auto& f : state.levels[level]) total += f.size;
    Bytes target = c.max_bytes_for_level_base;
    for (int i = 1; i < level; ++i) target *= c.max_bytes_for_level_multiplier;
    const double score = static_cast<double>(total) / static_cast<double>(target);
    if (score > best_score) {
      best_score = score;
      best.level = level;
    }
  }
  if (best.level < 0) return best;
  const auto pri = c.compaction_pri.value_or(CompactionPri::kMinOverlappingRatio);
  const SstFile* pick = nullptr;
  long double pick_key = 0;
  for (const auto& f : state.levels[best.level]) {
    long double key = 0;
    if (pri == CompactionPri::kMinOverlappingRatio) {
      Bytes overlap = 0;
      for (const auto& g : state.levels[best.level + 1]) {
        if (!(g.key_max < f.key_min || g.key_min > f.key_max)) overlap += g.size;
      }
      key = static_cast<long double>(overlap) / static_cast<long double>(f.size);
    } else if (pri == CompactionPri::kOldestLargestSeqFirst) {
      key = static_cast<long double>(f.seq);
    } else {
      key = -static_cast<long double>(f.size);
    }
    if (pick == nullptr || key < pick_key || (key == pick_key && f.id < pick->id)) {
      pick = &f;
      pick_key = key;
    }
  }
  best.file_id = pick->id;
  return best;
}

TEST(PickCompactionTest, MatchesBruteForceScoreOracle) {
  std::mt19937_64 rng(11);
  int checked = 0;
  for (int trial = 0; trial < 300; ++trial) {
    LsmState state;
    TuningConfig c;
    c.max_bytes_for_level_base = 4 * kMiB;
    c.max_bytes_for_level_multiplier = 4;
    c.max_compaction_bytes = 1;  // no expansion; the oracle picks one file
    const int pri = static_cast<int>(rng() % 4);
    if (pri < 3) c.compaction_pri = static_cast<CompactionPri>(pri);
    // Three populated levels of disjoint files.
    for (int level = 1; level <= 3; ++level) {
      const int n = static_cast<int>(rng() % 8);
      Key cursor = static_cast<Key>(rng() % 50);
      for (int i = 0; i < n; ++i) {
        const Key width = 1 + static_cast<Key>(rng() % 200);
        Place(state, level, cursor, cursor + width,
              (1 + rng() % 4) * kMiB);
        cursor += width + 1 + static_cast<Key>(rng() % 100);
      }
    }
    const OracleChoice want = BruteForcePick(state, c);
    const auto got = PickCompaction(state, c);
    if (want.level < 0) {
      EXPECT_FALSE(got.has_value());
      continue;
    }
    ASSERT_TRUE(got.has_value());
    EXPECT_EQ(got->input_level, want.level);
    EXPECT_EQ(got->input_ids.front(), want.file_id);
    ++checked;
  }
  EXPECT_GT(checked, 50);
}

TEST(PickCompactionTest, L1AtTwiceTargetFollowsCompactionPri) {
  LsmState state;
  TuningConfig c;
  c.max_bytes_for_level_base = 256 * kMiB;
  c.max_compaction_bytes = 64 * kMiB;
  // L1 holds 512 MiB in 8 files; L2 has a file over the first three.
  for (int i = 0; i < 8; ++i) {
    Place(state, 1, 1000 * i, 1000 * i + 999, 64 * kMiB);
  }
  Place(state, 2, 0, 2500, 64 * kMiB);
  state.levels[1][5].seq = 0;  // oldest

  auto task = PickCompaction(state, c);
  ASSERT_TRUE(task.has_value());
  EXPECT_EQ(task->input_level, 1);
  // No overlap at all for files 3..7; lowest id among them.
  EXPECT_EQ(task->input_ids.front(), state.levels[1][3].id);

  c.compaction_pri = CompactionPri::kOldestLargestSeqFirst;
  task = PickCompaction(state, c);
  ASSERT_TRUE(task.has_value());
  EXPECT_EQ(task->input_ids.front(), state.levels[1][5].id);

  state.levels[1][6].size = 65 * kMiB;
  state.preloaded_bytes += kMiB;
  c.compaction_pri = CompactionPri::kByCompensatedSize;
  task = PickCompaction(state, c);
  ASSERT_TRUE(task.has_value());
  EXPECT_EQ(task->input_ids.front(), state.levels[1][6].id);
}

TEST(PickCompactionTest, ExpansionStaysWithinMaxCompactionBytes) {
  LsmState state;
  TuningConfig c;
  c.max_bytes_for_level_base = 64 * kMiB;
  for (int i = 0; i < 10; ++i) {
    Place(state, 1, 100 * i, 100 * i + 99, 64 * kMiB);
  }
  c.max_compaction_bytes = 200 * kMiB;
  auto task = PickCompaction(state, c);
  ASSERT_TRUE(task.has_value());
  EXPECT_EQ(task->input_ids.size(), 3u);
  EXPECT_LE(task->input_bytes, 200 * kMiB);
}

TEST(PickCompactionTest, BusyFilesAreSkipped) {
  LsmState state;
  TuningConfig c;
  for (int i = 0; i < 4; ++i) Place(state, 0, 0, 100, 64 * kMiB);
  state.levels[0][2].being_compacted = true;
  EXPECT_FALSE(PickCompaction(state, c).has_value());
}

TEST(ApplyCompactionTest, TrivialMoveOfOneFile) {
  LsmState state;
  TuningConfig c;
  Place(state, 0, 10, 20, 64 * kMiB);
  CompactionTask task{0, 1, {state.levels[0][0].id}, 64 * kMiB, 10, 20};
  const Bytes before = state.physical_written;
  auto stats = ApplyCompaction(state, task, c, 0.0);
  EXPECT_EQ(stats.output_bytes, 64 * kMiB);
  EXPECT_EQ(stats.output_files, 1);
  EXPECT_EQ(state.levels[1].size(), 1u);
  EXPECT_EQ(state.levels[1][0].size, 64 * kMiB);
  EXPECT_EQ(state.physical_written - before, 64 * kMiB);
  EXPECT_TRUE(StateViolations(state).empty());
}

TEST(ApplyCompactionTest, SplitsOutputAtTargetFileSize) {
  LsmState state;
  TuningConfig c;
  Place(state, 0, 0, 1 << 20, 100 * kMiB);
  Place(state, 0, 5, 1 << 19, 100 * kMiB);
  CompactionTask task{0, 1,
                      {state.levels[0][0].id, state.levels[0][1].id},
                      200 * kMiB, 0, 1 << 20};
  auto stats = ApplyCompaction(state, task, c, 0.0);
  EXPECT_EQ(stats.output_files, 4);
  std::vector<Bytes> sizes;
  for (const auto& f : state.levels[1]) sizes.push_back(f.size);
  EXPECT_EQ(sizes, (std::vector<Bytes>{64 * kMiB, 64 * kMiB, 64 * kMiB, 8 * kMiB}));
  EXPECT_TRUE(StateViolations(state).empty());
}

TEST(ApplyCompactionTest, ObsoleteFractionDiscardsBytes) {
  LsmState state;
  TuningConfig c;
  Place(state, 0, 0, 1000, 64 * kMiB);
  Place(state, 0, 500, 1500, 64 * kMiB);
  CompactionTask task{0, 1,
                      {state.levels[0][0].id, state.levels[0][1].id},
                      128 * kMiB, 0, 1500};
  auto stats = ApplyCompaction(state, task, c, 0.25);
  EXPECT_EQ(stats.output_bytes, 96 * kMiB);
  EXPECT_EQ(state.discarded, 32 * kMiB);
  EXPECT_TRUE(StateViolations(state).empty());
}

TEST(ApplyCompactionTest, MiniatureMergeMatchesKeyMultisetOracle) {
  // Two 64-key files over a 100-key space sharing 32 keys: a quarter of the
  // 128 input entries is obsolete.
  LsmState state;
  state.key_space = 100;
  state.entry_bytes = kMiB;
  TuningConfig c;
  std::vector<Key> a, b;
  for (Key k = 0; k < 64; ++k) a.push_back(k);
  for (Key k = 32; k < 96; ++k) b.push_back(k);
  PlaceTracked(state, 0, a);
  PlaceTracked(state, 0, b);

  std::multiset<Key> bag(a.begin(), a.end());
  bag.insert(b.begin(), b.end());
  const std::set<Key> survivors(bag.begin(), bag.end());

  CompactionTask task{0, 1,
                      {state.levels[0][0].id, state.levels[0][1].id},
                      128 * kMiB, 0, 95};
  auto stats = ApplyCompaction(state, task, c, 0.9);
  EXPECT_EQ(stats.output_bytes, survivors.size() * kMiB);
  EXPECT_EQ(stats.output_bytes, 96 * kMiB);
  std::set<Key> got;
  for (const auto& f : state.levels[1]) got.insert(f.keys.begin(), f.keys.end());
  EXPECT_EQ(got, survivors);
  EXPECT_TRUE(StateViolations(state).empty());
}

TEST(ApplyCompactionTest, StaleTaskThrows) {
  LsmState state;
  TuningConfig c;
  Place(state, 0, 0, 10, kMiB);
  CompactionTask task{0, 1, {state.levels[0][0].id, 999}, 2 * kMiB, 0, 10};
  EXPECT_THROW(ApplyCompaction(state, task, c, 0.0), StaleTaskError);
  EXPECT_EQ(state.l0_count(), 1);
}

TEST(AmplificationTest, FlushThenCompactDoublesWriteAmp) {
  LsmState state;
  TuningConfig c;
  AcceptWrites(state, c, 64 * 1024);
  Flush(state, c);
  CompactionTask task{0, 1, {state.levels[0][0].id}, 64 * kMiB,
                      state.levels[0][0].key_min, state.levels[0][0].key_max};
  ApplyCompaction(state, task, c, 0.0);
  EXPECT_EQ(state.physical_written, 128 * kMiB);
  EXPECT_EQ(state.logical_written, 64 * kMiB);
  EXPECT_DOUBLE_EQ(Amplification(state).write_amp, 2.0);
}

TEST(AmplificationTest, ReadAmpCountsL0FilesAndSortedLevels) {
  LsmState state;
  Place(state, 0, 0, 10, kMiB);
  Place(state, 0, 0, 10, kMiB);
  Place(state, 1, 0, 10, kMiB);
  Place(state, 3, 0, 10, kMiB);
  EXPECT_DOUBLE_EQ(Amplification(state).read_amp, 4.0);
}

TEST(AmplificationTest, EmptyTreeHasUnitSpaceAmp) {
  LsmState state;
  EXPECT_DOUBLE_EQ(Amplification(state).space_amp, 1.0);
  EXPECT_DOUBLE_EQ(Amplification(state).read_amp, 0.0);
}

TEST(PreloadTest, BuildsSettledDisjointLevels) {
  LsmState state;
  TuningConfig c;
  Preload(state, c, kGiB);
  EXPECT_TRUE(StateViolations(state).empty());
  EXPECT_EQ(state.OnDiskBytes(), kGiB);
  EXPECT_EQ(state.logical_written, 0u);
  EXPECT_FALSE(PickCompaction(state, c).has_value());
}

// Per-second ops during a simulated run.
double TotalOps(const RunResult& r) {
  double sum = 0;
  for (double x : r.throughput) sum += x;
  return sum;
}

TEST(SimulatorTest, NoOfferedOpsOnlyAdvancesClock) {
  WorkloadSpec w;
  w.offered_ops_rate = 0;
  Simulator sim(TuningConfig{}, w, DeviceModel{});
  auto m = sim.Step(1.0);
  EXPECT_EQ(m.writes_accepted + m.reads_completed, 0u);
  EXPECT_DOUBLE_EQ(sim.state().clock, 1.0);
  EXPECT_EQ(sim.state().OnDiskBytes(), 0u);
  EXPECT_EQ(sim.state().memtable_bytes, 0u);
  EXPECT_DOUBLE_EQ(Amplification(sim.state()).achieved_ops_rate, 0.0);
}

TEST(SimulatorTest, StoppedStateAcceptsNoWrites) {
  WorkloadSpec w;
  Simulator sim(TuningConfig{}, w, DeviceModel{});
  auto& state = sim.mutable_state();
  for (int i = 0; i < 36; ++i) Place(state, 0, 0, 100, 64 * kMiB);
  ASSERT_EQ(WriteStateFor(sim.config(), state.l0_count()), WriteState::kStopped);
  // One tick, before any compaction can finish.
  auto m = sim.Step(0.01);
  EXPECT_EQ(m.writes_accepted, 0u);
  EXPECT_GT(m.stopped_seconds, 0.0);
}

TEST(SimulatorTest, ForcedStallLimitsThroughput) {
  TuningConfig c;
  c.level0_file_num_compaction_trigger = 1;
  c.level0_slowdown_writes_trigger = 1;
  c.level0_stop_writes_trigger = 1;
  WorkloadSpec w = MakeWorkload(WorkloadKind::kFillRandom, 30);
  RunResult r = RunWorkload(c, w, DeviceModel{});
  EXPECT_GT(r.amp.stopped_seconds, 0.0);
  EXPECT_LT(r.amp.achieved_ops_rate, w.offered_ops_rate);
  EXPECT_LT(TotalOps(r), w.offered_ops_rate * w.duration);
}

TEST(SimulatorTest, RunWorkloadIsDeterministic) {
  WorkloadSpec w = MakeWorkload(WorkloadKind::kFillRandom, 60, 42);
  w.key_space = 1 << 20;
  DeviceModel d = DeviceModel::StallProne();
  d.obsolete_jitter = 0.05;
  const RunResult a = RunWorkload(TuningConfig{}, w, d);
  const RunResult b = RunWorkload(TuningConfig{}, w, d);
  EXPECT_TRUE(a == b);
  EXPECT_EQ(a.throughput.size(), 60u);
}

TEST(SimulatorTest, ReadRandomWritesNothing) {
  WorkloadSpec w = MakeWorkload(WorkloadKind::kReadRandom, 30);
  Simulator sim(TuningConfig{}, w, DeviceModel{});
  const Bytes before = sim.state().logical_written;
  for (int s = 0; s < 30; ++s) sim.Step(1.0);
  EXPECT_EQ(sim.state().logical_written, before);
  EXPECT_GT(sim.state().ops_completed, 0u);
}

// Two independent L1->L2 jobs of size S each; per-thread rate w is the only
// limit. One worker needs 2 * (2S / w); two workers need 2S / w.
double DrainSeconds(int compactions) {
  TuningConfig c;
  c.max_background_compactions = compactions;
  c.max_background_jobs = compactions + 1;
  c.max_bytes_for_level_base = kMiB;
  c.max_compaction_bytes = 64 * kMiB;
  WorkloadSpec w;
  w.offered_ops_rate = 0;
  DeviceModel d;
  d.bandwidth = 1e15;
  d.worker_bandwidth = 64.0 * kMiB;
  d.compaction_setup_seconds = 0;
  d.obsolete_fraction = 0;
  Simulator sim(c, w, d);
  Place(sim.mutable_state(), 1, 0, 999, 64 * kMiB);
  Place(sim.mutable_state(), 1, 1000, 1999, 64 * kMiB);
  double t = 0;
  while (!sim.state().levels[1].empty() && t < 100) {
    sim.Step(0.01);
    t += 0.01;
  }
  return t;
}

TEST(SimulatorTest, SecondCompactionWorkerHalvesDrainTime) {
  const double closed_one = 2 * (2 * 64.0) / 64.0;  // 4 s
  const double closed_two = (2 * 64.0) / 64.0;      // 2 s
  EXPECT_NEAR(DrainSeconds(1), closed_one, 0.02);
  EXPECT_NEAR(DrainSeconds(2), closed_two, 0.02);
}

TEST(SimulatorTest, EqualShareWhenBudgetBinds) {
  // Aggregate budget B below two workers' demand: each gets B / 2, so two
  // workers drain in the same time as one running at full budget.
  auto drain = [](int compactions) {
    TuningConfig c;
    c.max_background_compactions = compactions;
    c.max_background_jobs = compactions + 1;
    c.max_bytes_for_level_base = kMiB;
    c.max_compaction_bytes = 64 * kMiB;
    WorkloadSpec w;
    w.offered_ops_rate = 0;
    DeviceModel d;
    d.bandwidth = 64.0 * kMiB;
    d.worker_bandwidth = 1e15;
    d.compaction_setup_seconds = 0;
    d.obsolete_fraction = 0;
    Simulator sim(c, w, d);
    Place(sim.mutable_state(), 1, 0, 999, 64 * kMiB);
    Place(sim.mutable_state(), 1, 1000, 1999, 64 * kMiB);
    double t = 0;
    while (!sim.state().levels[1].empty() && t < 100) {
      sim.Step(0.01);
      t += 0.01;
    }
    return t;
  };
  EXPECT_NEAR(drain(1), 4.0, 0.02);
  EXPECT_NEAR(drain(2), 4.0, 0.02);
}

TEST(SimulatorTest, InvariantsHoldThroughoutRun) {
  WorkloadSpec w = MakeWorkload(WorkloadKind::kMix, 120, 3);
  DeviceModel d = DeviceModel::StallProne();
  d.obsolete_jitter = 0.1;
  TuningConfig c;
  c.max_background_compactions = 3;
  c.max_background_jobs = 4;
  Simulator sim(c, w, d);
  Bytes physical = 0;
  for (int s = 0; s < 120; ++s) {
    sim.Step(1.0);
    ASSERT_TRUE(StateViolations(sim.state()).empty())
        << StateViolations(sim.state()).front();
    EXPECT_GE(sim.state().physical_written, physical);
    physical = sim.state().physical_written;
    EXPECT_LE(sim.running_compactions(), 3);
  }
  const AmpMetrics amp = Amplification(sim.state());
  EXPECT_GE(amp.write_amp, 1.0);
  EXPECT_GE(amp.space_amp, 1.0);
}

}  // namespace
}  // namespace lsmtune

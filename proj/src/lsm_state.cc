#include "lsmtune/lsm_state.h"

#include <algorithm>
#include <cmath>
#include <iterator>
#include <set>
#include <unordered_set>

namespace lsmtune {

namespace {

double UniformOpen(std::mt19937_64& rng) {
  // (0, 1], 53 bits; avoids the implementation-defined std distributions so
  // runs are reproducible across standard libraries.
  return (static_cast<double>(rng() >> 11) + 1.0) * 0x1.0p-53;
}

// Min and max of n uniform keys in [0, key_space), via order statistics.
std::pair<Key, Key> DrawKeyRange(std::mt19937_64& rng, Key key_space,
                                 std::uint64_t n) {
  if (n == 0) n = 1;
  const double k = static_cast<double>(key_space);
  const double inv_n = 1.0 / static_cast<double>(n);
  auto lo = static_cast<double>(
      std::floor(k * (1.0 - std::pow(UniformOpen(rng), inv_n))));
  auto top = static_cast<double>(
      std::floor(k * (1.0 - std::pow(UniformOpen(rng), inv_n))));
  Key a = static_cast<Key>(std::min(lo, k - 1));
  Key b = static_cast<Key>(std::max(0.0, k - 1 - std::min(top, k - 1)));
  if (a > b) std::swap(a, b);
  return {a, b};
}

std::vector<SstFile>::iterator FindById(std::vector<SstFile>& files,
                                        std::uint64_t id) {
  return std::find_if(files.begin(), files.end(),
                      [id](const SstFile& f) { return f.id == id; });
}

void InsertSorted(std::vector<SstFile>& level, SstFile file) {
  auto pos = std::lower_bound(
      level.begin(), level.end(), file.key_min,
      [](const SstFile& f, Key k) { return f.key_min < k; });
  level.insert(pos, std::move(file));
}

// Files of `level` overlapping [lo, hi].
std::vector<const SstFile*> Overlapping(const std::vector<SstFile>& level,
                                        Key lo, Key hi) {
  std::vector<const SstFile*> out;
  for (const auto& f : level) {
    if (f.Overlaps(lo, hi)) out.push_back(&f);
  }
  return out;
}

Bytes SumBytes(const std::vector<const SstFile*>& files) {
  Bytes total = 0;
  for (const auto* f : files) total += f->size;
  return total;
}

bool AnyBusy(const std::vector<const SstFile*>& files) {
  return std::any_of(files.begin(), files.end(),
                     [](const SstFile* f) { return f->being_compacted; });
}

void SealFullMemtables(LsmState& state, const TuningConfig& config) {
  const Bytes wbs = config.write_buffer_size;
  while (state.memtable_bytes >= wbs &&
         state.immutable_memtables() < config.max_write_buffer_number) {
    Memtable m;
    m.bytes = wbs;
    m.entries = std::max<std::uint64_t>(1, wbs / state.entry_bytes);
    m.entries = std::min(m.entries, std::max<std::uint64_t>(
                                        1, state.memtable_entries));
    state.memtable_entries -= std::min(state.memtable_entries, m.entries);
    state.memtable_bytes -= wbs;
    state.immutables.push_back(std::move(m));
  }
}

// Splits [lo, hi] into contiguous ranges whose widths follow `sizes`.
std::vector<std::pair<Key, Key>> SplitRange(Key lo, Key hi,
                                            const std::vector<Bytes>& sizes) {
  const std::uint64_t span = static_cast<std::uint64_t>(hi) - lo + 1;
  const std::size_t n = sizes.size();
  Bytes total = 0;
  for (Bytes s : sizes) total += s;
  std::vector<std::pair<Key, Key>> out;
  out.reserve(n);
  std::uint64_t start = lo;
  Bytes cum = 0;
  for (std::size_t i = 0; i < n; ++i) {
    cum += sizes[i];
    std::uint64_t end;  // exclusive
    if (i + 1 == n) {
      end = static_cast<std::uint64_t>(hi) + 1;
    } else {
      auto frac = static_cast<unsigned __int128>(span) * cum / total;
      end = lo + static_cast<std::uint64_t>(frac);
      const std::uint64_t remaining = n - i - 1;
      end = std::max(end, start + 1);
      end = std::min(end, static_cast<std::uint64_t>(hi) + 1 - remaining);
    }
    out.emplace_back(static_cast<Key>(start), static_cast<Key>(end - 1));
    start = end;
  }
  return out;
}

}  // namespace

Bytes LsmState::LevelBytes(int level) const {
  Bytes total = 0;
  for (const auto& f : levels[level]) total += f.size;
  return total;
}

Bytes LsmState::OnDiskBytes() const {
  Bytes total = 0;
  for (int l = 0; l < static_cast<int>(levels.size()); ++l) {
    total += LevelBytes(l);
  }
  return total;
}

std::uint64_t AcceptWrites(LsmState& state, const TuningConfig& config,
                           std::uint64_t entries) {
  SealFullMemtables(state, config);
  const Bytes wbs = config.write_buffer_size;
  const auto free_slots = static_cast<Bytes>(
      std::max(0, config.max_write_buffer_number - state.immutable_memtables()));
  const Bytes active_room =
      state.memtable_bytes >= wbs ? 0 : wbs - state.memtable_bytes;
  const Bytes capacity = free_slots * wbs + active_room;
  const std::uint64_t accepted =
      std::min<std::uint64_t>(entries, capacity / state.entry_bytes);
  state.memtable_bytes += accepted * state.entry_bytes;
  state.memtable_entries += accepted;
  SealFullMemtables(state, config);
  return accepted;
}

const SstFile& Flush(LsmState& state, const TuningConfig& config) {
  (void)config;
  if (state.immutables.empty()) {
    throw std::logic_error("flush requires an immutable memtable");
  }
  Memtable mem = std::move(state.immutables.front());
  state.immutables.pop_front();

  SstFile file;
  file.id = state.next_file_id++;
  file.level = 0;
  file.seq = state.next_seq++;
  if (!mem.keys.empty()) {
    std::sort(mem.keys.begin(), mem.keys.end());
    mem.keys.erase(std::unique(mem.keys.begin(), mem.keys.end()),
                   mem.keys.end());
    file.keys = std::move(mem.keys);
    file.key_min = file.keys.front();
    file.key_max = file.keys.back();
    file.size = file.keys.size() * state.entry_bytes;
  } else {
    auto [lo, hi] = DrawKeyRange(state.rng, state.key_space, mem.entries);
    file.key_min = lo;
    file.key_max = hi;
    file.size = mem.bytes;
    state.entries_persisted += mem.entries;
  }

  state.logical_written += mem.bytes;
  state.physical_written += file.size;
  state.flushed_bytes += file.size;
  state.levels[0].push_back(std::move(file));
  RefreshLiveBytes(state);
  return state.levels[0].back();
}

namespace {

std::optional<CompactionTask> PickL0(const LsmState& state) {
  // L0 -> L1 takes every L0 file, so it cannot start while any of them is
  // already being compacted.
  const auto& l0 = state.levels[0];
  if (l0.empty()) return std::nullopt;
  Key lo = l0.front().key_min;
  Key hi = l0.front().key_max;
  for (const auto& f : l0) {
    if (f.being_compacted) return std::nullopt;
    lo = std::min(lo, f.key_min);
    hi = std::max(hi, f.key_max);
  }
  auto l1 = Overlapping(state.levels[1], lo, hi);
  if (AnyBusy(l1)) return std::nullopt;
  CompactionTask task;
  task.input_level = 0;
  task.output_level = 1;
  task.key_lo = lo;
  task.key_hi = hi;
  for (const auto& f : l0) {
    task.input_ids.push_back(f.id);
    task.input_bytes += f.size;
  }
  for (const auto* f : l1) {
    task.input_ids.push_back(f->id);
    task.input_bytes += f->size;
  }
  return task;
}

std::optional<CompactionTask> PickFromLevel(const LsmState& state,
                                            const TuningConfig& config,
                                            int level) {
  const auto& files = state.levels[level];
  const auto& next = state.levels[level + 1];
  const CompactionPri pri = EffectiveCompactionPri(config);

  std::size_t chosen = files.size();
  Bytes chosen_overlap = 0;
  for (std::size_t i = 0; i < files.size(); ++i) {
    const auto& f = files[i];
    if (f.being_compacted) continue;
    auto over = Overlapping(next, f.key_min, f.key_max);
    if (AnyBusy(over)) continue;
    const Bytes overlap = SumBytes(over);
    if (chosen == files.size()) {
      chosen = i;
      chosen_overlap = overlap;
      continue;
    }
    const auto& c = files[chosen];
    bool better = false;
    bool tie = false;
    switch (pri) {
      case CompactionPri::kMinOverlappingRatio: {
        const auto lhs = static_cast<unsigned __int128>(overlap) * c.size;
        const auto rhs = static_cast<unsigned __int128>(chosen_overlap) * f.size;
        better = lhs < rhs;
        tie = lhs == rhs;
        break;
      }
      case CompactionPri::kOldestLargestSeqFirst:
        better = f.seq < c.seq;
        tie = f.seq == c.seq;
        break;
      case CompactionPri::kByCompensatedSize:
        better = f.size > c.size;
        tie = f.size == c.size;
        break;
    }
    if (better || (tie && f.id < c.id)) {
      chosen = i;
      chosen_overlap = overlap;
    }
  }
  if (chosen == files.size()) return std::nullopt;

  // Grow the input with key-order successors while the level still has
  // excess bytes to shed and the job stays within max_compaction_bytes.
  const Bytes level_bytes = state.LevelBytes(level);
  const Bytes target = LevelTargetSize(config, level);
  const Bytes excess = level_bytes > target ? level_bytes - target : 0;
  const Bytes budget = EffectiveMaxCompactionBytes(config);

  std::size_t last = chosen;
  Bytes input_bytes = files[chosen].size;
  while (input_bytes < excess && last + 1 < files.size()) {
    const auto& cand = files[last + 1];
    if (cand.being_compacted) break;
    auto over = Overlapping(next, files[chosen].key_min, cand.key_max);
    if (AnyBusy(over)) break;
    if (input_bytes + cand.size + SumBytes(over) > budget) break;
    input_bytes += cand.size;
    ++last;
  }

  CompactionTask task;
  task.input_level = level;
  task.output_level = level + 1;
  task.key_lo = files[chosen].key_min;
  task.key_hi = files[last].key_max;
  for (std::size_t i = chosen; i <= last; ++i) {
    task.input_ids.push_back(files[i].id);
    task.input_bytes += files[i].size;
  }
  for (const auto* f : Overlapping(next, task.key_lo, task.key_hi)) {
    task.input_ids.push_back(f->id);
    task.input_bytes += f->size;
  }
  return task;
}

}  // namespace

std::vector<std::pair<int, double>> CompactionScores(
    const LsmState& state, const TuningConfig& config) {
  std::vector<std::pair<int, double>> scores;
  const int l0 = state.l0_count();
  if (l0 >= config.level0_file_num_compaction_trigger) {
    scores.emplace_back(0, static_cast<double>(l0) /
                               config.level0_file_num_compaction_trigger);
  }
  // The last level never compacts.
  for (int level = 1; level + 1 < kNumLevels; ++level) {
    Bytes idle = 0;
    for (const auto& f : state.levels[level]) {
      if (!f.being_compacted) idle += f.size;
    }
    const double score = static_cast<double>(idle) /
                         static_cast<double>(LevelTargetSize(config, level));
    if (score > 1.0) scores.emplace_back(level, score);
  }
  // Highest score first; equal scores go to the lower level.
  std::stable_sort(scores.begin(), scores.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  return scores;
}

std::optional<CompactionTask> PickCompaction(const LsmState& state,
                                             const TuningConfig& config) {
  for (const auto& [level, score] : CompactionScores(state, config)) {
    auto task = level == 0 ? PickL0(state) : PickFromLevel(state, config, level);
    if (task) return task;
  }
  return std::nullopt;
}

CompactionStats ApplyCompaction(LsmState& state, const CompactionTask& task,
                                const TuningConfig& config,
                                double obsolete_fraction) {
  if (task.output_level != task.input_level + 1 || task.output_level < 1 ||
      task.output_level >= kNumLevels) {
    throw std::invalid_argument("compaction task has invalid levels");
  }
  if (task.input_ids.empty()) {
    throw std::invalid_argument("compaction task has no inputs");
  }
  auto& in_level = state.levels[task.input_level];
  auto& out_level = state.levels[task.output_level];

  std::vector<SstFile> inputs;
  for (std::uint64_t id : task.input_ids) {
    auto it = FindById(in_level, id);
    if (it != in_level.end()) continue;
    if (FindById(out_level, id) == out_level.end()) {
      throw StaleTaskError("compaction input file " + std::to_string(id) +
                           " no longer exists");
    }
  }
  for (std::uint64_t id : task.input_ids) {
    auto& level = FindById(in_level, id) != in_level.end() ? in_level
                                                           : out_level;
    auto it = FindById(level, id);
    inputs.push_back(std::move(*it));
    level.erase(it);
  }

  const bool tracked = std::all_of(inputs.begin(), inputs.end(),
                                   [](const SstFile& f) { return f.tracked(); });
  const bool any_tracked = std::any_of(
      inputs.begin(), inputs.end(), [](const SstFile& f) { return f.tracked(); });
  if (any_tracked && !tracked) {
    throw std::invalid_argument("cannot merge key-tracked and untracked files");
  }

  CompactionStats stats;
  Key lo = inputs.front().key_min;
  Key hi = inputs.front().key_max;
  for (const auto& f : inputs) {
    stats.input_bytes += f.size;
    lo = std::min(lo, f.key_min);
    hi = std::max(hi, f.key_max);
  }

  const Bytes max_file = TargetFileSize(config, task.output_level);
  std::vector<SstFile> outputs;
  if (tracked) {
    std::vector<Key> merged;
    for (const auto& f : inputs) {
      merged.insert(merged.end(), f.keys.begin(), f.keys.end());
    }
    std::sort(merged.begin(), merged.end());
    merged.erase(std::unique(merged.begin(), merged.end()), merged.end());
    stats.output_bytes = merged.size() * state.entry_bytes;
    const std::size_t per_file =
        std::max<std::size_t>(1, max_file / state.entry_bytes);
    for (std::size_t i = 0; i < merged.size(); i += per_file) {
      SstFile out;
      const std::size_t end = std::min(merged.size(), i + per_file);
      out.keys.assign(merged.begin() + static_cast<std::ptrdiff_t>(i),
                      merged.begin() + static_cast<std::ptrdiff_t>(end));
      out.key_min = out.keys.front();
      out.key_max = out.keys.back();
      out.size = out.keys.size() * state.entry_bytes;
      outputs.push_back(std::move(out));
    }
  } else {
    const double f = std::clamp(obsolete_fraction, 0.0, 1.0);
    const auto drop = static_cast<Bytes>(
        std::llround(static_cast<long double>(stats.input_bytes) * f));
    stats.output_bytes = stats.input_bytes - std::min(drop, stats.input_bytes);
    if (stats.output_bytes > 0) {
      std::vector<Bytes> sizes;
      for (Bytes left = stats.output_bytes; left > 0;) {
        const Bytes s = std::min(left, max_file);
        sizes.push_back(s);
        left -= s;
      }
      // A key range narrower than the file count cannot be cut into
      // disjoint pieces; fold the surplus into the last file.
      const std::uint64_t span = static_cast<std::uint64_t>(hi) - lo + 1;
      while (sizes.size() > span) {
        Bytes tail = sizes.back();
        sizes.pop_back();
        sizes.back() += tail;
      }
      for (auto [a, b] : SplitRange(lo, hi, sizes)) {
        SstFile out;
        out.key_min = a;
        out.key_max = b;
        outputs.push_back(std::move(out));
      }
      for (std::size_t i = 0; i < sizes.size(); ++i) outputs[i].size = sizes[i];
    }
  }
  stats.discarded = stats.input_bytes - stats.output_bytes;
  stats.output_files = static_cast<int>(outputs.size());

  for (auto& out : outputs) {
    out.id = state.next_file_id++;
    out.seq = state.next_seq++;
    out.level = task.output_level;
    InsertSorted(out_level, std::move(out));
  }

  state.discarded += stats.discarded;
  state.physical_written += stats.output_bytes;
  state.compaction_output_bytes += stats.output_bytes;
  RefreshLiveBytes(state);
  return stats;
}

AmpMetrics Amplification(const LsmState& state) {
  AmpMetrics m;
  m.write_amp = static_cast<double>(state.physical_written) /
                static_cast<double>(std::max<Bytes>(state.logical_written, 1));
  int nonempty = 0;
  for (int l = 1; l < static_cast<int>(state.levels.size()); ++l) {
    if (!state.levels[l].empty()) ++nonempty;
  }
  m.read_amp = static_cast<double>(state.l0_count() + nonempty);
  const Bytes on_disk = state.OnDiskBytes();
  m.space_amp = on_disk == 0
                    ? 1.0
                    : static_cast<double>(on_disk) /
                          static_cast<double>(
                              std::max<Bytes>(state.logical_live, 1));
  m.stall_seconds = state.stall_seconds;
  m.stopped_seconds = state.stopped_seconds;
  m.achieved_ops_rate = state.clock > 0
                            ? static_cast<double>(state.ops_completed) /
                                  state.clock
                            : 0.0;
  return m;
}

void Preload(LsmState& state, const TuningConfig& config, Bytes bytes) {
  if (bytes == 0) return;
  // Deepest level needed to hold everything, then fill bottom-up so the
  // tree looks settled (every level at or below its target).
  int deepest = 1;
  Bytes capacity = LevelTargetSize(config, 1);
  while (capacity < bytes && deepest + 1 < kNumLevels) {
    ++deepest;
    capacity += LevelTargetSize(config, deepest);
  }
  Bytes left = bytes;
  for (int level = deepest; level >= 1 && left > 0; --level) {
    const Bytes here = level == 1 ? left
                                  : std::min(left, LevelTargetSize(config, level));
    left -= here;
    std::vector<Bytes> sizes;
    const Bytes max_file = TargetFileSize(config, level);
    for (Bytes rest = here; rest > 0;) {
      const Bytes s = std::min(rest, max_file);
      sizes.push_back(s);
      rest -= s;
    }
    auto ranges = SplitRange(0, state.key_space - 1, sizes);
    for (std::size_t i = 0; i < sizes.size(); ++i) {
      SstFile f;
      f.id = state.next_file_id++;
      f.seq = state.next_seq++;
      f.level = level;
      f.size = sizes[i];
      f.key_min = ranges[i].first;
      f.key_max = ranges[i].second;
      InsertSorted(state.levels[level], std::move(f));
    }
  }
  state.preloaded_bytes += bytes;
  state.preload_entries =
      std::min<std::uint64_t>(state.key_space,
                              state.preload_entries + bytes / state.entry_bytes);
  RefreshLiveBytes(state);
}

void RefreshLiveBytes(LsmState& state) {
  const Bytes on_disk = state.OnDiskBytes();
  bool all_tracked = on_disk > 0;
  for (const auto& level : state.levels) {
    for (const auto& f : level) {
      if (!f.tracked()) all_tracked = false;
    }
  }
  if (all_tracked) {
    std::unordered_set<Key> live;
    for (const auto& level : state.levels) {
      for (const auto& f : level) live.insert(f.keys.begin(), f.keys.end());
    }
    state.logical_live = live.size() * state.entry_bytes;
    return;
  }
  // Distinct keys after n uniform writes on top of P preloaded keys:
  // K - (K - P) * (1 - 1/K)^n.
  const double k = static_cast<double>(state.key_space);
  const double p = static_cast<double>(
      std::min<std::uint64_t>(state.preload_entries, state.key_space));
  const double n = static_cast<double>(state.entries_persisted);
  const double distinct = k - (k - p) * std::exp(n * std::log1p(-1.0 / k));
  const auto estimate = static_cast<Bytes>(
      std::floor(distinct * static_cast<double>(state.entry_bytes)));
  state.logical_live = std::min(on_disk, estimate);
}

std::vector<std::string> StateViolations(const LsmState& state) {
  std::vector<std::string> out;
  const Bytes on_disk = state.OnDiskBytes();
  if (state.flushed_bytes + state.preloaded_bytes != on_disk + state.discarded) {
    out.push_back("byte conservation: flushed " +
                  std::to_string(state.flushed_bytes) + " + preloaded " +
                  std::to_string(state.preloaded_bytes) + " != on-disk " +
                  std::to_string(on_disk) + " + discarded " +
                  std::to_string(state.discarded));
  }
  if (state.physical_written !=
      state.flushed_bytes + state.compaction_output_bytes) {
    out.push_back("physical_written does not match flush + compaction output");
  }
  std::set<std::uint64_t> ids;
  for (int l = 0; l < static_cast<int>(state.levels.size()); ++l) {
    const auto& files = state.levels[l];
    for (std::size_t i = 0; i < files.size(); ++i) {
      const auto& f = files[i];
      const std::string where =
          "L" + std::to_string(l) + " file " + std::to_string(f.id);
      if (f.level != l) out.push_back(where + ": wrong level tag");
      if (f.size == 0) out.push_back(where + ": empty");
      if (f.key_min > f.key_max) out.push_back(where + ": inverted key range");
      if (f.seq >= state.next_seq) out.push_back(where + ": seq from future");
      if (!ids.insert(f.id).second) out.push_back(where + ": duplicate id");
      if (f.tracked() && f.size != f.keys.size() * state.entry_bytes) {
        out.push_back(where + ": size disagrees with key count");
      }
      if (l >= 1 && i > 0 && files[i - 1].key_max >= f.key_min) {
        out.push_back(where + ": overlaps its predecessor");
      }
    }
  }
  return out;
}

}  // namespace lsmtune

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "lsmtune/config.h"
#include "lsmtune/lsm_state.h"

namespace lsmtune {

enum class WorkloadKind { kFillRandom, kReadRandom, kMix };

std::string_view WorkloadKindName(WorkloadKind kind);
std::optional<WorkloadKind> ParseWorkloadKind(std::string_view name);

struct WorkloadSpec {
  WorkloadKind kind = WorkloadKind::kFillRandom;
  double duration = 60.0;  // simulated seconds
  Bytes value_size = 1024;
  // Only consulted for kMix; fillrandom is all writes, readrandom all reads.
  double write_fraction = 0.5;
  double offered_ops_rate = 100000.0;
  Key key_space = Key{1} << 22;
  std::uint64_t seed = 1;
  // Bytes bulk-loaded before the run (db_bench runs readrandom against an
  // existing database).
  Bytes preload_bytes = 0;

  double EffectiveWriteFraction() const;
};

// Stock duration and preload for each db_bench-style workload.
WorkloadSpec MakeWorkload(WorkloadKind kind, double duration = 60.0,
                          std::uint64_t seed = 1);

// One aggregate bandwidth budget shared equally by every active consumer
// (foreground reads, each flush, each compaction), each of which is also
// capped by its own per-thread rate. An L0->L1 job additionally borrows
// every idle compaction slot as a subcompaction.
struct DeviceModel {
  double bandwidth = 600.0 * kMiB;         // bytes/s, whole device
  double worker_bandwidth = 150.0 * kMiB;  // bytes/s, one compaction thread
  double flush_bandwidth = 300.0 * kMiB;   // bytes/s, one flush thread
  double compaction_setup_seconds = 0.02;
  double slowdown_factor = 0.5;
  Bytes read_block_bytes = 4 * kKiB;
  // Relative compaction speedup at >= 2 MiB readahead.
  double readahead_gain = 0.1;
  double obsolete_fraction = 0.1;
  double obsolete_jitter = 0.0;  // uniform +/- around obsolete_fraction
  double tick_seconds = 0.01;

  // Background bandwidth too low for the default single compaction thread
  // to keep L0 under the stop trigger at the default offered rate.
  static DeviceModel StallProne();
};

struct StepMetrics {
  std::uint64_t writes_accepted = 0;
  std::uint64_t reads_completed = 0;
  double stall_seconds = 0.0;
  double stopped_seconds = 0.0;
  Bytes bytes_compacted = 0;
  int flushes = 0;
  int compactions = 0;
  WriteState write_state = WriteState::kNormal;  // at the end of the step
};

struct StallInterval {
  double start = 0.0;
  double end = 0.0;
  WriteState state = WriteState::kNormal;

  bool operator==(const StallInterval&) const = default;
};

struct RunResult {
  std::vector<double> throughput;  // ops completed in each simulated second
  AmpMetrics amp;
  std::vector<StallInterval> stalls;
  Bytes logical_written = 0;
  Bytes physical_written = 0;
  double cpu_util = 0.0;  // mean running compactions / max_background_jobs
  double mem_util = 0.0;  // mean memtable bytes / memtable budget
  std::vector<int> level_files;

  bool operator==(const RunResult&) const = default;
};

// Deterministic engine model: one logical thread advancing a fixed tick.
class Simulator {
 public:
  Simulator(TuningConfig config, WorkloadSpec workload, DeviceModel device);

  StepMetrics Step(double dt);

  const LsmState& state() const { return state_; }
  LsmState& mutable_state() { return state_; }
  const TuningConfig& config() const { return config_; }
  int running_compactions() const;
  int running_flushes() const;
  double busy_compaction_seconds() const { return busy_compaction_seconds_; }
  double memtable_fill_seconds() const { return memtable_fill_seconds_; }

 private:
  struct Job {
    bool is_flush = false;
    CompactionTask task;
    double obsolete_fraction = 0.0;
    double setup_left = 0.0;
    double work_left = 0.0;  // bytes of read + write I/O
  };

  void Schedule();
  void Tick(double h, StepMetrics& metrics);
  int CompactionSlots() const;
  int FlushSlots() const;
  double DrawObsoleteFraction();

  TuningConfig config_;
  WorkloadSpec workload_;
  DeviceModel device_;
  LsmState state_;
  std::vector<Job> jobs_;
  double write_credit_ = 0.0;
  double read_credit_ = 0.0;
  double busy_compaction_seconds_ = 0.0;
  double memtable_fill_seconds_ = 0.0;
};

// Fresh tree, stepped one simulated second at a time for the whole
// duration. A pure function of its arguments.
RunResult RunWorkload(const TuningConfig& config, const WorkloadSpec& workload,
                      const DeviceModel& device);

}  // namespace lsmtune

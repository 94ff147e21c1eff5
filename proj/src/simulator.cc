#include "lsmtune/simulator.h"

#include <algorithm>
#include <cmath>
#include <limits>

namespace lsmtune {

namespace {

double Uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

int ReadAmp(const LsmState& state) {
  int probes = state.l0_count();
  for (int l = 1; l < kNumLevels; ++l) {
    if (!state.levels[l].empty()) ++probes;
  }
  return probes;
}

// Equal-share allocation of `budget` among consumers capped at `demand`:
// consumers asking for less than the fair share keep only what they ask
// for and the rest is split among the others.
std::vector<double> WaterFill(const std::vector<double>& demand,
                              double budget) {
  std::vector<std::size_t> order(demand.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return demand[a] < demand[b];
  });
  std::vector<double> alloc(demand.size(), 0.0);
  double left = budget;
  for (std::size_t k = 0; k < order.size(); ++k) {
    const double share = left / static_cast<double>(order.size() - k);
    const double give = std::min(demand[order[k]], share);
    alloc[order[k]] = give;
    left -= give;
  }
  return alloc;
}

}  // namespace

std::string_view WorkloadKindName(WorkloadKind kind) {
  switch (kind) {
    case WorkloadKind::kFillRandom:
      return "fillrandom";
    case WorkloadKind::kReadRandom:
      return "readrandom";
    case WorkloadKind::kMix:
      return "mix";
  }
  return "fillrandom";
}

std::optional<WorkloadKind> ParseWorkloadKind(std::string_view name) {
  if (name == "fillrandom") return WorkloadKind::kFillRandom;
  if (name == "readrandom") return WorkloadKind::kReadRandom;
  if (name == "mix") return WorkloadKind::kMix;
  return std::nullopt;
}

double WorkloadSpec::EffectiveWriteFraction() const {
  switch (kind) {
    case WorkloadKind::kFillRandom:
      return 1.0;
    case WorkloadKind::kReadRandom:
      return 0.0;
    case WorkloadKind::kMix:
      return std::clamp(write_fraction, 0.0, 1.0);
  }
  return 1.0;
}

WorkloadSpec MakeWorkload(WorkloadKind kind, double duration,
                          std::uint64_t seed) {
  WorkloadSpec w;
  w.kind = kind;
  w.duration = duration;
  w.seed = seed;
  if (kind != WorkloadKind::kFillRandom) w.preload_bytes = kGiB;
  return w;
}

DeviceModel DeviceModel::StallProne() {
  DeviceModel d;
  d.bandwidth = 300.0 * kMiB;
  d.worker_bandwidth = 80.0 * kMiB;
  d.flush_bandwidth = 150.0 * kMiB;
  return d;
}

Simulator::Simulator(TuningConfig config, WorkloadSpec workload,
                     DeviceModel device)
    : config_(std::move(config)),
      workload_(std::move(workload)),
      device_(device) {
  state_.key_space = std::clamp<Key>(workload_.key_space, 1, kMaxKeySpace);
  state_.entry_bytes = std::max<Bytes>(1, workload_.value_size);
  state_.rng.seed(workload_.seed);
  Preload(state_, config_, workload_.preload_bytes);
}

int Simulator::CompactionSlots() const {
  return std::max(1, std::min(config_.max_background_compactions,
                              config_.max_background_jobs));
}

int Simulator::FlushSlots() const {
  return std::max(1, config_.max_background_jobs - CompactionSlots());
}

int Simulator::running_compactions() const {
  return static_cast<int>(std::count_if(jobs_.begin(), jobs_.end(),
                                        [](const Job& j) { return !j.is_flush; }));
}

int Simulator::running_flushes() const {
  return static_cast<int>(jobs_.size()) - running_compactions();
}

double Simulator::DrawObsoleteFraction() {
  double f = device_.obsolete_fraction;
  if (device_.obsolete_jitter > 0) {
    f += device_.obsolete_jitter * (2.0 * Uniform01(state_.rng) - 1.0);
  }
  return std::clamp(f, 0.0, 1.0);
}

void Simulator::Schedule() {
  // Flush jobs map one-to-one onto the oldest immutable memtables.
  while (running_flushes() < FlushSlots() &&
         running_flushes() < state_.immutable_memtables()) {
    Job job;
    job.is_flush = true;
    job.work_left = static_cast<double>(
        state_.immutables[static_cast<std::size_t>(running_flushes())].bytes);
    jobs_.push_back(std::move(job));
  }
  while (running_compactions() < CompactionSlots()) {
    auto task = PickCompaction(state_, config_);
    if (!task) break;
    for (auto& level : {task->input_level, task->output_level}) {
      for (auto& f : state_.levels[level]) {
        if (std::find(task->input_ids.begin(), task->input_ids.end(), f.id) !=
            task->input_ids.end()) {
          f.being_compacted = true;
        }
      }
    }
    Job job;
    job.obsolete_fraction = DrawObsoleteFraction();
    job.setup_left = device_.compaction_setup_seconds;
    const double in = static_cast<double>(task->input_bytes);
    job.work_left = in + in * (1.0 - job.obsolete_fraction);
    job.task = std::move(*task);
    jobs_.push_back(std::move(job));
  }
}

void Simulator::Tick(double h, StepMetrics& metrics) {
  Schedule();

  const double wf = workload_.EffectiveWriteFraction();
  const WriteState ws = WriteStateFor(config_, state_.l0_count());

  // Bandwidth: slot 0 is the foreground, then one slot per job.
  const double read_rate = workload_.offered_ops_rate * (1.0 - wf);
  const double read_cost =
      static_cast<double>(ReadAmp(state_)) *
      static_cast<double>(device_.read_block_bytes);
  const double readahead = std::min(
      1.0, static_cast<double>(config_.compaction_readahead_size) / (2.0 * kMiB));
  const int idle_slots = CompactionSlots() - running_compactions();
  int busy_workers = 0;
  std::vector<double> demand;
  demand.push_back(read_rate * read_cost);
  for (const auto& job : jobs_) {
    if (job.is_flush) {
      demand.push_back(device_.flush_bandwidth);
      continue;
    }
    const int workers = 1 + (job.task.input_level == 0 ? idle_slots : 0);
    busy_workers += workers;
    if (job.setup_left > 0) {
      demand.push_back(0.0);
    } else {
      demand.push_back(device_.worker_bandwidth * workers *
                       (1.0 + device_.readahead_gain * readahead));
    }
  }
  const auto alloc = WaterFill(demand, device_.bandwidth);

  // Foreground reads.
  if (read_rate > 0) {
    const double want = read_credit_ + read_rate * h;
    const double can = read_cost > 0 ? alloc[0] * h / read_cost
                                     : std::numeric_limits<double>::infinity();
    const double served = std::floor(std::min(want, can));
    read_credit_ = std::min(want - served, 1.0);
    metrics.reads_completed += static_cast<std::uint64_t>(served);
    state_.ops_completed += static_cast<std::uint64_t>(served);
  }

  // Foreground writes, throttled by the L0 stall state and by memtable
  // capacity.
  if (wf > 0) {
    double factor = 1.0;
    if (ws == WriteState::kSlowdown) {
      factor = device_.slowdown_factor;
      state_.stall_seconds += h;
      metrics.stall_seconds += h;
    } else if (ws == WriteState::kStopped) {
      factor = 0.0;
      state_.stopped_seconds += h;
      metrics.stopped_seconds += h;
    }
    const double want =
        write_credit_ + workload_.offered_ops_rate * wf * h * factor;
    const auto entries = static_cast<std::uint64_t>(std::floor(want));
    const std::uint64_t accepted = AcceptWrites(state_, config_, entries);
    write_credit_ = std::min(want - static_cast<double>(accepted), 1.0);
    if (accepted < entries && ws != WriteState::kStopped) {
      const double blocked =
          h * (1.0 - static_cast<double>(accepted) / static_cast<double>(entries));
      state_.stopped_seconds += blocked;
      metrics.stopped_seconds += blocked;
    }
    metrics.writes_accepted += accepted;
    state_.ops_completed += accepted;
  }

  // Background progress; completions apply in start order.
  for (std::size_t i = 0; i < jobs_.size(); ++i) {
    auto& job = jobs_[i];
    if (job.setup_left > 0) {
      job.setup_left -= h;
    } else {
      job.work_left -= alloc[i + 1] * h;
    }
  }
  busy_compaction_seconds_ += static_cast<double>(busy_workers) * h;
  std::vector<Job> still_running;
  bool flush_blocked = false;
  for (auto& job : jobs_) {
    const bool done = job.setup_left <= 0 && job.work_left <= 0;
    if (job.is_flush) {
      if (done && !flush_blocked) {
        Flush(state_, config_);
        ++metrics.flushes;
        continue;
      }
      flush_blocked = true;
    } else if (done) {
      const auto stats =
          ApplyCompaction(state_, job.task, config_, job.obsolete_fraction);
      metrics.bytes_compacted += stats.output_bytes;
      ++metrics.compactions;
      continue;
    }
    still_running.push_back(std::move(job));
  }
  jobs_ = std::move(still_running);

  const double budget = static_cast<double>(config_.write_buffer_size) *
                        (config_.max_write_buffer_number + 1);
  memtable_fill_seconds_ +=
      h * (static_cast<double>(state_.memtable_bytes) +
           static_cast<double>(state_.immutable_memtables()) *
               static_cast<double>(config_.write_buffer_size)) /
      budget;
  state_.clock += h;
}

StepMetrics Simulator::Step(double dt) {
  StepMetrics metrics;
  if (dt <= 0) return metrics;
  const auto ticks = std::max<long long>(1, std::llround(dt / device_.tick_seconds));
  const double h = dt / static_cast<double>(ticks);
  for (long long t = 0; t < ticks; ++t) Tick(h, metrics);
  metrics.write_state = WriteStateFor(config_, state_.l0_count());
  return metrics;
}

RunResult RunWorkload(const TuningConfig& config, const WorkloadSpec& workload,
                      const DeviceModel& device) {
  Simulator sim(config, workload, device);
  RunResult result;
  const auto seconds =
      static_cast<long long>(std::ceil(std::max(0.0, workload.duration)));
  for (long long s = 0; s < seconds; ++s) {
    const double t0 = static_cast<double>(s);
    const double dt = std::min(1.0, workload.duration - t0);
    const StepMetrics m = sim.Step(dt);
    result.throughput.push_back(
        static_cast<double>(m.writes_accepted + m.reads_completed) / dt);
    WriteState kind = WriteState::kNormal;
    if (m.stopped_seconds > 0) {
      kind = WriteState::kStopped;
    } else if (m.stall_seconds > 0) {
      kind = WriteState::kSlowdown;
    }
    if (kind != WriteState::kNormal) {
      if (!result.stalls.empty() && result.stalls.back().state == kind &&
          result.stalls.back().end == t0) {
        result.stalls.back().end = t0 + dt;
      } else {
        result.stalls.push_back({t0, t0 + dt, kind});
      }
    }
  }
  const auto& state = sim.state();
  result.amp = Amplification(state);
  result.logical_written = state.logical_written;
  result.physical_written = state.physical_written;
  if (state.clock > 0) {
    result.cpu_util = sim.busy_compaction_seconds() / state.clock /
                      std::max(1, config.max_background_jobs);
    result.mem_util = sim.memtable_fill_seconds() / state.clock;
  }
  for (const auto& level : state.levels) {
    result.level_files.push_back(static_cast<int>(level.size()));
  }
  return result;
}

}  // namespace lsmtune

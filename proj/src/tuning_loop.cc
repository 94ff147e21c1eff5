#include "lsmtune/tuning_loop.h"

#include <numeric>
#include <stdexcept>

#include "lsmtune/options.h"

namespace lsmtune {

using json = nlohmann::json;

std::string_view AcceptPolicyName(AcceptPolicy policy) {
  return policy == AcceptPolicy::kAlwaysApply ? "AlwaysApply" : "GreedyRevert";
}

std::optional<AcceptPolicy> ParseAcceptPolicy(std::string_view name) {
  if (name == "always" || name == "AlwaysApply") return AcceptPolicy::kAlwaysApply;
  if (name == "greedy" || name == "GreedyRevert") return AcceptPolicy::kGreedyRevert;
  return std::nullopt;
}

std::string_view DecisionName(Decision decision) {
  switch (decision) {
    case Decision::kApplied:
      return "Applied";
    case Decision::kReverted:
      return "Reverted";
    case Decision::kFallbackBaseline:
      return "FallbackBaseline";
  }
  return "Applied";
}

std::optional<Decision> ParseDecision(std::string_view name) {
  for (auto d : {Decision::kApplied, Decision::kReverted, Decision::kFallbackBaseline}) {
    if (DecisionName(d) == name) return d;
  }
  return std::nullopt;
}

std::optional<DeviceModel> DevicePreset(std::string_view name) {
  if (name == "default") return DeviceModel{};
  if (name == "stall-prone") return DeviceModel::StallProne();
  return std::nullopt;
}

std::string DescribeDevice(std::string_view name, const DeviceModel& device) {
  auto mib = [](double bytes) { return std::to_string(static_cast<long long>(bytes / kMiB)); };
  return "simulated storage device '" + std::string(name) + "': " +
         mib(device.bandwidth) + " MiB/s total bandwidth, " +
         mib(device.worker_bandwidth) + " MiB/s per compaction thread, " +
         mib(device.flush_bandwidth) + " MiB/s per flush thread";
}

std::vector<std::string> SpecViolations(const SessionSpec& spec) {
  std::vector<std::string> out;
  if (spec.iterations < 1) out.push_back("iterations must be >= 1");
  if (spec.retry_budget < 0) out.push_back("retry_budget must be >= 0");
  if (!(spec.epsilon >= 0.0 && spec.epsilon < 1.0)) {
    out.push_back("epsilon must be in [0, 1)");
  }
  if (!(spec.workload.duration >= 1.0)) out.push_back("duration must be >= 1 s");
  if (spec.subspace.empty()) out.push_back("subspace is empty");
  for (const auto& key : spec.subspace) {
    if (FindOption(key) == nullptr) out.push_back("unknown subspace key " + key);
  }
  for (const auto& v : ConfigViolations(spec.initial_config)) {
    out.push_back("initial config: " + v);
  }
  return out;
}

TuningContext MakeContext(const IterationRecord& prev, const SessionSpec& spec,
                          const HostStats& host_stats) {
  TuningContext c;
  c.iteration = prev.iteration;
  c.throughput = prev.throughput;
  c.cpu_util = host_stats.cpu_util;
  c.mem_util = host_stats.mem_util;
  c.utilization_is_proxy = host_stats.proxy;
  c.amp = prev.amp;
  c.active_config_text = SerializeOptions(prev.config_applied);
  c.device_info = DescribeDevice(spec.device_name, spec.device);
  c.workload_kind = spec.workload.kind;
  c.subspace = spec.subspace;
  return c;
}

namespace {

IterationRecord Benchmark(const SessionSpec& spec, const TuningConfig& config,
                          int iteration) {
  WorkloadSpec w = spec.workload;
  w.seed = spec.seed;
  // A fresh tree each time: the database reset between iterations.
  const RunResult r = RunWorkload(config, w, spec.device);
  IterationRecord rec;
  rec.iteration = iteration;
  rec.config_applied = config;
  rec.amp = r.amp;
  rec.throughput_series = r.throughput;
  rec.throughput =
      r.throughput.empty()
          ? 0.0
          : std::accumulate(r.throughput.begin(), r.throughput.end(), 0.0) /
                static_cast<double>(r.throughput.size());
  rec.host = {r.cpu_util, r.mem_util, true};
  return rec;
}

}  // namespace

SessionLog RunSession(const SessionSpec& spec, Advisor& advisor, const RecordSink& sink) {
  if (const auto v = SpecViolations(spec); !v.empty()) {
    throw std::invalid_argument("invalid session spec: " + v.front());
  }
  SessionLog log;
  log.spec = spec;
  auto emit = [&](IterationRecord rec) {
    log.records.push_back(std::move(rec));
    if (sink) sink(log.records.back());
  };

  TemperatureState temperature;
  IterationRecord first = Benchmark(spec, spec.initial_config, 0);
  first.temperature = temperature.current;
  emit(std::move(first));
  std::size_t active = 0;  // record whose config is in force

  for (int i = 1; i <= spec.iterations; ++i) {
    const IterationRecord ref = log.records[active];
    const TuningContext context = MakeContext(ref, spec, ref.host);

    std::vector<ProposalAttempt> attempts;
    std::optional<TuningConfig> chosen;
    double inference_ms = 0.0;
    double used_temperature = temperature.current;
    std::string verdict = "-";
    for (int k = 0; k <= spec.retry_budget && !chosen; ++k) {
      ProposalAttempt attempt;
      attempt.temperature = used_temperature = temperature.current;
      try {
        const AdvisorResponse response = advisor.Propose(context, temperature.current);
        attempt.latency_ms = response.latency_total_ms;
        attempt.first_token_ms = response.latency_first_token_ms;
        const GuardVerdict v =
            GuardResponse(response.raw_text, ref.config_applied, spec.subspace);
        attempt.verdict = v.Summary();
        attempt.repairs = v.repairs;
        attempt.warnings = v.warnings;
        if (v.accepted()) {
          const bool unchanged = DiffConfigs(ref.config_applied, *v.config).empty();
          temperature = NextTemperature(
              temperature, unchanged ? TemperatureEvent::kRigidity : TemperatureEvent::kSuccess);
          chosen = *v.config;
        } else {
          temperature = NextTemperature(temperature, TemperatureEvent::kFormatFailure);
        }
      } catch (const AdvisorError& e) {
        attempt.latency_ms = e.elapsed_ms();
        attempt.verdict = "Error " + std::string(e.kind());
        attempt.error = e.what();
      } catch (const std::exception& e) {
        attempt.verdict = "Error AdvisorError";
        attempt.error = e.what();
      }
      inference_ms += attempt.latency_ms;
      verdict = attempt.verdict;
      attempts.push_back(std::move(attempt));
    }

    IterationRecord rec = Benchmark(spec, chosen ? *chosen : ref.config_applied, i);
    rec.inference_ms = inference_ms;
    rec.verdict = verdict;
    rec.temperature = used_temperature;
    rec.attempts = std::move(attempts);
    if (!chosen) {
      rec.decision = Decision::kFallbackBaseline;
    } else {
      const double reference = std::max(ref.throughput, log.records[0].throughput);
      if (spec.accept_policy == AcceptPolicy::kGreedyRevert &&
          rec.throughput < reference * (1.0 - spec.epsilon)) {
        rec.decision = Decision::kReverted;
      } else {
        rec.decision = Decision::kApplied;
        active = log.records.size();
      }
    }
    emit(std::move(rec));
  }
  return log;
}

json ConfigToJson(const TuningConfig& config) {
  json j = json::object();
  for (const auto& entry : Schema()) {
    const auto value = entry.get(config);
    if (!value) continue;
    std::visit([&](const auto& v) { j[std::string(entry.key)] = v; }, *value);
  }
  return j;
}

TuningConfig ConfigFromJson(const json& j) {
  TuningConfig c = DefaultConfig();
  for (const auto& entry : Schema()) {
    if (entry.optional) entry.set(c, std::nullopt);
  }
  for (const auto& [key, value] : j.items()) {
    const auto* entry = FindOption(key);
    if (entry == nullptr) throw std::invalid_argument("unknown option " + key);
    OptionValue v;
    if (value.is_boolean()) {
      v = value.get<bool>();
    } else if (value.is_number_integer()) {
      v = value.get<std::int64_t>();
    } else if (value.is_string()) {
      v = value.get<std::string>();
    } else {
      throw std::invalid_argument("bad value for " + key);
    }
    if (!entry->InRange(v)) throw std::invalid_argument("out of range: " + key);
    entry->set(c, v);
  }
  return c;
}

json SpecToJson(const SessionSpec& spec) {
  const auto& w = spec.workload;
  const auto& d = spec.device;
  return {
      {"iterations", spec.iterations},
      {"backend", spec.backend},
      {"subspace", spec.subspace},
      {"accept_policy", AcceptPolicyName(spec.accept_policy)},
      {"retry_budget", spec.retry_budget},
      {"epsilon", spec.epsilon},
      {"seed", spec.seed},
      {"initial_config", ConfigToJson(spec.initial_config)},
      {"workload",
       {{"kind", WorkloadKindName(w.kind)},
        {"duration", w.duration},
        {"value_size", w.value_size},
        {"write_fraction", w.EffectiveWriteFraction()},
        {"offered_ops_rate", w.offered_ops_rate},
        {"key_space", w.key_space},
        {"preload_bytes", w.preload_bytes}}},
      {"device",
       {{"name", spec.device_name},
        {"bandwidth", d.bandwidth},
        {"worker_bandwidth", d.worker_bandwidth},
        {"flush_bandwidth", d.flush_bandwidth},
        {"compaction_setup_seconds", d.compaction_setup_seconds},
        {"slowdown_factor", d.slowdown_factor},
        {"read_block_bytes", d.read_block_bytes},
        {"readahead_gain", d.readahead_gain},
        {"obsolete_fraction", d.obsolete_fraction},
        {"obsolete_jitter", d.obsolete_jitter},
        {"tick_seconds", d.tick_seconds}}},
  };
}

namespace {

json AmpToJson(const AmpMetrics& a) {
  return {{"write_amp", a.write_amp},
          {"read_amp", a.read_amp},
          {"space_amp", a.space_amp},
          {"stall_seconds", a.stall_seconds},
          {"stopped_seconds", a.stopped_seconds},
          {"achieved_ops_rate", a.achieved_ops_rate}};
}

AmpMetrics AmpFromJson(const json& j) {
  AmpMetrics a;
  a.write_amp = j.at("write_amp").get<double>();
  a.read_amp = j.at("read_amp").get<double>();
  a.space_amp = j.at("space_amp").get<double>();
  a.stall_seconds = j.at("stall_seconds").get<double>();
  a.stopped_seconds = j.at("stopped_seconds").get<double>();
  a.achieved_ops_rate = j.at("achieved_ops_rate").get<double>();
  return a;
}

}  // namespace

json RecordToJson(const IterationRecord& r) {
  json attempts = json::array();
  for (const auto& a : r.attempts) {
    json repairs = json::array();
    for (const auto& rep : a.repairs) {
      repairs.push_back({{"key", rep.key},
                         {"action", RepairActionName(rep.action)},
                         {"detail", rep.detail}});
    }
    json warnings = json::array();
    for (auto w : a.warnings) warnings.push_back(ConsistencyWarningName(w));
    json aj = {{"verdict", a.verdict},
               {"repairs", repairs},
               {"warnings", warnings},
               {"latency_ms", a.latency_ms},
               {"temperature", a.temperature}};
    if (a.first_token_ms) aj["first_token_ms"] = *a.first_token_ms;
    if (!a.error.empty()) aj["error"] = a.error;
    attempts.push_back(std::move(aj));
  }
  return {
      {"iteration", r.iteration},
      {"config_applied", ConfigToJson(r.config_applied)},
      {"throughput", r.throughput},
      {"amp", AmpToJson(r.amp)},
      {"inference_ms", r.inference_ms},
      {"verdict", r.verdict},
      {"decision", DecisionName(r.decision)},
      {"temperature", r.temperature},
      {"cpu_util", r.host.cpu_util},
      {"mem_util", r.host.mem_util},
      {"host_stats_proxy", r.host.proxy},
      {"attempts", attempts},
      {"throughput_series", r.throughput_series},
  };
}

IterationRecord RecordFromJson(const json& j) {
  IterationRecord r;
  r.iteration = j.at("iteration").get<int>();
  r.config_applied = ConfigFromJson(j.at("config_applied"));
  r.throughput = j.at("throughput").get<double>();
  r.amp = AmpFromJson(j.at("amp"));
  r.inference_ms = j.at("inference_ms").get<double>();
  r.verdict = j.at("verdict").get<std::string>();
  const auto decision = ParseDecision(j.at("decision").get<std::string>());
  if (!decision) throw std::invalid_argument("unknown decision");
  r.decision = *decision;
  r.temperature = j.at("temperature").get<double>();
  r.host = {j.at("cpu_util").get<double>(), j.at("mem_util").get<double>(),
            j.at("host_stats_proxy").get<bool>()};
  for (const auto& aj : j.at("attempts")) {
    ProposalAttempt a;
    a.verdict = aj.at("verdict").get<std::string>();
    a.latency_ms = aj.at("latency_ms").get<double>();
    a.temperature = aj.at("temperature").get<double>();
    if (aj.contains("first_token_ms")) a.first_token_ms = aj["first_token_ms"].get<double>();
    if (aj.contains("error")) a.error = aj["error"].get<std::string>();
    r.attempts.push_back(std::move(a));
  }
  r.throughput_series = j.at("throughput_series").get<std::vector<double>>();
  return r;
}

RunDirectory::RunDirectory(const std::filesystem::path& dir, const SessionSpec& spec)
    : dir_(dir) {
  std::filesystem::create_directories(dir_);
  {
    std::ofstream session(dir_ / "session.json");
    session << SpecToJson(spec).dump(2) << "\n";
    if (!session) throw std::runtime_error("cannot write " + (dir_ / "session.json").string());
  }
  log_.open(dir_ / "log.jsonl", std::ios::trunc);
  summary_.open(dir_ / "summary.csv", std::ios::trunc);
  if (!log_ || !summary_) throw std::runtime_error("cannot write to " + dir_.string());
  summary_ << "iteration,throughput,inference_ms,decision\n" << std::flush;
}

void RunDirectory::Append(const IterationRecord& record) {
  {
    std::ofstream options(dir_ / ("iter_" + std::to_string(record.iteration) + ".options"));
    options << SerializeOptions(record.config_applied);
  }
  log_ << RecordToJson(record).dump() << "\n" << std::flush;
  summary_ << record.iteration << "," << json(record.throughput).dump() << ","
           << json(record.inference_ms).dump() << "," << DecisionName(record.decision)
           << "\n"
           << std::flush;
}

}  // namespace lsmtune

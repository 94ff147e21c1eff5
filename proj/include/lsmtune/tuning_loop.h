#pragma once

#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "lsmtune/advisor.h"
#include "lsmtune/config.h"
#include "lsmtune/guard.h"
#include "lsmtune/simulator.h"

namespace lsmtune {

enum class AcceptPolicy { kAlwaysApply, kGreedyRevert };
enum class Decision { kApplied, kReverted, kFallbackBaseline };

std::string_view AcceptPolicyName(AcceptPolicy policy);
std::optional<AcceptPolicy> ParseAcceptPolicy(std::string_view name);
std::string_view DecisionName(Decision decision);
std::optional<Decision> ParseDecision(std::string_view name);

// "default" or "stall-prone".
std::optional<DeviceModel> DevicePreset(std::string_view name);
std::string DescribeDevice(std::string_view name, const DeviceModel& device);

struct SessionSpec {
  int iterations = 5;
  WorkloadSpec workload;
  DeviceModel device;
  std::string device_name = "default";
  std::string backend = "heuristic";  // as passed to MakeAdvisor
  Subspace subspace = SmallModelSubspace();
  AcceptPolicy accept_policy = AcceptPolicy::kAlwaysApply;
  int retry_budget = 2;
  double epsilon = 0.05;
  TuningConfig initial_config;
  std::uint64_t seed = 1;  // overrides workload.seed for every benchmark
};

// Empty when valid.
std::vector<std::string> SpecViolations(const SessionSpec& spec);

struct HostStats {
  double cpu_util = 0.0;
  double mem_util = 0.0;
  bool proxy = true;  // simulator-derived, not measured on a host
};

struct ProposalAttempt {
  std::string verdict;  // GuardVerdict summary, or "Error <kind>"
  std::vector<Repair> repairs;
  std::vector<ConsistencyWarning> warnings;
  std::string error;
  double latency_ms = 0.0;
  std::optional<double> first_token_ms;
  double temperature = 0.0;
};

struct IterationRecord {
  int iteration = 0;
  TuningConfig config_applied;
  double throughput = 0.0;  // mean ops/s over the run
  AmpMetrics amp;
  double inference_ms = 0.0;
  std::string verdict = "-";
  Decision decision = Decision::kApplied;
  double temperature = kInitialTemperature;
  HostStats host;
  std::vector<ProposalAttempt> attempts;
  std::vector<double> throughput_series;  // ops in each simulated second
};

struct SessionLog {
  SessionSpec spec;
  std::vector<IterationRecord> records;
};

TuningContext MakeContext(const IterationRecord& prev, const SessionSpec& spec,
                          const HostStats& host_stats);

using RecordSink = std::function<void(const IterationRecord&)>;

// Never throws because of advisor output or advisor failures; throws
// std::invalid_argument for an invalid spec.
SessionLog RunSession(const SessionSpec& spec, Advisor& advisor,
                      const RecordSink& sink = {});

nlohmann::json ConfigToJson(const TuningConfig& config);
TuningConfig ConfigFromJson(const nlohmann::json& j);
nlohmann::json SpecToJson(const SessionSpec& spec);
nlohmann::json RecordToJson(const IterationRecord& record);
// Throws nlohmann::json::exception or std::invalid_argument on bad input.
IterationRecord RecordFromJson(const nlohmann::json& j);

// session.json, iter_<n>.options, log.jsonl and summary.csv; every append is
// flushed before returning.
class RunDirectory {
 public:
  RunDirectory(const std::filesystem::path& dir, const SessionSpec& spec);

  void Append(const IterationRecord& record);

  const std::filesystem::path& dir() const { return dir_; }

 private:
  std::filesystem::path dir_;
  std::ofstream log_;
  std::ofstream summary_;
};

}  // namespace lsmtune

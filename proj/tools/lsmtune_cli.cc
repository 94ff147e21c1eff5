// lsmtune: simulate, tune, validate, report.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <numeric>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "lsmtune/advisor.h"
#include "lsmtune/guard.h"
#include "lsmtune/options.h"
#include "lsmtune/simulator.h"
#include "lsmtune/tuning_loop.h"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace lsmtune;

namespace {

constexpr int kOk = 0;
constexpr int kFindings = 1;
constexpr int kUsage = 2;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string ReadText(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UsageError("cannot read " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

TuningConfig LoadOptions(const std::string& path) {
  if (path.empty()) return DefaultConfig();
  const std::string text = ReadText(path);
  try {
    return ConfigFromOptionsText(text);
  } catch (const OptionsError& e) {
    throw UsageError(path + ": " + e.what());
  }
}

Subspace LoadSubspace(const std::string& arg) {
  if (auto preset = SubspacePreset(arg)) return *preset;
  if (!fs::exists(arg)) {
    throw UsageError("subspace '" + arg + "' is neither small-model, full nor a file");
  }
  try {
    return ParseSubspace(ReadText(arg));
  } catch (const std::invalid_argument& e) {
    throw UsageError(arg + ": " + e.what());
  }
}

std::string Num(double v) { return json(v).dump(); }

std::string Coord(double v) {
  if (v == std::floor(v) && std::abs(v) < 1e15) return std::to_string(static_cast<long long>(v));
  return Num(v);
}

void WriteFile(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) throw UsageError("cannot write " + path.string());
}

struct WorkloadFlags {
  std::string workload = "fillrandom";
  double duration = 60;
  std::uint64_t seed = 1;
  std::string device = "default";

  void Add(CLI::App* app) {
    app->add_option("--workload", workload, "fillrandom, readrandom or mix")
        ->check(CLI::IsMember({"fillrandom", "readrandom", "mix"}));
    app->add_option("--duration", duration, "simulated seconds")->check(CLI::Range(1.0, 1e6));
    app->add_option("--seed", seed, "workload seed");
    app->add_option("--device", device, "default or stall-prone")
        ->check(CLI::IsMember({"default", "stall-prone"}));
  }
  WorkloadSpec Workload() const {
    return MakeWorkload(*ParseWorkloadKind(workload), duration, seed);
  }
};

// --- simulate -------------------------------------------------------------

struct SimulateFlags {
  WorkloadFlags w;
  std::string options;
  std::string out = ".";
};

int CmdSimulate(const SimulateFlags& f) {
  const TuningConfig config = LoadOptions(f.options);
  const RunResult r = RunWorkload(config, f.w.Workload(), *DevicePreset(f.w.device));
  fs::create_directories(f.out);

  std::string csv = "t_sec,ops_per_sec\n";
  for (std::size_t i = 0; i < r.throughput.size(); ++i) {
    csv += std::to_string(i + 1) + "," + Num(r.throughput[i]) + "\n";
  }
  WriteFile(fs::path(f.out) / "throughput.csv", csv);

  json stalls = json::array();
  for (const auto& s : r.stalls) {
    stalls.push_back({{"start", s.start},
                      {"end", s.end},
                      {"state", WriteStateName(s.state)}});
  }
  const double mean =
      r.throughput.empty() ? 0.0
                           : std::accumulate(r.throughput.begin(), r.throughput.end(), 0.0) /
                                 static_cast<double>(r.throughput.size());
  const json result = {
      {"workload", f.w.workload},
      {"duration", f.w.duration},
      {"seed", f.w.seed},
      {"device", f.w.device},
      {"config", ConfigToJson(config)},
      {"mean_ops_per_sec", mean},
      {"throughput", r.throughput},
      {"amp",
       {{"write_amp", r.amp.write_amp},
        {"read_amp", r.amp.read_amp},
        {"space_amp", r.amp.space_amp},
        {"stall_seconds", r.amp.stall_seconds},
        {"stopped_seconds", r.amp.stopped_seconds},
        {"achieved_ops_rate", r.amp.achieved_ops_rate}}},
      {"stalls", stalls},
      {"logical_written", r.logical_written},
      {"physical_written", r.physical_written},
      {"cpu_util", r.cpu_util},
      {"mem_util", r.mem_util},
      {"level_files", r.level_files},
  };
  WriteFile(fs::path(f.out) / "run_result.json", result.dump(2) + "\n");
  std::cout << f.w.workload << " " << f.w.duration << "s: " << Num(mean) << " ops/s, write_amp "
            << Num(r.amp.write_amp) << ", stopped " << Num(r.amp.stopped_seconds) << "s\n";
  return kOk;
}

// --- tune -----------------------------------------------------------------

struct TuneFlags {
  WorkloadFlags w;
  int iterations = 5;
  std::string backend = "heuristic";
  std::string model = "default";
  std::string subspace = "small-model";
  std::string accept = "always";
  int retry_budget = 2;
  double epsilon = 0.05;
  std::string options;
  std::string out;
  int timeout_ms = 60000;
  std::string api_key_env;
  bool stream = false;
  int scripted_delay_ms = 0;
};

int CmdTune(const TuneFlags& f) {
  SessionSpec spec;
  spec.iterations = f.iterations;
  spec.workload = f.w.Workload();
  spec.device = *DevicePreset(f.w.device);
  spec.device_name = f.w.device;
  spec.backend = f.backend;
  spec.subspace = LoadSubspace(f.subspace);
  spec.accept_policy = *ParseAcceptPolicy(f.accept);
  spec.retry_budget = f.retry_budget;
  spec.epsilon = f.epsilon;
  spec.initial_config = LoadOptions(f.options);
  spec.seed = f.w.seed;
  if (const auto v = SpecViolations(spec); !v.empty()) throw UsageError(v.front());

  RemoteChatOptions remote;
  remote.model = f.model;
  remote.api_key_env = f.api_key_env;
  remote.timeout = std::chrono::milliseconds(f.timeout_ms);
  remote.stream = f.stream;
  std::unique_ptr<Advisor> advisor;
  try {
    advisor = MakeAdvisor(f.backend, remote, std::chrono::milliseconds(f.scripted_delay_ms));
  } catch (const std::exception& e) {
    throw UsageError(std::string("backend: ") + e.what());
  }

  RunDirectory run(f.out, spec);
  RunSession(spec, *advisor, [&](const IterationRecord& r) {
    run.Append(r);
    std::cout << "iter " << r.iteration << " " << DecisionName(r.decision) << " "
              << r.verdict << " ops/s=" << Num(r.throughput)
              << " inference_ms=" << Num(r.inference_ms) << "\n"
              << std::flush;
  });
  return kOk;
}

// --- validate -------------------------------------------------------------

struct ValidateFlags {
  std::string input;
  std::string baseline;
  std::string subspace = "small-model";
};

int CmdValidate(const ValidateFlags& f) {
  const TuningConfig baseline = LoadOptions(f.baseline);
  const Subspace subspace = LoadSubspace(f.subspace);
  std::vector<fs::path> files;
  std::error_code ec;
  if (fs::is_directory(f.input, ec)) {
    for (const auto& e : fs::directory_iterator(f.input, ec)) {
      if (e.is_regular_file()) files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
  } else if (fs::is_regular_file(f.input, ec)) {
    files.push_back(f.input);
  } else {
    throw UsageError("cannot read " + f.input);
  }
  bool all_accepted = true;
  for (const auto& path : files) {
    std::string text = ReadText(path);
    try {
      text = SplitExpectLabel(text).body;
    } catch (const std::invalid_argument&) {
      // not a label we know; validate the file as is
    }
    const GuardVerdict v = GuardResponse(text, baseline, subspace);
    all_accepted = all_accepted && v.accepted();
    std::cout << path.filename().string() << " " << v.Summary() << " " << v.repairs.size()
              << "\n";
  }
  return all_accepted ? kOk : kFindings;
}

// --- report ---------------------------------------------------------------

struct ReportFlags {
  std::vector<std::string> runs;
  std::string series = "throughput";
  std::string format = "csv";
  std::string out = ".";
  int iteration = -1;  // timeseries: which record; -1 = last
};

struct Series {
  std::string label;
  std::vector<std::pair<double, double>> points;
};

std::vector<IterationRecord> LoadLog(const fs::path& dir) {
  const fs::path path = dir / "log.jsonl";
  std::ifstream in(path);
  if (!in) throw UsageError("cannot read " + path.string());
  std::vector<IterationRecord> records;
  std::string line;
  int n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.empty()) continue;
    try {
      records.push_back(RecordFromJson(json::parse(line)));
    } catch (const std::exception& e) {
      throw UsageError(path.string() + ":" + std::to_string(n) + ": malformed record: " +
                       e.what());
    }
  }
  return records;
}

int CmdReport(const ReportFlags& f) {
  const std::map<std::string, std::tuple<std::string, std::string, std::string>> kKinds = {
      {"latency", {"latency_per_iteration", "iteration", "inference_ms"}},
      {"throughput", {"throughput_per_iteration", "iteration", "ops_per_sec"}},
      {"timeseries", {"throughput_timeseries", "t_sec", "ops_per_sec"}},
  };
  const auto& [kind, x_name, y_name] = kKinds.at(f.series);

  std::vector<Series> all;
  std::map<std::string, int> seen;
  for (const auto& dir : f.runs) {
    const auto records = LoadLog(dir);
    Series s;
    s.label = fs::path(dir).lexically_normal().filename().string();
    if (s.label.empty()) s.label = fs::path(dir).lexically_normal().parent_path().filename().string();
    if (int k = seen[s.label]++; k > 0) s.label += "_" + std::to_string(k + 1);
    if (f.series == "latency") {
      for (const auto& r : records) {
        if (r.iteration > 0) s.points.emplace_back(r.iteration, r.inference_ms);
      }
    } else if (f.series == "throughput") {
      for (const auto& r : records) s.points.emplace_back(r.iteration, r.throughput);
    } else {
      if (records.empty()) throw UsageError(dir + ": empty log");
      const auto it = f.iteration < 0
                          ? records.end() - 1
                          : std::find_if(records.begin(), records.end(), [&](const auto& r) {
                              return r.iteration == f.iteration;
                            });
      if (it == records.end()) {
        throw UsageError(dir + ": no iteration " + std::to_string(f.iteration));
      }
      for (std::size_t i = 0; i < it->throughput_series.size(); ++i) {
        s.points.emplace_back(static_cast<double>(i + 1), it->throughput_series[i]);
      }
    }
    all.push_back(std::move(s));
  }

  fs::create_directories(f.out);
  if (f.format == "csv") {
    for (const auto& s : all) {
      std::string csv = x_name + "," + y_name + "\n";
      for (const auto& [x, y] : s.points) csv += Coord(x) + "," + Num(y) + "\n";
      const fs::path path = fs::path(f.out) / (s.label + "_" + f.series + ".csv");
      WriteFile(path, csv);
      std::cout << path.string() << "\n";
    }
  } else {
    json doc = {{"kind", kind}, {"x", x_name}, {"y", y_name}, {"series", json::array()}};
    for (const auto& s : all) {
      json points = json::array();
      for (const auto& [x, y] : s.points) points.push_back({x, y});
      doc["series"].push_back({{"label", s.label}, {"points", points}});
    }
    const fs::path path = fs::path(f.out) / (f.series + ".json");
    WriteFile(path, doc.dump(2) + "\n");
    std::cout << path.string() << "\n";
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"LSM compaction tuning harness"};
  app.require_subcommand(1);

  SimulateFlags sim;
  auto* simulate = app.add_subcommand("simulate", "run one workload in the simulator");
  sim.w.Add(simulate);
  simulate->add_option("--options", sim.options, "OPTIONS file (defaults if omitted)");
  simulate->add_option("--out", sim.out, "output directory");

  TuneFlags tune;
  auto* tune_cmd = app.add_subcommand("tune", "run a closed-loop tuning session");
  tune.w.Add(tune_cmd);
  tune_cmd->add_option("--iterations", tune.iterations)->check(CLI::PositiveNumber);
  tune_cmd->add_option("--backend", tune.backend,
                       "heuristic, scripted:<dir> or remote:<endpoint>");
  tune_cmd->add_option("--model", tune.model, "model name for the remote backend");
  tune_cmd->add_option("--subspace", tune.subspace, "small-model, full or a key-list file");
  tune_cmd->add_option("--accept", tune.accept, "always or greedy")
      ->check(CLI::IsMember({"always", "greedy"}));
  tune_cmd->add_option("--retry-budget", tune.retry_budget)->check(CLI::NonNegativeNumber);
  tune_cmd->add_option("--epsilon", tune.epsilon)->check(CLI::Range(0.0, 0.99));
  tune_cmd->add_option("--options", tune.options, "initial OPTIONS file");
  tune_cmd->add_option("--out", tune.out, "run directory")->required();
  tune_cmd->add_option("--timeout-ms", tune.timeout_ms)->check(CLI::PositiveNumber);
  tune_cmd->add_option("--api-key-env", tune.api_key_env,
                       "environment variable holding the API key");
  tune_cmd->add_flag("--stream", tune.stream, "request a streamed response");
  tune_cmd->add_option("--scripted-delay-ms", tune.scripted_delay_ms)
      ->check(CLI::NonNegativeNumber);

  ValidateFlags val;
  auto* validate = app.add_subcommand("validate", "check advisor outputs offline");
  validate->add_option("--input", val.input, "file or directory")->required();
  validate->add_option("--baseline", val.baseline, "baseline OPTIONS file");
  validate->add_option("--subspace", val.subspace, "small-model, full or a key-list file");

  ReportFlags rep;
  auto* report = app.add_subcommand("report", "emit plot data from run directories");
  report->add_option("--runs", rep.runs, "run directories")->required();
  report->add_option("--series", rep.series, "latency, throughput or timeseries")
      ->check(CLI::IsMember({"latency", "throughput", "timeseries"}));
  report->add_option("--format", rep.format, "csv or json")
      ->check(CLI::IsMember({"csv", "json"}));
  report->add_option("--out", rep.out, "output directory");
  report->add_option("--iteration", rep.iteration, "timeseries: iteration (default last)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }

  try {
    if (simulate->parsed()) return CmdSimulate(sim);
    if (tune_cmd->parsed()) return CmdTune(tune);
    if (validate->parsed()) return CmdValidate(val);
    if (report->parsed()) return CmdReport(rep);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  }
  return kUsage;
}

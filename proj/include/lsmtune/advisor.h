#pragma once

#include <chrono>
#include <filesystem>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "lsmtune/config.h"
#include "lsmtune/guard.h"
#include "lsmtune/lsm_state.h"
#include "lsmtune/simulator.h"

namespace lsmtune {

struct TuningContext {
  int iteration = 0;
  double throughput = 0.0;  // ops/s of the last run
  double cpu_util = 0.0;
  double mem_util = 0.0;
  bool utilization_is_proxy = true;
  AmpMetrics amp;  // carries the stall and stop seconds too
  std::string active_config_text;
  std::string device_info;
  WorkloadKind workload_kind = WorkloadKind::kFillRandom;
  Subspace subspace;
};

struct AdvisorResponse {
  std::string raw_text;
  double latency_total_ms = 0.0;
  std::optional<double> latency_first_token_ms;
  std::optional<double> latency_decode_ms;
  std::string backend_id;
  double temperature_used = 0.0;
};

class AdvisorError : public std::runtime_error {
 public:
  AdvisorError(std::string_view kind, const std::string& message, double elapsed_ms);

  std::string_view kind() const { return kind_; }
  const std::string& detail() const { return detail_; }
  double elapsed_ms() const { return elapsed_ms_; }

 private:
  std::string_view kind_;
  std::string detail_;
  double elapsed_ms_;
};

class TimeoutError : public AdvisorError {
 public:
  TimeoutError(const std::string& message, double elapsed_ms)
      : AdvisorError("TimeoutError", message, elapsed_ms) {}
};

class TransportError : public AdvisorError {
 public:
  TransportError(const std::string& message, double elapsed_ms)
      : AdvisorError("TransportError", message, elapsed_ms) {}
};

class MalformedResponseError : public AdvisorError {
 public:
  MalformedResponseError(const std::string& message, double elapsed_ms)
      : AdvisorError("MalformedResponseError", message, elapsed_ms) {}
};

class Advisor {
 public:
  virtual ~Advisor() = default;
  virtual std::string id() const = 0;
  // temperature in [0, 0.7]; throws std::invalid_argument otherwise.
  virtual AdvisorResponse Propose(const TuningContext& context, double temperature) = 0;
};

// Instructions, device, workload, metrics, then the active config verbatim.
std::string BuildPrompt(const TuningContext& context);

// Rule table applied to the active config; the first eligible rule wins.
// A rule is eligible only when every key it touches is in the subspace.
struct HeuristicOutcome {
  TuningConfig config;
  int rule = 4;  // 1..4
  std::string reason;
};

HeuristicOutcome HeuristicRules(const TuningContext& context);

class ScriptedAdvisor : public Advisor {
 public:
  // Replies are handed out in order and wrap around at the end.
  explicit ScriptedAdvisor(std::vector<std::string> replies,
                           std::chrono::milliseconds delay = {});

  // reply_<n>.txt files in numeric order. Throws std::runtime_error when the
  // directory is missing or holds no replies.
  static ScriptedAdvisor FromDirectory(const std::filesystem::path& dir,
                                       std::chrono::milliseconds delay = {});

  std::string id() const override { return "scripted"; }
  AdvisorResponse Propose(const TuningContext& context, double temperature) override;

  std::size_t calls() const { return calls_; }

 private:
  std::vector<std::string> replies_;
  std::chrono::milliseconds delay_;
  std::size_t calls_ = 0;
};

class HeuristicAdvisor : public Advisor {
 public:
  std::string id() const override { return "heuristic"; }
  AdvisorResponse Propose(const TuningContext& context, double temperature) override;
};

struct RemoteChatOptions {
  std::string endpoint{};  // scheme://host[:port][/path]
  std::string model = "default";
  std::string api_key_env{};  // variable holding the bearer token; empty: none
  std::chrono::milliseconds timeout{60000};
  bool stream = false;
};

class RemoteChatAdvisor : public Advisor {
 public:
  // Throws std::invalid_argument for a malformed endpoint.
  explicit RemoteChatAdvisor(RemoteChatOptions options);

  std::string id() const override { return "remote:" + options_.model; }
  AdvisorResponse Propose(const TuningContext& context, double temperature) override;

  // One chat request with a single user message. One retry on
  // TransportError, none on TimeoutError.
  AdvisorResponse Chat(const std::string& prompt, double temperature);

  const std::string& base_url() const { return base_url_; }
  const std::string& path() const { return path_; }

 private:
  AdvisorResponse ChatOnce(const std::string& prompt, double temperature);

  RemoteChatOptions options_;
  std::string base_url_;
  std::string path_;
};

// "heuristic", "scripted:<dir>" or "remote:<endpoint>". Throws
// std::invalid_argument for anything else.
std::unique_ptr<Advisor> MakeAdvisor(std::string_view backend,
                                     const RemoteChatOptions& remote_defaults = {},
                                     std::chrono::milliseconds scripted_delay = {});

}  // namespace lsmtune

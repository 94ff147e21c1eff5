#include "lsmtune/advisor.h"

#include <algorithm>
#include <charconv>
#include <cstdlib>
#include <fstream>
#include <map>
#include <regex>
#include <sstream>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "lsmtune/options.h"

namespace lsmtune {

namespace {

using Clock = std::chrono::steady_clock;
using json = nlohmann::json;

double MillisSince(Clock::time_point start) {
  return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

// Shortest text that reads back as the same double.
std::string Num(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

void CheckTemperature(double temperature) {
  if (!(temperature >= 0.0 && temperature <= kMaxTemperature)) {
    throw std::invalid_argument("temperature out of [0, 0.7]: " + Num(temperature));
  }
}

int IntMax(std::string_view key) {
  return static_cast<int>(FindOption(key)->max_value);
}

}  // namespace

AdvisorError::AdvisorError(std::string_view kind, const std::string& message,
                           double elapsed_ms)
    : std::runtime_error(std::string(kind) + ": " + message),
      kind_(kind),
      detail_(message),
      elapsed_ms_(elapsed_ms) {}

std::string BuildPrompt(const TuningContext& context) {
  std::ostringstream out;
  out << "You are tuning the compaction settings of a RocksDB-style LSM-tree "
         "key-value store.\n"
         "Answer in two parts. First, explain your reasoning in plain text. "
         "Then emit exactly one fenced code block holding the complete new "
         "configuration in OPTIONS file format ([DBOptions] and "
         "[CFOptions \"default\"] sections, key=value lines).\n"
         "Only change these options:\n";
  for (const auto& key : context.subspace) {
    const auto* entry = FindOption(key);
    out << "- " << key;
    if (entry != nullptr) out << " (" << entry->LegalRangeText() << ")";
    out << "\n";
  }
  out << "Keep every other option at its current value and do not invent new "
         "options.\n\n";
  out << "## Device\n" << context.device_info << "\n\n";
  out << "## Workload\n" << WorkloadKindName(context.workload_kind) << "\n\n";
  out << "## Benchmark results (iteration " << context.iteration << ")\n"
      << "throughput_ops_per_sec: " << Num(context.throughput) << "\n"
      << "cpu_util: " << Num(context.cpu_util) << "\n"
      << "mem_util: " << Num(context.mem_util) << "\n"
      << "write_amp: " << Num(context.amp.write_amp) << "\n"
      << "read_amp: " << Num(context.amp.read_amp) << "\n"
      << "space_amp: " << Num(context.amp.space_amp) << "\n"
      << "slowdown_seconds: " << Num(context.amp.stall_seconds) << "\n"
      << "stopped_seconds: " << Num(context.amp.stopped_seconds) << "\n\n";
  out << "## Current configuration\n" << context.active_config_text;
  if (context.active_config_text.empty() || context.active_config_text.back() != '\n') {
    out << "\n";
  }
  return out.str();
}

HeuristicOutcome HeuristicRules(const TuningContext& context) {
  HeuristicOutcome out;
  out.config = ConfigFromOptionsText(context.active_config_text);
  TuningConfig& c = out.config;
  const auto in = [&](std::string_view key) { return InSubspace(context.subspace, key); };

  if (context.amp.stopped_seconds > 0 && in("max_background_compactions") &&
      in("max_background_jobs")) {
    c.max_background_compactions =
        std::min(c.max_background_compactions + 1, IntMax("max_background_compactions"));
    c.max_background_jobs =
        std::min(c.max_background_jobs + 1, IntMax("max_background_jobs"));
    out.rule = 1;
    out.reason = "writes were stopped; adding background compaction threads";
    return out;
  }
  if (context.amp.stall_seconds > 0 && in("level0_slowdown_writes_trigger")) {
    c.level0_slowdown_writes_trigger =
        std::min({c.level0_slowdown_writes_trigger + 4,
                  IntMax("level0_slowdown_writes_trigger"), c.level0_stop_writes_trigger});
    out.rule = 2;
    out.reason = "writes were slowed down; raising the slowdown trigger";
    return out;
  }
  if (context.workload_kind == WorkloadKind::kReadRandom && context.amp.read_amp > 4 &&
      in("level0_file_num_compaction_trigger")) {
    if (c.level0_file_num_compaction_trigger > 2) --c.level0_file_num_compaction_trigger;
    out.rule = 3;
    out.reason = "reads touch many files; compacting L0 earlier";
    return out;
  }
  out.rule = 4;
  out.reason = "no bottleneck detected; keeping the configuration";
  return out;
}

ScriptedAdvisor::ScriptedAdvisor(std::vector<std::string> replies,
                                 std::chrono::milliseconds delay)
    : replies_(std::move(replies)), delay_(delay) {
  if (replies_.empty()) throw std::invalid_argument("scripted advisor needs replies");
}

ScriptedAdvisor ScriptedAdvisor::FromDirectory(const std::filesystem::path& dir,
                                               std::chrono::milliseconds delay) {
  static const std::regex kName(R"(reply_(\d+)\.txt)");
  std::map<long long, std::filesystem::path> files;
  std::error_code ec;
  for (const auto& entry : std::filesystem::directory_iterator(dir, ec)) {
    std::smatch m;
    const std::string name = entry.path().filename().string();
    if (std::regex_match(name, m, kName)) files[std::stoll(m[1])] = entry.path();
  }
  if (ec) throw std::runtime_error("cannot read transcript directory " + dir.string());
  if (files.empty()) throw std::runtime_error("no reply_<n>.txt files in " + dir.string());
  std::vector<std::string> replies;
  for (const auto& [n, path] : files) {
    std::ifstream in(path, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    replies.push_back(ss.str());
  }
  return ScriptedAdvisor(std::move(replies), delay);
}

AdvisorResponse ScriptedAdvisor::Propose(const TuningContext&, double temperature) {
  CheckTemperature(temperature);
  const auto start = Clock::now();
  if (delay_.count() > 0) std::this_thread::sleep_for(delay_);
  AdvisorResponse r;
  r.raw_text = replies_[calls_ % replies_.size()];
  ++calls_;
  r.backend_id = id();
  r.temperature_used = temperature;
  r.latency_total_ms = MillisSince(start);
  return r;
}

AdvisorResponse HeuristicAdvisor::Propose(const TuningContext& context,
                                          double temperature) {
  CheckTemperature(temperature);
  const auto start = Clock::now();
  const HeuristicOutcome h = HeuristicRules(context);
  AdvisorResponse r;
  r.raw_text = "Rule " + std::to_string(h.rule) + ": " + h.reason + ".\n\n```ini\n" +
               SerializeOptions(h.config) + "```\n";
  r.backend_id = id();
  r.temperature_used = temperature;
  r.latency_total_ms = MillisSince(start);
  return r;
}

RemoteChatAdvisor::RemoteChatAdvisor(RemoteChatOptions options)
    : options_(std::move(options)) {
  static const std::regex kUrl(R"(^(https?://[^/\s]+)(/\S*)?$)");
  std::smatch m;
  if (!std::regex_match(options_.endpoint, m, kUrl)) {
    throw std::invalid_argument("malformed endpoint: " + options_.endpoint);
  }
  base_url_ = m[1];
  path_ = m[2].matched && m[2].str() != "/" ? m[2].str() : "/v1/chat/completions";
#ifndef CPPHTTPLIB_OPENSSL_SUPPORT
  if (base_url_.rfind("https://", 0) == 0) {
    throw std::invalid_argument("https endpoints need a TLS-enabled build");
  }
#endif
}

AdvisorResponse RemoteChatAdvisor::Propose(const TuningContext& context,
                                           double temperature) {
  return Chat(BuildPrompt(context), temperature);
}

AdvisorResponse RemoteChatAdvisor::Chat(const std::string& prompt, double temperature) {
  CheckTemperature(temperature);
  const auto start = Clock::now();
  try {
    return ChatOnce(prompt, temperature);
  } catch (const TransportError&) {
    try {
      AdvisorResponse r = ChatOnce(prompt, temperature);
      r.latency_total_ms = MillisSince(start);
      return r;
    } catch (const TransportError& e) {
      throw TransportError(e.detail() + " (after one retry)", MillisSince(start));
    }
  }
}

AdvisorResponse RemoteChatAdvisor::ChatOnce(const std::string& prompt,
                                            double temperature) {
  const json request = {
      {"model", options_.model},
      {"messages", json::array({{{"role", "user"}, {"content", prompt}}})},
      {"temperature", temperature},
      {"stream", options_.stream},
  };

  httplib::Client client(base_url_);
  const auto timeout = options_.timeout;
  client.set_connection_timeout(timeout);
  client.set_read_timeout(timeout);
  client.set_write_timeout(timeout);

  httplib::Request req;
  req.method = "POST";
  req.path = path_;
  req.body = request.dump();
  req.set_header("Content-Type", "application/json");
  if (!options_.api_key_env.empty()) {
    if (const char* key = std::getenv(options_.api_key_env.c_str())) {
      req.set_header("Authorization", std::string("Bearer ") + key);
    }
  }

  const auto start = Clock::now();
  std::string body;
  std::string pending;  // unterminated SSE line
  std::string content;
  std::optional<double> first_token_ms;
  bool saw_event = false;
  bool done = false;
  std::string malformed;
  bool deadline_hit = false;

  auto handle_line = [&](std::string_view line) {
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (done || line.substr(0, 5) != "data:") return;
    line.remove_prefix(5);
    while (!line.empty() && line.front() == ' ') line.remove_prefix(1);
    saw_event = true;
    if (line == "[DONE]") {
      done = true;
      return;
    }
    const json chunk = json::parse(line, nullptr, false);
    if (chunk.is_discarded() || !chunk.contains("choices") ||
        !chunk["choices"].is_array() || chunk["choices"].empty()) {
      malformed = "bad stream chunk: " + std::string(line.substr(0, 80));
      return;
    }
    const json& choice = chunk["choices"][0];
    if (!choice.contains("delta") || !choice["delta"].is_object()) return;
    const json& delta = choice["delta"];
    if (delta.contains("content") && delta["content"].is_string()) {
      const auto piece = delta["content"].get<std::string>();
      if (!piece.empty() && !first_token_ms) first_token_ms = MillisSince(start);
      content += piece;
    }
  };

  req.content_receiver = [&](const char* data, std::size_t n, std::uint64_t,
                             std::uint64_t) {
    if (MillisSince(start) > static_cast<double>(timeout.count())) {
      deadline_hit = true;
      return false;
    }
    if (!options_.stream) {
      body.append(data, n);
      return true;
    }
    pending.append(data, n);
    std::size_t nl;
    while ((nl = pending.find('\n')) != std::string::npos) {
      handle_line(std::string_view(pending).substr(0, nl));
      pending.erase(0, nl + 1);
    }
    return malformed.empty();
  };

  httplib::Response res;
  httplib::Error error = httplib::Error::Success;
  const bool ok = client.send(req, res, error);
  const double elapsed = MillisSince(start);

  if (!malformed.empty()) throw MalformedResponseError(malformed, elapsed);
  if (!ok) {
    const std::string what = httplib::to_string(error);
    if (deadline_hit || elapsed >= static_cast<double>(timeout.count()) ||
        error == httplib::Error::ConnectionTimeout) {
      throw TimeoutError("no complete response within " +
                             std::to_string(timeout.count()) + " ms (" + what + ")",
                         elapsed);
    }
    throw TransportError(what, elapsed);
  }
  if (res.status >= 500) {
    throw TransportError("HTTP " + std::to_string(res.status), elapsed);
  }
  if (res.status < 200 || res.status >= 300) {
    throw MalformedResponseError("HTTP " + std::to_string(res.status), elapsed);
  }

  AdvisorResponse r;
  r.backend_id = id();
  r.temperature_used = temperature;
  r.latency_total_ms = elapsed;
  if (options_.stream) {
    if (!pending.empty()) handle_line(pending);
    if (!malformed.empty()) throw MalformedResponseError(malformed, elapsed);
    if (!saw_event) throw MalformedResponseError("no stream events", elapsed);
    r.raw_text = content;
    if (first_token_ms) {
      r.latency_first_token_ms = first_token_ms;
      r.latency_decode_ms = elapsed - *first_token_ms;
    }
    return r;
  }
  const json reply = json::parse(body, nullptr, false);
  if (reply.is_discarded() || !reply.contains("choices") || !reply["choices"].is_array() ||
      reply["choices"].empty() || !reply["choices"][0].contains("message") ||
      !reply["choices"][0]["message"].contains("content") ||
      !reply["choices"][0]["message"]["content"].is_string()) {
    throw MalformedResponseError("no choices[0].message.content in response body",
                                 elapsed);
  }
  r.raw_text = reply["choices"][0]["message"]["content"].get<std::string>();
  return r;
}

std::unique_ptr<Advisor> MakeAdvisor(std::string_view backend,
                                     const RemoteChatOptions& remote_defaults,
                                     std::chrono::milliseconds scripted_delay) {
  if (backend == "heuristic") return std::make_unique<HeuristicAdvisor>();
  if (backend.substr(0, 9) == "scripted:") {
    return std::make_unique<ScriptedAdvisor>(
        ScriptedAdvisor::FromDirectory(std::string(backend.substr(9)), scripted_delay));
  }
  if (backend.substr(0, 7) == "remote:") {
    RemoteChatOptions options = remote_defaults;
    options.endpoint = std::string(backend.substr(7));
    return std::make_unique<RemoteChatAdvisor>(std::move(options));
  }
  throw std::invalid_argument("unknown backend: " + std::string(backend));
}

}  // namespace lsmtune

#include "judgeflow/gateway.hpp"

#include <chrono>
#include <regex>
#include <thread>

#include <httplib.h>

#include "judgeflow/errors.hpp"

namespace judgeflow {

namespace {

long long estimate_tokens(const std::string& text) {
  return static_cast<long long>(text.size() / 4) + 1;
}

}  // namespace

std::string ChatRequest::user_text() const {
  std::string out;
  for (const auto& m : messages)
    if (m.speaker == "user") out += m.content;
  return out;
}

std::string ChatRequest::prompt_digest() const {
  std::string all = role + "\x1f" + model;
  for (const auto& m : messages) all += "\x1f" + m.speaker + "\x1f" + m.content;
  return hex64(fnv1a64(all));
}

MockBackend::MockBackend(std::vector<MockRule> rules, bool strict,
                         std::string default_response)
    : rules_(std::move(rules)),
      strict_(strict),
      default_response_(std::move(default_response)) {}

std::vector<MockRule> MockBackend::parse_rules(const std::string& jsonl_text) {
  std::vector<MockRule> rules;
  std::size_t pos = 0;
  int lineno = 0;
  while (pos <= jsonl_text.size()) {
    std::size_t nl = jsonl_text.find('\n', pos);
    std::string line = jsonl_text.substr(
        pos, nl == std::string::npos ? std::string::npos : nl - pos);
    pos = nl == std::string::npos ? jsonl_text.size() + 1 : nl + 1;
    ++lineno;
    if (trim(line).empty()) continue;
    json rec = json::parse(line, nullptr, false);
    if (rec.is_discarded() || !rec.is_object())
      throw Error(ErrorKind::FormatError,
                  "scenario line " + std::to_string(lineno) + ": not a JSON object");
    MockRule r;
    if (rec.contains("role")) r.role = rec["role"].get<std::string>();
    if (rec.contains("match")) r.match = rec["match"].get<std::string>();
    if (rec.contains("pattern")) r.pattern = rec["pattern"].get<std::string>();
    if (r.match.empty() && r.pattern.empty())
      throw Error(ErrorKind::FormatError,
                  "scenario line " + std::to_string(lineno) + ": needs match or pattern");
    if (!rec.contains("response") || !rec["response"].is_string())
      throw Error(ErrorKind::FormatError,
                  "scenario line " + std::to_string(lineno) + ": missing response");
    r.response = rec["response"].get<std::string>();
    if (rec.contains("prompt_tokens")) r.prompt_tokens = rec["prompt_tokens"].get<long long>();
    if (rec.contains("completion_tokens"))
      r.completion_tokens = rec["completion_tokens"].get<long long>();
    rules.push_back(std::move(r));
  }
  return rules;
}

std::vector<MockRule> MockBackend::load_rules(const std::string& jsonl_path) {
  return parse_rules(read_file(jsonl_path));
}

ChatResult MockBackend::complete(const ChatRequest& req) {
  {
    std::lock_guard<std::mutex> lock(mu_);
    log_.push_back(req);
  }
  std::string user = req.user_text();
  for (const auto& r : rules_) {
    if (!r.role.empty() && r.role != req.role) continue;
    bool hit = false;
    if (!r.match.empty())
      hit = user.find(r.match) != std::string::npos;
    else
      hit = std::regex_search(user, std::regex(r.pattern));
    if (!hit) continue;
    ChatResult res;
    res.text = r.response;
    long long prompt_chars = 0;
    for (const auto& m : req.messages) prompt_chars += static_cast<long long>(m.content.size());
    res.usage.prompt_tokens =
        r.prompt_tokens >= 0 ? r.prompt_tokens : prompt_chars / 4 + 1;
    res.usage.completion_tokens =
        r.completion_tokens >= 0 ? r.completion_tokens : estimate_tokens(r.response);
    return res;
  }
  if (strict_)
    throw Error(ErrorKind::NoMatch, "no scenario rule matched role=" + req.role +
                                        " digest=" + req.prompt_digest());
  ChatResult res;
  res.text = default_response_;
  res.usage.prompt_tokens = 1;
  res.usage.completion_tokens = estimate_tokens(default_response_);
  return res;
}

std::vector<ChatRequest> MockBackend::call_log() const {
  std::lock_guard<std::mutex> lock(mu_);
  return log_;
}

std::size_t MockBackend::call_count(const std::string& role) const {
  std::lock_guard<std::mutex> lock(mu_);
  if (role.empty()) return log_.size();
  std::size_t n = 0;
  for (const auto& r : log_)
    if (r.role == role) ++n;
  return n;
}

void MockBackend::clear_log() {
  std::lock_guard<std::mutex> lock(mu_);
  log_.clear();
}

HttpBackend::HttpBackend(std::string endpoint, std::string api_key)
    : api_key_(std::move(api_key)) {
  // endpoint may be a base ("http://host:1234/v1") or a full completions URL
  std::string ep = std::move(endpoint);
  const std::string suffix = "/chat/completions";
  std::string full = ep;
  if (full.size() < suffix.size() ||
      full.compare(full.size() - suffix.size(), suffix.size(), suffix) != 0) {
    while (!full.empty() && full.back() == '/') full.pop_back();
    full += suffix;
  }
  std::size_t scheme = full.find("://");
  std::size_t path_at = full.find('/', scheme == std::string::npos ? 0 : scheme + 3);
  if (path_at == std::string::npos)
    throw Error(ErrorKind::ConfigError, "bad endpoint '" + ep + "'");
  base_ = full.substr(0, path_at);
  path_ = full.substr(path_at);
}

ChatResult HttpBackend::complete(const ChatRequest& req) {
  json body;
  body["model"] = req.model;
  body["temperature"] = req.temperature;
  body["max_tokens"] = req.max_tokens;
  body["messages"] = json::array();
  for (const auto& m : req.messages)
    body["messages"].push_back({{"role", m.speaker}, {"content", m.content}});

  httplib::Client cli(base_);
  cli.set_connection_timeout(15, 0);
  cli.set_read_timeout(300, 0);
  httplib::Headers headers;
  if (!api_key_.empty()) headers.emplace("Authorization", "Bearer " + api_key_);
  auto res = cli.Post(path_, headers, body.dump(), "application/json");
  if (!res)
    throw Error(ErrorKind::BackendExhausted,
                "network failure reaching " + base_ + path_);
  if (res->status == 401 || res->status == 403)
    throw Error(ErrorKind::BackendError, "authentication rejected (" +
                                             std::to_string(res->status) + ")");
  if (res->status == 429)
    throw Error(ErrorKind::BackendExhausted, "rate limited (429)");
  if (res->status >= 500)
    throw Error(ErrorKind::BackendExhausted,
                "server error (" + std::to_string(res->status) + ")");
  if (res->status != 200)
    throw Error(ErrorKind::BackendError, "unexpected status " +
                                             std::to_string(res->status) + ": " + res->body);
  json reply = json::parse(res->body, nullptr, false);
  if (reply.is_discarded() || !reply.contains("choices") || reply["choices"].empty())
    throw Error(ErrorKind::BackendError, "malformed completion body");
  ChatResult out;
  out.text = reply["choices"][0]["message"]["content"].get<std::string>();
  if (reply.contains("usage")) {
    out.usage.prompt_tokens = reply["usage"].value("prompt_tokens", 0);
    out.usage.completion_tokens = reply["usage"].value("completion_tokens", 0);
  }
  return out;
}

RateTable parse_rate_table(const json& rates) {
  RateTable table;
  if (rates.is_null()) return table;
  if (!rates.is_object())
    throw Error(ErrorKind::ConfigError, "rates must be a map model -> prices");
  for (auto it = rates.begin(); it != rates.end(); ++it) {
    ModelRate r;
    if (it.value().is_number()) {
      r.prompt_per_1k = r.completion_per_1k = it.value().get<double>();
    } else if (it.value().is_object()) {
      r.prompt_per_1k = it.value().value("prompt", 0.0);
      r.completion_per_1k = it.value().value("completion", 0.0);
    } else {
      throw Error(ErrorKind::ConfigError, "rate for '" + it.key() + "' must be number or object");
    }
    table[it.key()] = r;
  }
  return table;
}

void UsageLedger::record(const std::string& role, const std::string& model,
                         const ChatUsage& usage) {
  std::lock_guard<std::mutex> lock(mu_);
  RoleUsage& u = per_role_model_[{role, model}];
  u.prompt_tokens += usage.prompt_tokens;
  u.completion_tokens += usage.completion_tokens;
  u.requests += 1;
}

double UsageLedger::cost(const std::string& role, const RateTable& rates) const {
  std::lock_guard<std::mutex> lock(mu_);
  double total = 0.0;
  for (const auto& [key, u] : per_role_model_) {
    if (key.first != role) continue;
    auto it = rates.find(key.second);
    if (it == rates.end()) continue;
    total += static_cast<double>(u.prompt_tokens) / 1000.0 * it->second.prompt_per_1k;
    total += static_cast<double>(u.completion_tokens) / 1000.0 * it->second.completion_per_1k;
  }
  return total;
}

double UsageLedger::total_cost(const RateTable& rates) const {
  double total = 0.0;
  for (const char* role : {"executor", "judge", "optimizer"}) total += cost(role, rates);
  return total;
}

RoleUsage UsageLedger::role_totals(const std::string& role) const {
  std::lock_guard<std::mutex> lock(mu_);
  RoleUsage out;
  for (const auto& [key, u] : per_role_model_) {
    if (key.first != role) continue;
    out.prompt_tokens += u.prompt_tokens;
    out.completion_tokens += u.completion_tokens;
    out.requests += u.requests;
  }
  return out;
}

json UsageLedger::to_json(const RateTable& rates) const {
  json roles = json::object();
  for (const char* role : {"executor", "judge", "optimizer"}) {
    RoleUsage u = role_totals(role);
    roles[role] = {{"prompt_tokens", u.prompt_tokens},
                   {"completion_tokens", u.completion_tokens},
                   {"requests", u.requests},
                   {"cost", cost(role, rates)}};
  }
  return json{{"roles", roles}, {"total_cost", total_cost(rates)}};
}

void UsageLedger::reset() {
  std::lock_guard<std::mutex> lock(mu_);
  per_role_model_.clear();
}

json cost_report(const UsageLedger& ledger, const RateTable& rates) {
  double judge = ledger.cost("judge", rates);
  double evaluation = ledger.cost("executor", rates);
  json out = ledger.to_json(rates);
  out["judge_cost"] = judge;
  out["evaluation_cost"] = evaluation;
  if (judge == 0.0)
    out["ratio"] = 0.0;
  else if (evaluation == 0.0)
    out["ratio"] = nullptr;  // undefined, not a division failure
  else
    out["ratio"] = judge / evaluation;
  return out;
}

Gateway::Gateway(std::unique_ptr<Backend> backend, RetryPolicy retry, RateTable rates)
    : backend_(std::move(backend)), retry_(retry), rates_(std::move(rates)) {}

ChatResult Gateway::complete(const ChatRequest& req) {
  if (req.messages.empty())
    throw Error(ErrorKind::Validation, "chat request has no messages");
  for (std::size_t i = 1; i < req.messages.size(); ++i)
    if (req.messages[i].speaker == "system")
      throw Error(ErrorKind::Validation, "system message must come first");

  int attempts = std::max(1, retry_.max_attempts);
  std::string last;
  for (int attempt = 0; attempt < attempts; ++attempt) {
    if (attempt > 0 && retry_.base_delay_ms > 0) {
      int delay = retry_.base_delay_ms << (attempt - 1);
      std::this_thread::sleep_for(std::chrono::milliseconds(delay));
    }
    try {
      ChatResult res = backend_->complete(req);
      ledger_.record(req.role, req.model, res.usage);
      return res;
    } catch (const Error& e) {
      if (e.kind() == ErrorKind::BackendError) throw;  // permanent
      last = e.what();
    }
  }
  throw Error(ErrorKind::BackendExhausted,
              "gave up after " + std::to_string(attempts) + " attempts; last: " + last);
}

}  // namespace judgeflow

#pragma once

#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "judgeflow/util.hpp"

namespace judgeflow {

struct ChatMessage {
  std::string speaker;  // "system" | "user"
  std::string content;
};

struct ChatRequest {
  std::string role;  // "executor" | "judge" | "optimizer"
  std::string model;
  std::vector<ChatMessage> messages;
  double temperature = 0.0;
  int max_tokens = 4096;

  std::string user_text() const;    // concatenated user-message content
  std::string prompt_digest() const;
};

struct ChatUsage {
  long long prompt_tokens = 0;
  long long completion_tokens = 0;
};

struct ChatResult {
  std::string text;
  ChatUsage usage;
};

class Backend {
 public:
  virtual ~Backend() = default;
  // Throws Error; kind BackendError means permanent (no retry).
  virtual ChatResult complete(const ChatRequest& req) = 0;
  virtual std::string name() const = 0;
};

struct MockRule {
  std::string role;     // empty = any role
  std::string match;    // substring of the user text
  std::string pattern;  // ECMAScript regex alternative to match
  std::string response;
  long long prompt_tokens = -1;      // -1 = estimate from prompt length
  long long completion_tokens = -1;  // -1 = estimate from response length
};

// Deterministic scripted backend. First matching rule wins; strict mode
// throws on no match, lax mode returns default_response.
class MockBackend : public Backend {
 public:
  explicit MockBackend(std::vector<MockRule> rules, bool strict = true,
                       std::string default_response = "UNMATCHED");
  static std::vector<MockRule> load_rules(const std::string& jsonl_path);
  static std::vector<MockRule> parse_rules(const std::string& jsonl_text);

  ChatResult complete(const ChatRequest& req) override;
  std::string name() const override { return "mock"; }

  std::vector<ChatRequest> call_log() const;
  std::size_t call_count(const std::string& role = "") const;
  void clear_log();

 private:
  std::vector<MockRule> rules_;
  bool strict_;
  std::string default_response_;
  mutable std::mutex mu_;
  std::vector<ChatRequest> log_;
};

// OpenAI-compatible chat-completions client.
class HttpBackend : public Backend {
 public:
  HttpBackend(std::string endpoint, std::string api_key);
  ChatResult complete(const ChatRequest& req) override;
  std::string name() const override { return "http"; }

 private:
  std::string base_;
  std::string path_;
  std::string api_key_;
};

struct ModelRate {
  double prompt_per_1k = 0.0;
  double completion_per_1k = 0.0;
};

using RateTable = std::map<std::string, ModelRate>;

RateTable parse_rate_table(const json& rates);

struct RoleUsage {
  long long prompt_tokens = 0;
  long long completion_tokens = 0;
  long long requests = 0;
};

class UsageLedger {
 public:
  void record(const std::string& role, const std::string& model, const ChatUsage& usage);
  double cost(const std::string& role, const RateTable& rates) const;
  double total_cost(const RateTable& rates) const;
  RoleUsage role_totals(const std::string& role) const;
  json to_json(const RateTable& rates) const;
  void reset();

 private:
  mutable std::mutex mu_;
  std::map<std::pair<std::string, std::string>, RoleUsage> per_role_model_;
};

// judge cost / evaluation (executor) cost, plus per-role figures.
// Zero evaluation cost with nonzero judge cost reports ratio null ("undefined").
json cost_report(const UsageLedger& ledger, const RateTable& rates);

struct RetryPolicy {
  int max_attempts = 4;     // 1 initial + 3 retries
  int base_delay_ms = 200;  // doubled per retry; 0 in tests
};

class Gateway {
 public:
  Gateway(std::unique_ptr<Backend> backend, RetryPolicy retry = {}, RateTable rates = {});

  ChatResult complete(const ChatRequest& req);
  UsageLedger& ledger() { return ledger_; }
  const UsageLedger& ledger() const { return ledger_; }
  const RateTable& rates() const { return rates_; }
  Backend& backend() { return *backend_; }

 private:
  std::unique_ptr<Backend> backend_;
  RetryPolicy retry_;
  RateTable rates_;
  UsageLedger ledger_;
};

}  // namespace judgeflow

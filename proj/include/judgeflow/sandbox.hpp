#pragma once

#include <string>
#include <vector>

namespace judgeflow {

struct SandboxLimits {
  double time_s = 10.0;   // wall clock, whole test batch
  long memory_mb = 256;   // address-space cap per process
};

struct TestOutcome {
  std::string test;
  bool passed = false;
  std::string error;
};

struct CodeRunResult {
  bool passed = false;
  std::vector<TestOutcome> outcomes;
  std::string stdout_excerpt;
  std::string stderr_excerpt;
  double elapsed = 0.0;  // capped at the configured limit
};

// Runs code in per-test child processes: isolated working directory, stdin
// closed, no network (socket constructors stubbed out), wall-clock and
// memory limits enforced. Empty test list means one plain run of the code.
class Sandbox {
 public:
  explicit Sandbox(std::string interpreter = "python3", SandboxLimits limits = {});

  CodeRunResult run(const std::string& code, const std::vector<std::string>& tests) const;
  const SandboxLimits& limits() const { return limits_; }

 private:
  std::string interpreter_;
  SandboxLimits limits_;
};

CodeRunResult run_code_sandboxed(const std::string& code,
                                 const std::vector<std::string>& tests,
                                 const SandboxLimits& limits,
                                 const std::string& interpreter = "python3");

}  // namespace judgeflow

#include "judgeflow/sandbox.hpp"

#include <fcntl.h>
#include <signal.h>
#include <sys/resource.h>
#include <sys/stat.h>
#include <sys/types.h>
#include <sys/wait.h>
#include <unistd.h>

#include <atomic>
#include <chrono>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <thread>

#include "judgeflow/errors.hpp"
#include "judgeflow/util.hpp"

namespace judgeflow {

namespace {

namespace fs = std::filesystem;

constexpr const char* kExecFailedMarker = "__judgeflow_exec_failed__";

// Disables sockets before user code runs; AF_UNIX is gone too, which is
// acceptable for benchmark snippets.
constexpr const char* kPreamble = R"PY(
import socket as _jf_socket
def _jf_no_network(*args, **kwargs):
    raise OSError("network access is disabled in the sandbox")
_jf_socket.socket = _jf_no_network
_jf_socket.create_connection = _jf_no_network
_jf_socket.socketpair = _jf_no_network
del _jf_socket
)PY";

std::atomic<unsigned long> g_run_counter{0};

std::string tail(const std::string& s, std::size_t n) {
  if (s.size() <= n) return s;
  return "..." + s.substr(s.size() - n);
}

struct RunOutput {
  int exit_code = -1;
  bool timed_out = false;
  bool exec_failed = false;
  std::string out;
  std::string err;
  double elapsed = 0.0;
};

RunOutput run_one(const std::string& interpreter, const fs::path& dir,
                  const fs::path& script, long memory_mb, double budget_s) {
  fs::path out_path = dir / "stdout.txt";
  fs::path err_path = dir / "stderr.txt";

  pid_t pid = fork();
  if (pid < 0) throw Error(ErrorKind::SandboxFailure, "fork failed");
  if (pid == 0) {
    if (memory_mb > 0) {
      rlimit lim{};
      lim.rlim_cur = lim.rlim_max =
          static_cast<rlim_t>(memory_mb) * 1024ull * 1024ull;
      setrlimit(RLIMIT_AS, &lim);
    }
    if (chdir(dir.c_str()) != 0) _exit(126);
    int devnull = open("/dev/null", O_RDONLY);
    if (devnull >= 0) dup2(devnull, STDIN_FILENO);
    int out_fd = open("stdout.txt", O_WRONLY | O_CREAT | O_TRUNC, 0644);
    int err_fd = open("stderr.txt", O_WRONLY | O_CREAT | O_TRUNC, 0644);
    if (out_fd >= 0) dup2(out_fd, STDOUT_FILENO);
    if (err_fd >= 0) dup2(err_fd, STDERR_FILENO);
    execlp(interpreter.c_str(), interpreter.c_str(), "-I",
           script.filename().c_str(), static_cast<char*>(nullptr));
    fprintf(stderr, "%s: %s\n", kExecFailedMarker, strerror(errno));
    _exit(127);
  }

  auto start = std::chrono::steady_clock::now();
  RunOutput result;
  int status = 0;
  bool done = false;
  while (true) {
    pid_t r = waitpid(pid, &status, WNOHANG);
    if (r == pid) {
      done = true;
      break;
    }
    if (r < 0) break;
    double elapsed =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (elapsed >= budget_s) break;
    std::this_thread::sleep_for(std::chrono::milliseconds(5));
  }
  if (!done) {
    kill(pid, SIGKILL);
    waitpid(pid, &status, 0);
    result.timed_out = true;
  }
  result.elapsed =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (WIFEXITED(status))
    result.exit_code = WEXITSTATUS(status);
  else if (WIFSIGNALED(status))
    result.exit_code = 128 + WTERMSIG(status);

  std::error_code ec;
  if (fs::exists(out_path, ec)) result.out = read_file(out_path.string());
  if (fs::exists(err_path, ec)) result.err = read_file(err_path.string());
  if (result.err.find(kExecFailedMarker) != std::string::npos) result.exec_failed = true;
  return result;
}

}  // namespace

Sandbox::Sandbox(std::string interpreter, SandboxLimits limits)
    : interpreter_(std::move(interpreter)), limits_(limits) {}

CodeRunResult Sandbox::run(const std::string& code,
                           const std::vector<std::string>& tests) const {
  return run_code_sandboxed(code, tests, limits_, interpreter_);
}

CodeRunResult run_code_sandboxed(const std::string& code,
                                 const std::vector<std::string>& tests,
                                 const SandboxLimits& limits,
                                 const std::string& interpreter) {
  fs::path root = fs::temp_directory_path() /
                  ("judgeflow_sbx_" + std::to_string(getpid()) + "_" +
                   std::to_string(g_run_counter.fetch_add(1)));
  std::error_code ec;
  fs::create_directories(root, ec);
  if (ec) throw Error(ErrorKind::SandboxFailure, "cannot create sandbox dir");

  std::vector<std::string> snippets = tests;
  bool plain_run = snippets.empty();
  if (plain_run) snippets.push_back("");  // one code-only run, reported as <main>

  CodeRunResult result;
  result.passed = true;
  double budget = limits.time_s;

  for (std::size_t i = 0; i < snippets.size(); ++i) {
    fs::path dir = root / ("t" + std::to_string(i));
    fs::create_directories(dir, ec);
    std::string script = std::string(kPreamble) + "\n" + code + "\n";
    if (!plain_run) script += "\n" + snippets[i] + "\n";
    write_file((dir / "main.py").string(), script);

    double remaining = std::max(0.05, budget - result.elapsed);
    RunOutput run = run_one(interpreter, dir, dir / "main.py", limits.memory_mb, remaining);
    result.elapsed += run.elapsed;

    if (run.exec_failed)
      throw Error(ErrorKind::SandboxFailure,
                  "interpreter '" + interpreter + "' could not be started");

    TestOutcome outcome;
    outcome.test = plain_run ? "<main>" : snippets[i];
    if (run.timed_out) {
      outcome.passed = false;
      outcome.error = "timeout after " + format_double(limits.time_s) + "s";
    } else if (run.exit_code == 0) {
      outcome.passed = true;
    } else {
      outcome.passed = false;
      outcome.error = trim(tail(run.err, 2000));
      if (outcome.error.empty())
        outcome.error = "exit code " + std::to_string(run.exit_code);
    }
    if (!outcome.passed) result.passed = false;
    result.stdout_excerpt = tail(run.out, 4000);
    if (!run.err.empty()) result.stderr_excerpt = tail(run.err, 2000);
    result.outcomes.push_back(std::move(outcome));
  }

  if (result.elapsed > limits.time_s) result.elapsed = limits.time_s;
  fs::remove_all(root, ec);
  return result;
}

}  // namespace judgeflow

#pragma once

#include <stdexcept>
#include <string>

namespace judgeflow {

enum class ErrorKind {
  Syntax,            // malformed JSON input
  Schema,            // well-formed JSON, wrong shape
  Validation,        // structural rule broken (dangling alias, bad kind, ...)
  MaxBlocksExceeded, // |order| > M_max
  EmptyWorkflow,     // |order| == 0
  IllegalDiff,       // workflow pair is not one structural action apart
  NoveltyViolation,  // optimizer proposed a previously seen workflow
  OperatorFailure,   // operator could not produce a state update
  SandboxFailure,    // sandboxed run could not be started
  BackendError,      // permanent backend failure (auth, bad request)
  BackendExhausted,  // transient failures exceeded the retry budget
  NoMatch,           // mock backend strict mode: no rule matched
  ParseError,        // no JSON object in a model response
  KeyMismatch,       // rank vector keys differ from the block-name set
  NotAPermutation,   // rank values are not a permutation of 1..M
  NoFailures,        // overall_worst called with zero vectors
  FormatError,       // bad record in an external file
  DuplicateId,       // repeated dataset instance id
  DatasetError,      // bad dataset or split request
  ConfigError,       // bad run configuration
  IoError,           // filesystem trouble
};

const char* error_kind_name(ErrorKind k);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(std::string(error_kind_name(kind)) + ": " + message),
        kind_(kind) {}

  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace judgeflow

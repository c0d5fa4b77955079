#include "judgeflow/util.hpp"

#include <atomic>
#include <cstdio>
#include <exception>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

#include "judgeflow/errors.hpp"

namespace judgeflow {

const char* error_kind_name(ErrorKind k) {
  switch (k) {
    case ErrorKind::Syntax: return "syntax";
    case ErrorKind::Schema: return "schema";
    case ErrorKind::Validation: return "validation";
    case ErrorKind::MaxBlocksExceeded: return "max_blocks_exceeded";
    case ErrorKind::EmptyWorkflow: return "empty_workflow";
    case ErrorKind::IllegalDiff: return "illegal_diff";
    case ErrorKind::NoveltyViolation: return "novelty_violation";
    case ErrorKind::OperatorFailure: return "operator_failure";
    case ErrorKind::SandboxFailure: return "sandbox_failure";
    case ErrorKind::BackendError: return "backend_error";
    case ErrorKind::BackendExhausted: return "backend_exhausted";
    case ErrorKind::NoMatch: return "no_match";
    case ErrorKind::ParseError: return "parse_error";
    case ErrorKind::KeyMismatch: return "key_mismatch";
    case ErrorKind::NotAPermutation: return "not_a_permutation";
    case ErrorKind::NoFailures: return "no_failures";
    case ErrorKind::FormatError: return "format_error";
    case ErrorKind::DuplicateId: return "duplicate_id";
    case ErrorKind::DatasetError: return "dataset_error";
    case ErrorKind::ConfigError: return "config_error";
    case ErrorKind::IoError: return "io_error";
  }
  return "unknown";
}

std::uint64_t fnv1a64(const std::string& data) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : data) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return std::string(buf);
}

std::string canonical_dump(const json& v) {
  // nlohmann::json objects iterate in sorted key order already.
  return v.dump();
}

std::string xml_escape(const std::string& s) {
  std::string out;
  out.reserve(s.size());
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      case '\'': out += "&apos;"; break;
      default: out += c;
    }
  }
  return out;
}

bool extract_first_json_object(const std::string& text, json& out) {
  for (std::size_t start = 0; start < text.size(); ++start) {
    if (text[start] != '{') continue;
    int depth = 0;
    bool in_string = false;
    bool escaped = false;
    for (std::size_t i = start; i < text.size(); ++i) {
      char c = text[i];
      if (in_string) {
        if (escaped) {
          escaped = false;
        } else if (c == '\\') {
          escaped = true;
        } else if (c == '"') {
          in_string = false;
        }
        continue;
      }
      if (c == '"') {
        in_string = true;
      } else if (c == '{') {
        ++depth;
      } else if (c == '}') {
        --depth;
        if (depth == 0) {
          json parsed = json::parse(text.substr(start, i - start + 1),
                                    nullptr, false);
          if (!parsed.is_discarded()) {
            out = std::move(parsed);
            return true;
          }
          break;  // balanced but invalid: try the next '{'
        }
      }
    }
  }
  return false;
}

double u01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

std::string truncate_field(const std::string& s, std::size_t max_len) {
  if (s.size() <= max_len) return s;
  return s.substr(0, max_len) + "...[truncated]";
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::IoError, "cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::IoError, "cannot write " + path);
  out << content;
  if (!out) throw Error(ErrorKind::IoError, "short write to " + path);
}

std::string lower(std::string s) {
  for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

std::string trim(const std::string& s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

void parallel_for(std::size_t n, unsigned threads,
                  const std::function<void(std::size_t)>& fn) {
  if (n == 0) return;
  unsigned workers = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(n)));
  if (workers == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::mutex err_mu;
  std::size_t err_index = n;
  std::exception_ptr err;
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (unsigned w = 0; w < workers; ++w) {
    pool.emplace_back([&]() {
      while (true) {
        std::size_t i = next.fetch_add(1);
        if (i >= n) return;
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(err_mu);
          if (i < err_index) {
            err_index = i;
            err = std::current_exception();
          }
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (err) std::rethrow_exception(err);
}

std::string replace_all(std::string s, const std::string& from,
                        const std::string& to) {
  if (from.empty()) return s;
  std::size_t pos = 0;
  while ((pos = s.find(from, pos)) != std::string::npos) {
    s.replace(pos, from.size(), to);
    pos += to.size();
  }
  return s;
}

std::string format_double(double v) {
  std::ostringstream ss;
  ss.precision(17);
  ss << v;
  return ss.str();
}

}  // namespace judgeflow

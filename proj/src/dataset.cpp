#include "judgeflow/dataset.hpp"

#include <cmath>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

#include "judgeflow/errors.hpp"
#include "judgeflow/sandbox.hpp"

namespace judgeflow {

namespace {

std::string need_string(const json& rec, const std::string& key, int line) {
  if (!rec.contains(key) || !rec[key].is_string())
    throw Error(ErrorKind::FormatError,
                "line " + std::to_string(line) + ": missing string field '" + key + "'");
  return rec[key].get<std::string>();
}

bool is_digit(char c) { return c >= '0' && c <= '9'; }

// Strips thousands separators and currency marks so "$1,234.50" scans as one number.
std::string normalize_numeric_text(const std::string& s) {
  std::string out;
  out.reserve(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    char c = s[i];
    if (c == ',' && i > 0 && i + 1 < s.size() && is_digit(s[i - 1]) && is_digit(s[i + 1]))
      continue;
    if (c == '$') continue;
    out += c;
  }
  return out;
}

bool scan_number_at(const std::string& s, std::size_t i, double& value, std::size_t& end) {
  std::size_t j = i;
  bool neg = false;
  if (j < s.size() && (s[j] == '-' || s[j] == '+')) {
    neg = s[j] == '-';
    ++j;
  }
  if (j >= s.size() || !is_digit(s[j])) return false;
  std::size_t int_start = j;
  while (j < s.size() && is_digit(s[j])) ++j;
  std::size_t frac_start = 0, frac_end = 0;
  if (j + 1 < s.size() && s[j] == '.' && is_digit(s[j + 1])) {
    frac_start = ++j;
    while (j < s.size() && is_digit(s[j])) ++j;
    frac_end = j;
  }
  std::string num = s.substr(int_start, (frac_end ? frac_end : j) - int_start);
  double v = std::stod(num);
  if (neg) v = -v;
  // a/b fraction: denominator must itself be a plain number
  if (j + 1 < s.size() && s[j] == '/' && is_digit(s[j + 1])) {
    std::size_t d = j + 1;
    std::size_t den_start = d;
    while (d < s.size() && is_digit(s[d])) ++d;
    std::size_t den_frac = d;
    if (d + 1 < s.size() && s[d] == '.' && is_digit(s[d + 1])) {
      ++d;
      while (d < s.size() && is_digit(s[d])) ++d;
    }
    (void)den_frac;
    double den = std::stod(s.substr(den_start, d - den_start));
    if (den != 0.0) {
      value = v / den;
      end = d;
      return true;
    }
  }
  value = v;
  end = j;
  return true;
}

}  // namespace

std::vector<TaskInstance> load_dataset(const std::string& path, const std::string& kind) {
  if (kind != "math" && kind != "code")
    throw Error(ErrorKind::DatasetError, "unknown dataset kind '" + kind + "'");
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::IoError, "cannot read dataset " + path);
  std::vector<TaskInstance> out;
  std::set<std::string> ids;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    json rec = json::parse(line, nullptr, false);
    if (rec.is_discarded() || !rec.is_object())
      throw Error(ErrorKind::FormatError,
                  "line " + std::to_string(lineno) + ": not a JSON object");
    TaskInstance inst;
    inst.id = need_string(rec, "id", lineno);
    inst.question = need_string(rec, "question", lineno);
    if (kind == "math") {
      if (!rec.contains("answer"))
        throw Error(ErrorKind::FormatError,
                    "line " + std::to_string(lineno) + ": missing string field 'answer'");
      inst.answer = rec["answer"].is_string() ? rec["answer"].get<std::string>()
                                              : rec["answer"].dump();
    } else {
      if (!rec.contains("tests") || !rec["tests"].is_array() || rec["tests"].empty())
        throw Error(ErrorKind::FormatError,
                    "line " + std::to_string(lineno) + ": missing non-empty 'tests' array");
      for (const auto& t : rec["tests"]) {
        if (!t.is_string())
          throw Error(ErrorKind::FormatError,
                      "line " + std::to_string(lineno) + ": tests entries must be strings");
        inst.tests.push_back(t.get<std::string>());
      }
      if (rec.contains("entry_point"))
        inst.entry_point = need_string(rec, "entry_point", lineno);
      if (rec.contains("answer"))
        inst.answer = rec["answer"].is_string() ? rec["answer"].get<std::string>()
                                                : rec["answer"].dump();
    }
    if (!ids.insert(inst.id).second)
      throw Error(ErrorKind::DuplicateId,
                  "line " + std::to_string(lineno) + ": duplicate id '" + inst.id + "'");
    out.push_back(std::move(inst));
  }
  return out;
}

DatasetSplit split_dataset(const std::vector<TaskInstance>& all, double ratio,
                           std::uint64_t seed) {
  if (ratio < 0.0 || ratio > 1.0)
    throw Error(ErrorKind::DatasetError, "split ratio must be in [0,1]");
  std::vector<std::size_t> idx(all.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  std::mt19937_64 rng(seed);
  for (std::size_t i = idx.size(); i > 1; --i)
    std::swap(idx[i - 1], idx[rng() % i]);
  std::size_t n_train = static_cast<std::size_t>(ratio * static_cast<double>(all.size()));
  DatasetSplit split;
  split.seed = seed;
  for (std::size_t i = 0; i < idx.size(); ++i)
    (i < n_train ? split.train : split.test).push_back(all[idx[i]]);
  return split;
}

bool extract_last_number(const std::string& text, double& out) {
  std::string s = normalize_numeric_text(text);
  bool found = false;
  double value = 0;
  std::size_t i = 0;
  while (i < s.size()) {
    double v;
    std::size_t end;
    if ((is_digit(s[i]) || ((s[i] == '-' || s[i] == '+') && i + 1 < s.size() && is_digit(s[i + 1]))) &&
        scan_number_at(s, i, v, end)) {
      value = v;
      found = true;
      i = end;
    } else {
      ++i;
    }
  }
  if (found) out = value;
  return found;
}

bool parse_gold_number(const std::string& text, double& out) {
  std::string s = trim(normalize_numeric_text(text));
  double v;
  std::size_t end;
  std::size_t start = 0;
  if (start < s.size() && (s[start] == '-' || s[start] == '+')) {
    if (!scan_number_at(s, start, v, end)) return false;
  } else if (!scan_number_at(s, start, v, end)) {
    return false;
  }
  if (end != s.size()) return extract_last_number(s, out);
  out = v;
  return true;
}

double eval_math(const json& final_state, const std::string& gold) {
  std::string response;
  if (final_state.contains("response") && final_state["response"].is_string())
    response = final_state["response"].get<std::string>();
  else if (final_state.contains("response"))
    response = final_state["response"].dump();
  double got, want;
  if (!extract_last_number(response, got)) return 0.0;
  if (!parse_gold_number(gold, want)) return 0.0;
  double tol = 1e-6 * std::max(1.0, std::fabs(want));
  return std::fabs(got - want) <= tol ? 1.0 : 0.0;
}

std::string extract_code(const json& state) {
  std::string text;
  if (state.contains("code") && state["code"].is_string() &&
      !state["code"].get<std::string>().empty())
    text = state["code"].get<std::string>();
  else if (state.contains("response") && state["response"].is_string())
    text = state["response"].get<std::string>();
  std::size_t fence = text.find("```");
  if (fence == std::string::npos) return text;
  std::size_t body = text.find('\n', fence);
  if (body == std::string::npos) return text;
  ++body;
  std::size_t close = text.find("```", body);
  if (close == std::string::npos) return text.substr(body);
  return text.substr(body, close - body);
}

double eval_code(const json& final_state, const TaskInstance& inst, const Sandbox& sandbox) {
  std::string code = extract_code(final_state);
  CodeRunResult r = sandbox.run(code, inst.tests);
  return r.passed ? 1.0 : 0.0;
}

}  // namespace judgeflow

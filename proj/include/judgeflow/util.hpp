#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace judgeflow {

using json = nlohmann::json;

// FNV-1a over the canonical (sorted-key) dump. Stable across platforms.
std::uint64_t fnv1a64(const std::string& data);
std::string hex64(std::uint64_t v);

// Canonical text of a JSON value: sorted keys, no insignificant whitespace.
std::string canonical_dump(const json& v);

std::string xml_escape(const std::string& s);

// Extracts the first balanced top-level JSON object from free-form text.
// Returns false if none parses.
bool extract_first_json_object(const std::string& text, json& out);

// Uniform double in [0, 1) from the top 53 bits of one engine draw.
// Avoids std::uniform_real_distribution so streams match across stdlibs.
double u01(std::mt19937_64& rng);

std::string truncate_field(const std::string& s, std::size_t max_len);

std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& content);

std::string lower(std::string s);
std::string trim(const std::string& s);

// Runs fn(i) for i in [0, n) on up to `threads` workers. Exceptions from
// workers are rethrown on the caller (first by index wins).
void parallel_for(std::size_t n, unsigned threads,
                  const std::function<void(std::size_t)>& fn);

std::string replace_all(std::string s, const std::string& from,
                        const std::string& to);

std::string format_double(double v);

}  // namespace judgeflow

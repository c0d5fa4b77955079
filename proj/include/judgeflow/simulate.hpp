#pragma once

#include <cstdint>
#include <map>

#include "judgeflow/util.hpp"

namespace judgeflow {

struct AttributionSimConfig {
  int blocks = 3;            // M
  double noise_p = 0.6;      // probability the judge pins the planted block
  int failures = 30;         // T rank vectors per trial
  int trials = 10000;
  std::uint64_t seed = 0;
  unsigned workers = 4;
};

struct AttributionSimResult {
  double recovery_rate = 0.0;
  long long recovered = 0;
  // rank-sum distributions: planted block vs. the best (lowest) other block
  std::map<int, long long> planted_sum_hist;
  std::map<int, long long> best_other_sum_hist;

  json to_json() const;
};

AttributionSimResult simulate_attribution(const AttributionSimConfig& cfg);

}  // namespace judgeflow

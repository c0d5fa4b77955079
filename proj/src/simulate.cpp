#include "judgeflow/simulate.hpp"

#include <random>

#include "judgeflow/errors.hpp"
#include "judgeflow/judge.hpp"
#include "judgeflow/workflow.hpp"

namespace judgeflow {

namespace {

std::vector<int> shuffled(std::vector<int> values, std::mt19937_64& rng) {
  for (std::size_t i = values.size(); i > 1; --i)
    std::swap(values[i - 1], values[rng() % i]);
  return values;
}

}  // namespace

json AttributionSimResult::to_json() const {
  json planted = json::object();
  for (const auto& [sum, count] : planted_sum_hist)
    planted[std::to_string(sum)] = count;
  json other = json::object();
  for (const auto& [sum, count] : best_other_sum_hist)
    other[std::to_string(sum)] = count;
  return json{{"recovery_rate", recovery_rate},
              {"recovered", recovered},
              {"planted_rank_sum_hist", planted},
              {"best_other_rank_sum_hist", other}};
}

AttributionSimResult simulate_attribution(const AttributionSimConfig& cfg) {
  if (cfg.blocks < 1) throw Error(ErrorKind::ConfigError, "blocks must be >= 1");
  if (cfg.noise_p < 0.0 || cfg.noise_p > 1.0)
    throw Error(ErrorKind::ConfigError, "noise probability must be in [0,1]");
  if (cfg.failures < 1) throw Error(ErrorKind::ConfigError, "failures must be >= 1");
  if (cfg.trials < 1) throw Error(ErrorKind::ConfigError, "trials must be >= 1");

  const int m = cfg.blocks;
  std::vector<std::string> names;
  for (int i = 1; i <= m; ++i) names.push_back("b" + std::to_string(i));
  Workflow w;
  w.order = names;  // overall_worst only consults the order

  struct TrialOut {
    bool recovered = false;
    int planted_sum = 0;
    int best_other_sum = 0;
  };
  std::vector<TrialOut> trials(static_cast<std::size_t>(cfg.trials));

  parallel_for(trials.size(), cfg.workers, [&](std::size_t t) {
    // per-trial stream keeps results independent of thread scheduling
    std::mt19937_64 rng(cfg.seed + 0x9E3779B97F4A7C15ull * (t + 1));
    int planted = static_cast<int>(rng() % static_cast<std::uint64_t>(m));

    std::vector<RankVector> vectors;
    vectors.reserve(static_cast<std::size_t>(cfg.failures));
    for (int f = 0; f < cfg.failures; ++f) {
      RankVector rv;
      if (u01(rng) < cfg.noise_p) {
        std::vector<int> others;
        for (int r = 2; r <= m; ++r) others.push_back(r);
        others = shuffled(std::move(others), rng);
        std::size_t oi = 0;
        for (int i = 0; i < m; ++i)
          rv.ranks[names[static_cast<std::size_t>(i)]] =
              i == planted ? 1 : others[oi++];
      } else {
        std::vector<int> all;
        for (int r = 1; r <= m; ++r) all.push_back(r);
        all = shuffled(std::move(all), rng);
        for (int i = 0; i < m; ++i)
          rv.ranks[names[static_cast<std::size_t>(i)]] = all[static_cast<std::size_t>(i)];
      }
      vectors.push_back(std::move(rv));
    }

    std::string selected = overall_worst(vectors, w);
    TrialOut& out = trials[t];
    out.recovered = selected == names[static_cast<std::size_t>(planted)];
    int best_other = 0;
    bool first = true;
    for (int i = 0; i < m; ++i) {
      int sum = 0;
      for (const auto& rv : vectors) sum += rv.ranks.at(names[static_cast<std::size_t>(i)]);
      if (i == planted) {
        out.planted_sum = sum;
      } else if (first || sum < best_other) {
        best_other = sum;
        first = false;
      }
    }
    out.best_other_sum = first ? 0 : best_other;
  });

  AttributionSimResult result;
  for (const auto& t : trials) {
    if (t.recovered) ++result.recovered;
    ++result.planted_sum_hist[t.planted_sum];
    if (m > 1) ++result.best_other_sum_hist[t.best_other_sum];
  }
  result.recovery_rate =
      static_cast<double>(result.recovered) / static_cast<double>(cfg.trials);
  return result;
}

}  // namespace judgeflow

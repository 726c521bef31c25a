#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "swapsim/workload.hpp"

namespace swapsim {

enum class RateDistribution { Uniform, PowerLaw };

struct ScenarioParams {
  std::size_t functions = 160;
  double rate_min = 5;   // requests per minute
  double rate_max = 30;
  RateDistribution rate_dist = RateDistribution::PowerLaw;
  // Density ~ rate^-(1+a), truncated to [rate_min, rate_max]. The default fits a production
  // trace where 85% of functions see <= 1 r/m and 97% <= 60 r/m: 60^-a = 0.03/0.15.
  double rate_tail = std::log(5.0) / std::log(60.0);
  double cv_deadline_ms = 80;
  double nlp_deadline_ms = 200;
  double percentile = 0.98;
  Micros duration = 10 * 60 * kMicrosPerSec;
  std::uint64_t seed = 1;
};

struct Scenario {
  std::vector<ModelProfile> catalog;
  std::vector<FunctionSpec> functions;
  std::vector<FunctionRate> rates;
  Trace trace;
};

// Models assigned round-robin over the catalog, rates drawn from [rate_min, rate_max].
Scenario make_scenario(const ScenarioParams& p, std::vector<ModelProfile> catalog = default_catalog());

bool is_nlp_model(const ModelProfile& m);

}  // namespace swapsim

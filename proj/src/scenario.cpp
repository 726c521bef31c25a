#include "swapsim/scenario.hpp"

#include <cmath>
#include <random>
#include <string>

#include "swapsim/error.hpp"

namespace swapsim {

bool is_nlp_model(const ModelProfile& m) { return m.name.rfind("Bert", 0) == 0; }

Scenario make_scenario(const ScenarioParams& p, std::vector<ModelProfile> catalog) {
  require(!catalog.empty(), ErrorKind::InvalidParameter, "empty catalog");
  require(p.rate_min > 0 && p.rate_max >= p.rate_min, ErrorKind::InvalidParameter, "bad rate range");
  require(p.rate_tail >= 0, ErrorKind::InvalidParameter, "rate_tail must be >= 0");
  Scenario s;
  s.catalog = std::move(catalog);
  std::mt19937_64 rng(p.seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  auto rate = [&](std::mt19937_64& g) {
    const double x = u(g);
    if (p.rate_dist == RateDistribution::Uniform) return p.rate_min + x * (p.rate_max - p.rate_min);
    if (p.rate_tail == 0) return p.rate_min * std::pow(p.rate_max / p.rate_min, x);
    const double lo = std::pow(p.rate_min, -p.rate_tail), hi = std::pow(p.rate_max, -p.rate_tail);
    return std::pow(lo - x * (lo - hi), -1.0 / p.rate_tail);
  };
  for (std::size_t i = 0; i < p.functions; ++i) {
    FunctionSpec f;
    f.id = "f" + std::to_string(i);
    f.model = i % s.catalog.size();
    f.deadline_ms = is_nlp_model(s.catalog[f.model]) ? p.nlp_deadline_ms : p.cv_deadline_ms;
    f.tail_percentile = p.percentile;
    s.functions.push_back(f);
    s.rates.push_back({static_cast<std::uint32_t>(i), rate(rng)});
  }
  s.trace = gen_poisson_trace(s.rates, p.duration, p.seed ^ 0x9e3779b97f4a7c15ULL);
  return s;
}

}  // namespace swapsim

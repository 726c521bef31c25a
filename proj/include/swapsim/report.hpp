#pragma once

#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "swapsim/cluster.hpp"
#include "swapsim/sim.hpp"

namespace swapsim {

inline constexpr const char* kReportFormat = "swapsim-report v1";

// Latency over deadline for every completed request.
std::vector<double> normalized_latencies(const SimReport& rep);

// Nearest-rank quantiles at q = 0, 1/(points-1), ..., 1.
std::vector<std::pair<double, double>> quantile_points(std::vector<double> xs, int points = 101);

double population_variance(const std::vector<double>& xs);

nlohmann::ordered_json report_json(const SimReport& rep, std::uint64_t seed);
nlohmann::ordered_json report_json(const ClusterReport& rep, std::uint64_t seed);

// Per-node detail files. Each starts with a version line; rows carry the node id.
using NodeReports = std::vector<std::pair<int, const SimReport*>>;
void write_requests_csv(std::ostream& out, const NodeReports& nodes);
void write_alpha_csv(std::ostream& out, const NodeReports& nodes);
void write_decisions_csv(std::ostream& out, const NodeReports& nodes);
void write_migrations_csv(std::ostream& out, const ClusterReport& rep);

}  // namespace swapsim

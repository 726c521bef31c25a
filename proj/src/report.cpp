#include "swapsim/report.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>

namespace swapsim {

using nlohmann::ordered_json;

std::vector<double> normalized_latencies(const SimReport& rep) {
  std::vector<double> out;
  for (const auto& r : rep.requests) {
    if (r.rejected || r.end < 0) continue;
    out.push_back(to_ms(r.end - r.arrival) / rep.functions[r.function].deadline_ms);
  }
  return out;
}

std::vector<std::pair<double, double>> quantile_points(std::vector<double> xs, int points) {
  std::vector<std::pair<double, double>> out;
  if (xs.empty() || points < 2) return out;
  std::sort(xs.begin(), xs.end());
  for (int i = 0; i < points; ++i) {
    const double q = static_cast<double>(i) / (points - 1);
    const auto rank = static_cast<std::size_t>(std::max(1.0, std::ceil(q * static_cast<double>(xs.size()))));
    out.push_back({q, xs[rank - 1]});
  }
  return out;
}

double population_variance(const std::vector<double>& xs) {
  if (xs.empty()) return 0;
  const double mean = std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
  double v = 0;
  for (double x : xs) v += (x - mean) * (x - mean);
  return v / static_cast<double>(xs.size());
}

namespace {

ordered_json swaps(const SwapCounts& s) {
  return {{"noswap", s.noswap}, {"from_host", s.from_host}, {"from_gpu", s.from_gpu}, {"no_host_share", s.no_host_share()}};
}

ordered_json function_json(const FunctionReport& f) {
  return {{"id", f.id},
          {"model", f.model},
          {"heaviness", to_string(f.heaviness)},
          {"deadline_ms", f.deadline_ms},
          {"percentile", f.percentile},
          {"requests", f.requests},
          {"completed", f.completed},
          {"rejected", f.rejected},
          {"tail_ms", f.tail_ms},
          {"mean_ms", f.mean_ms},
          {"compliant", f.compliant}};
}

ordered_json cdf(const std::vector<double>& xs) {
  ordered_json a = ordered_json::array();
  for (const auto& [q, x] : quantile_points(xs)) a.push_back({q, x});
  return a;
}

}  // namespace

ordered_json report_json(const SimReport& rep, std::uint64_t seed) {
  const auto norm = normalized_latencies(rep);
  std::uint64_t rejected = 0;
  for (const auto& f : rep.functions) rejected += f.rejected;
  std::vector<double> loads;
  for (const auto& g : rep.gpus) loads.push_back(g.load);
  ordered_json node = {{"id", 0},
                       {"started_s", 0.0},
                       {"functions", rep.functions.size()},
                       {"slo_ratio", rep.slo_ratio()},
                       {"gpu_load", loads},
                       {"load_variance", population_variance(loads)},
                       {"completed", rep.completed()},
                       {"rejected", rejected}};
  ordered_json fs = ordered_json::array();
  for (const auto& f : rep.functions) {
    auto j = function_json(f);
    j["home"] = 0;
    j["migrations"] = 0;
    j["window_start_s"] = 0.0;
    fs.push_back(std::move(j));
  }
  return {{"format", kReportFormat},
          {"mode", "node"},
          {"policy", rep.policy},
          {"seed", seed},
          {"duration_s", static_cast<double>(rep.duration) / 1e6},
          {"function_count", rep.functions.size()},
          {"slo_ratio", rep.slo_ratio()},
          {"completed", rep.completed()},
          {"rejected", rejected},
          {"normalized_p99", tail_latency(norm, 0.99)},
          {"swaps", {{"light", swaps(rep.light)}, {"heavy", swaps(rep.heavy)}}},
          {"native_calls", rep.native_calls},
          {"consolidated_blocks", rep.consolidated_blocks},
          {"nodes", ordered_json::array({node})},
          {"latency_cdf", cdf(norm)},
          {"functions", fs}};
}

ordered_json report_json(const ClusterReport& rep, std::uint64_t seed) {
  std::uint64_t completed = 0, rejected = 0;
  ordered_json nodes = ordered_json::array();
  for (const auto& n : rep.nodes) {
    completed += n.completed;
    rejected += n.rejected;
    nodes.push_back({{"id", n.id},
                     {"started_s", static_cast<double>(n.started) / 1e6},
                     {"functions", n.functions},
                     {"slo_ratio", n.slo_ratio},
                     {"gpu_load", n.gpu_load},
                     {"load_variance", n.load_variance},
                     {"completed", n.completed},
                     {"rejected", n.rejected}});
  }
  ordered_json fs = ordered_json::array();
  for (const auto& f : rep.functions) {
    auto j = function_json(f.stats);
    j["home"] = f.home;
    j["migrations"] = f.migrations;
    j["window_start_s"] = static_cast<double>(f.window_start) / 1e6;
    fs.push_back(std::move(j));
  }
  ordered_json counts = ordered_json::array();
  for (const auto& [t, n] : rep.node_count) counts.push_back({static_cast<double>(t) / 1e6, n});
  return {{"format", kReportFormat},
          {"mode", "cluster"},
          {"policy", rep.policy},
          {"seed", seed},
          {"duration_s", static_cast<double>(rep.duration) / 1e6},
          {"function_count", rep.functions.size()},
          {"slo_ratio", rep.slo_ratio()},
          {"completed", completed},
          {"rejected", rejected},
          {"normalized_p99", rep.normalized_p99()},
          {"swaps", {{"light", swaps(rep.light)}, {"heavy", swaps(rep.heavy)}}},
          {"nodes", nodes},
          {"latency_cdf", cdf(rep.normalized_latency)},
          {"functions", fs},
          {"cluster",
           {{"migrations", rep.moved()},
            {"deferred", rep.deferred},
            {"node_count", counts},
            // A migrated function's SLO counters restart on its new home; its tail covers that window only.
            {"slo_window", "post-migration"}}}};
}

void write_requests_csv(std::ostream& out, const NodeReports& nodes) {
  out << "# swapsim-requests v1\n";
  out << "node,id,function,arrival_us,start_us,end_us,gpu,kind,src,rejected\n";
  for (const auto& [node, rep] : nodes) {
    for (const auto& r : rep->requests) {
      out << node << ',' << r.id << ',' << rep->functions[r.function].id << ',' << r.arrival << ',' << r.start << ','
          << r.end << ',' << r.gpu << ',' << to_string(r.kind) << ',' << r.src << ',' << (r.rejected ? 1 : 0) << '\n';
    }
  }
}

void write_alpha_csv(std::ostream& out, const NodeReports& nodes) {
  out << "# swapsim-alpha v1\n";
  out << "node,time_us,alpha,high,low,slo_ratio\n";
  for (const auto& [node, rep] : nodes) {
    for (const auto& a : rep->alpha) {
      out << node << ',' << a.time << ',' << format_double(a.alpha) << ',' << a.high_count << ',' << a.low_count << ','
          << format_double(a.slo_ratio) << '\n';
    }
  }
}

void write_decisions_csv(std::ostream& out, const NodeReports& nodes) {
  out << "# swapsim-decisions v1\n";
  out << "node,request,time_us,gpu,kind,src,victims\n";
  for (const auto& [node, rep] : nodes) {
    for (const auto& d : rep->decisions) {
      out << node << ',' << d.request << ',' << d.time << ',' << d.gpu << ',' << to_string(d.kind) << ',' << d.src << ',';
      for (std::size_t i = 0; i < d.victims.size(); ++i) out << (i ? ";" : "") << rep->functions[d.victims[i]].id;
      out << '\n';
    }
  }
}

void write_migrations_csv(std::ostream& out, const ClusterReport& rep) {
  out << "# swapsim-migrations v1\n";
  out << "time_us,function,from,to,ready_us,provisioned,deferred,src_load,dst_load\n";
  for (const auto& m : rep.migrations) {
    out << m.time << ',' << rep.functions[m.function].stats.id << ',' << m.from << ',' << m.to << ',' << m.ready << ','
        << (m.provisioned ? 1 : 0) << ',' << (m.deferred ? 1 : 0) << ',' << format_double(m.src_load) << ','
        << format_double(m.dst_load) << '\n';
  }
}

}  // namespace swapsim

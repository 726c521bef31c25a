#include "swapsim/config.hpp"

#include <algorithm>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>

#include "swapsim/error.hpp"

namespace swapsim {

namespace {

constexpr const char* kConfigVersion = "# swapsim-config v1";

Bytes mib(double v) { return static_cast<Bytes>(std::llround(v * static_cast<double>(MiB))); }
Micros ms(double v) { return static_cast<Micros>(std::llround(v * 1000.0)); }

void check(bool ok, const std::string& field, const std::string& rule) {
  require(ok, ErrorKind::Config, field + ": " + rule);
}

bool valid_id(const std::string& id) {
  return !id.empty() && std::all_of(id.begin(), id.end(), [](char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-';
  });
}

double to_double(const std::string& field, const std::string& v) {
  try {
    std::size_t used = 0;
    const double d = std::stod(v, &used);
    if (used == v.size() && std::isfinite(d)) return d;
  } catch (const std::exception&) {
  }
  fail(ErrorKind::Config, field + ": expected a number, got '" + v + "'");
}

long long to_int(const std::string& field, const std::string& v) {
  try {
    std::size_t used = 0;
    const long long i = std::stoll(v, &used);
    if (used == v.size()) return i;
  } catch (const std::exception&) {
  }
  fail(ErrorKind::Config, field + ": expected an integer, got '" + v + "'");
}

bool to_bool(const std::string& field, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  fail(ErrorKind::Config, field + ": expected true or false, got '" + v + "'");
}

using Setter = std::function<void(const std::string& field, const std::string& value)>;
using Section = std::map<std::string, Setter>;

Setter num(double& x) {
  return [&x](const std::string& f, const std::string& v) { x = to_double(f, v); };
}
Setter integer(int& x) {
  return [&x](const std::string& f, const std::string& v) {
    const long long i = to_int(f, v);
    check(i >= INT32_MIN && i <= INT32_MAX, f, "out of range");
    x = static_cast<int>(i);
  };
}
Setter count(std::size_t& x) {
  return [&x](const std::string& f, const std::string& v) {
    const long long i = to_int(f, v);
    check(i >= 0, f, "must be >= 0");
    x = static_cast<std::size_t>(i);
  };
}
Setter u64(std::uint64_t& x) {
  return [&x](const std::string& f, const std::string& v) {
    check(!v.empty() && v[0] != '-', f, "must be >= 0");
    try {
      std::size_t used = 0;
      x = std::stoull(v, &used);
      check(used == v.size(), f, "expected an integer");
    } catch (const std::logic_error&) {
      fail(ErrorKind::Config, f + ": expected an integer, got '" + v + "'");
    }
  };
}
Setter flag(bool& x) {
  return [&x](const std::string& f, const std::string& v) { x = to_bool(f, v); };
}
Setter text(std::string& x) {
  return [&x](const std::string&, const std::string& v) { x = v; };
}

std::map<std::string, Section> schema(SimConfig& c) {
  return {
      {"run",
       {{"policy", text(c.policy)},
        {"duration_s", num(c.duration_s)},
        {"seed", u64(c.seed)},
        {"preload", flag(c.preload)},
        {"routing_overhead_ms", num(c.routing_overhead_ms)}}},
      {"topology",
       {{"preset", text(c.preset)},
        {"gpus", integer(c.gpus)},
        {"pcie_gib_s", num(c.pcie_gib_s)},
        {"host_gib_s", num(c.host_gib_s)},
        {"nvlink_slow_gib_s", num(c.nvlink_slow_gib_s)},
        {"gpu_memory_gib", num(c.gpu_memory_gib)}}},
      {"memory",
       {{"partition_mib", num(c.partition_mib)},
        {"fixed_block_mib", num(c.fixed_block_mib)},
        {"runtime_reserve_mib", num(c.runtime_reserve_mib)},
        {"buddy_min_mib", num(c.buddy_min_mib)},
        {"native_alloc_ms", num(c.native_alloc_ms)},
        {"consolidate_period_ms", num(c.consolidate_period_ms)}}},
      {"transfer", {{"group_size_mib", num(c.group_size_mib)}, {"pipeline", flag(c.pipeline)}}},
      {"queueing",
       {{"alpha0", num(c.alpha0)},
        {"scalar", num(c.scalar)},
        {"threshold", num(c.threshold)},
        {"period_ms", num(c.period_ms)},
        {"burst_factor", num(c.burst_factor)}}},
      {"model",
       {{"catalog", text(c.catalog)},
        {"slowdown_threshold", num(c.slowdown_threshold)},
        {"private_runtime_mib", num(c.private_runtime_mib)}}},
      {"workload",
       {{"trace", text(c.trace)},
        {"functions", count(c.functions)},
        {"rate_min", num(c.rate_min)},
        {"rate_max", num(c.rate_max)},
        {"rate_dist", text(c.rate_dist)},
        {"rate_tail", num(c.rate_tail)},
        {"cv_deadline_ms", num(c.cv_deadline_ms)},
        {"nlp_deadline_ms", num(c.nlp_deadline_ms)},
        {"percentile", num(c.percentile)}}},
      {"cluster",
       {{"nodes", integer(c.nodes)},
        {"max_nodes", integer(c.max_nodes)},
        {"period_ms", num(c.cluster_period_ms)},
        {"low_periods", integer(c.low_periods)},
        {"headroom", num(c.headroom)},
        {"network_gbps", num(c.network_gbps)},
        {"rate_smoothing", num(c.rate_smoothing)},
        {"parallel", flag(c.parallel)}}},
  };
}

Section function_schema(FunctionEntry& e) {
  return {{"model", text(e.model)},
          {"rate_per_min", num(e.rate_per_min)},
          {"deadline_ms", num(e.deadline_ms)},
          {"percentile", num(e.percentile)}};
}

std::string b(bool v) { return v ? "true" : "false"; }

}  // namespace

std::string SimConfig::resolve(const std::string& path) const {
  if (path.empty()) return path;
  const std::filesystem::path p(path);
  return p.is_absolute() ? path : (std::filesystem::path(base_dir) / p).string();
}

void SimConfig::validate() const {
  const auto& names = policy_names();
  check(std::find(names.begin(), names.end(), policy) != names.end(), "run.policy", "unknown policy '" + policy + "'");
  check(duration_s > 0, "run.duration_s", "must be > 0");
  check(routing_overhead_ms >= 0, "run.routing_overhead_ms", "must be >= 0");
  check(preset == "v100" || preset == "pcie", "topology.preset", "must be v100 or pcie");
  if (preset == "v100") check(gpus == 4, "topology.gpus", "the v100 preset has exactly 4 GPUs");
  check(gpus >= 1 && gpus <= 64, "topology.gpus", "must be in [1, 64]");
  check(pcie_gib_s > 0, "topology.pcie_gib_s", "must be > 0");
  check(host_gib_s >= 0, "topology.host_gib_s", "must be >= 0");
  check(nvlink_slow_gib_s > 0, "topology.nvlink_slow_gib_s", "must be > 0");
  check(gpu_memory_gib > 0, "topology.gpu_memory_gib", "must be > 0");
  check(partition_mib > 0, "memory.partition_mib", "must be > 0");
  check(fixed_block_mib > 0 && fixed_block_mib <= partition_mib, "memory.fixed_block_mib", "must be in (0, partition_mib]");
  check(runtime_reserve_mib >= 0 && runtime_reserve_mib < gpu_memory_gib * 1024, "memory.runtime_reserve_mib",
        "must be in [0, gpu memory)");
  check(buddy_min_mib > 0, "memory.buddy_min_mib", "must be > 0");
  check(native_alloc_ms >= 0, "memory.native_alloc_ms", "must be >= 0");
  check(consolidate_period_ms > 0, "memory.consolidate_period_ms", "must be > 0");
  check(group_size_mib > 0, "transfer.group_size_mib", "must be > 0");
  check(alpha0 >= 0 && alpha0 <= 1, "queueing.alpha0", "must be in [0, 1]");
  check(scalar > 1, "queueing.scalar", "must be > 1");
  check(threshold >= 0 && threshold < 1, "queueing.threshold", "must be in [0, 1)");
  check(period_ms > 0, "queueing.period_ms", "must be > 0");
  check(burst_factor > 0, "queueing.burst_factor", "must be > 0");
  check(slowdown_threshold >= 1, "model.slowdown_threshold", "must be >= 1");
  check(private_runtime_mib >= 0, "model.private_runtime_mib", "must be >= 0");
  if (!catalog.empty()) check(std::filesystem::exists(resolve(catalog)), "model.catalog", "file not found: " + catalog);
  if (!trace.empty()) check(std::filesystem::exists(resolve(trace)), "workload.trace", "file not found: " + trace);
  if (function_list.empty()) check(functions >= 1, "workload.functions", "must be >= 1");
  check(rate_min > 0, "workload.rate_min", "must be > 0");
  check(rate_max >= rate_min, "workload.rate_max", "must be >= rate_min");
  check(rate_dist == "powerlaw" || rate_dist == "uniform", "workload.rate_dist", "must be powerlaw or uniform");
  check(rate_tail >= 0, "workload.rate_tail", "must be >= 0");
  check(cv_deadline_ms > 0, "workload.cv_deadline_ms", "must be > 0");
  check(nlp_deadline_ms > 0, "workload.nlp_deadline_ms", "must be > 0");
  check(percentile > 0 && percentile < 1, "workload.percentile", "must be in (0, 1)");
  std::set<std::string> ids;
  for (const auto& f : function_list) {
    const std::string at = "function." + f.id;
    check(valid_id(f.id), at, "id must be letters, digits, '_' or '-'");
    check(ids.insert(f.id).second, at, "duplicate function");
    check(!f.model.empty(), at + ".model", "required");
    check(f.rate_per_min >= 0, at + ".rate_per_min", "must be >= 0");
    check(f.deadline_ms > 0, at + ".deadline_ms", "must be > 0");
    check(f.percentile > 0 && f.percentile < 1, at + ".percentile", "must be in (0, 1)");
  }
  check(nodes >= 1, "cluster.nodes", "must be >= 1");
  check(max_nodes >= nodes, "cluster.max_nodes", "must be >= cluster.nodes");
  check(cluster_period_ms > 0, "cluster.period_ms", "must be > 0");
  check(low_periods >= 1, "cluster.low_periods", "must be >= 1");
  check(headroom > 0 && headroom <= 1, "cluster.headroom", "must be in (0, 1]");
  check(network_gbps > 0, "cluster.network_gbps", "must be > 0");
  check(rate_smoothing > 0 && rate_smoothing <= 1, "cluster.rate_smoothing", "must be in (0, 1]");
}

EngineConfig SimConfig::engine() const {
  EngineConfig e;
  if (preset == "v100") {
    e.topology = default_v100_params();
  } else {
    e.topology = TopologyParams{};
    e.topology.gpu_count = gpus;
    for (int g = 0; g < gpus; g += 2) {
      e.topology.pcie_groups.push_back({g});
      if (g + 1 < gpus) e.topology.pcie_groups.back().push_back(g + 1);
    }
    e.topology.nvlink.clear();
  }
  const double gib = static_cast<double>(GiB);
  e.topology.pcie_bandwidth = pcie_gib_s * gib;
  e.topology.host_link_bandwidth = host_gib_s * gib;
  e.topology.nvlink_slow_bandwidth = nvlink_slow_gib_s * gib;
  e.topology.gpu_memory = static_cast<Bytes>(std::llround(gpu_memory_gib * gib));
  e.memory.partition_size = mib(partition_mib);
  e.memory.fixed_block = mib(fixed_block_mib);
  e.memory.runtime_reserve = mib(runtime_reserve_mib);
  e.memory.buddy_min = mib(buddy_min_mib);
  e.native_alloc_ms = native_alloc_ms;
  e.consolidate_period = ms(consolidate_period_ms);
  e.group_size = mib(group_size_mib);
  e.pipeline = pipeline;
  e.queue.alpha0 = alpha0;
  e.queue.scalar = scalar;
  e.queue.threshold = threshold;
  e.period = ms(period_ms);
  e.burst_factor = burst_factor;
  e.private_runtime = mib(private_runtime_mib);
  e.routing_overhead_ms = routing_overhead_ms;
  e.preload = preload;
  e.seed = seed;
  e.policy = policy_select(policy);
  return e;
}

ClusterConfig SimConfig::cluster() const {
  ClusterConfig c;
  c.node = engine();
  c.nodes = nodes;
  c.max_nodes = max_nodes;
  c.period = ms(cluster_period_ms);
  c.low_periods = low_periods;
  c.headroom = headroom;
  c.network_gbps = network_gbps;
  c.rate_smoothing = rate_smoothing;
  c.parallel = parallel;
  return c;
}

SimConfig parse_config(std::istream& in, const std::string& base_dir) {
  std::stringstream buf;
  buf << in.rdbuf();
  const std::string text = buf.str();
  {
    std::istringstream lines(text);
    std::string first;
    while (std::getline(lines, first)) {
      first.erase(0, first.find_first_not_of(" \t\r"));
      if (!first.empty()) break;
    }
    while (!first.empty() && (first.back() == '\r' || first.back() == ' ')) first.pop_back();
    require(first == kConfigVersion, ErrorKind::Config, std::string("config: first line must be '") + kConfigVersion + "'");
  }
  namespace pt = boost::property_tree;
  pt::ptree tree;
  try {
    std::istringstream s(text);
    pt::read_ini(s, tree);
  } catch (const pt::ini_parser_error& e) {
    fail(ErrorKind::Config, std::string("config: ") + e.what());
  }

  SimConfig c;
  c.base_dir = base_dir;
  auto sections = schema(c);
  for (const auto& [name, sec] : tree) {
    require(!sec.empty() || sec.data().empty(), ErrorKind::Config, name + ": key outside any section");
    Section fn;
    const Section* keys = nullptr;
    if (name.rfind("function.", 0) == 0) {
      c.function_list.push_back({});
      c.function_list.back().id = name.substr(9);
      fn = function_schema(c.function_list.back());
      keys = &fn;
    } else {
      auto it = sections.find(name);
      require(it != sections.end(), ErrorKind::Config, name + ": unknown section");
      keys = &it->second;
    }
    for (const auto& [key, val] : sec) {
      const std::string field = name + "." + key;
      auto k = keys->find(key);
      require(k != keys->end(), ErrorKind::Config, field + ": unknown key");
      k->second(field, val.data());
    }
  }
  c.validate();
  return c;
}

void apply_override(SimConfig& cfg, const std::string& assignment) {
  const auto eq = assignment.find('=');
  require(eq != std::string::npos, ErrorKind::Config, "override '" + assignment + "': expected section.key=value");
  auto trim = [](std::string x) {
    x.erase(0, x.find_first_not_of(" \t"));
    x.erase(x.find_last_not_of(" \t") + 1);
    return x;
  };
  const std::string lhs = trim(assignment.substr(0, eq));
  const std::string value = trim(assignment.substr(eq + 1));
  const auto dot = lhs.rfind('.');
  require(dot != std::string::npos && dot > 0, ErrorKind::Config, "override '" + assignment + "': expected section.key=value");
  const std::string section = lhs.substr(0, dot), key = lhs.substr(dot + 1);
  if (section.rfind("function.", 0) == 0) {
    const std::string id = section.substr(9);
    auto it = std::find_if(cfg.function_list.begin(), cfg.function_list.end(), [&](const FunctionEntry& e) { return e.id == id; });
    if (it == cfg.function_list.end()) {
      cfg.function_list.push_back({});
      cfg.function_list.back().id = id;
      it = cfg.function_list.end() - 1;
    }
    auto keys = function_schema(*it);
    auto k = keys.find(key);
    require(k != keys.end(), ErrorKind::Config, lhs + ": unknown key");
    k->second(lhs, value);
  } else {
    auto sections = schema(cfg);
    auto s = sections.find(section);
    require(s != sections.end(), ErrorKind::Config, section + ": unknown section");
    auto k = s->second.find(key);
    require(k != s->second.end(), ErrorKind::Config, lhs + ": unknown key");
    k->second(lhs, value);
  }
  cfg.validate();
}

SimConfig load_config(const std::string& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorKind::Config, "config: cannot open " + path);
  const auto dir = std::filesystem::path(path).parent_path();
  return parse_config(in, dir.empty() ? "." : dir.string());
}

void write_config(std::ostream& out, const SimConfig& c) {
  auto d = [](double v) { return format_double(v); };
  out << kConfigVersion << "\n";
  out << "\n[run]\n"
      << "policy = " << c.policy << "\n"
      << "duration_s = " << d(c.duration_s) << "\n"
      << "seed = " << c.seed << "\n"
      << "preload = " << b(c.preload) << "\n"
      << "routing_overhead_ms = " << d(c.routing_overhead_ms) << "\n";
  out << "\n[topology]\n"
      << "preset = " << c.preset << "\n"
      << "gpus = " << c.gpus << "\n"
      << "pcie_gib_s = " << d(c.pcie_gib_s) << "\n"
      << "host_gib_s = " << d(c.host_gib_s) << "\n"
      << "nvlink_slow_gib_s = " << d(c.nvlink_slow_gib_s) << "\n"
      << "gpu_memory_gib = " << d(c.gpu_memory_gib) << "\n";
  out << "\n[memory]\n"
      << "partition_mib = " << d(c.partition_mib) << "\n"
      << "fixed_block_mib = " << d(c.fixed_block_mib) << "\n"
      << "runtime_reserve_mib = " << d(c.runtime_reserve_mib) << "\n"
      << "buddy_min_mib = " << d(c.buddy_min_mib) << "\n"
      << "native_alloc_ms = " << d(c.native_alloc_ms) << "\n"
      << "consolidate_period_ms = " << d(c.consolidate_period_ms) << "\n";
  out << "\n[transfer]\n"
      << "group_size_mib = " << d(c.group_size_mib) << "\n"
      << "pipeline = " << b(c.pipeline) << "\n";
  out << "\n[queueing]\n"
      << "alpha0 = " << d(c.alpha0) << "\n"
      << "scalar = " << d(c.scalar) << "\n"
      << "threshold = " << d(c.threshold) << "\n"
      << "period_ms = " << d(c.period_ms) << "\n"
      << "burst_factor = " << d(c.burst_factor) << "\n";
  out << "\n[model]\n"
      << "catalog = " << c.catalog << "\n"
      << "slowdown_threshold = " << d(c.slowdown_threshold) << "\n"
      << "private_runtime_mib = " << d(c.private_runtime_mib) << "\n";
  out << "\n[workload]\n"
      << "trace = " << c.trace << "\n"
      << "functions = " << c.functions << "\n"
      << "rate_min = " << d(c.rate_min) << "\n"
      << "rate_max = " << d(c.rate_max) << "\n"
      << "rate_dist = " << c.rate_dist << "\n"
      << "rate_tail = " << d(c.rate_tail) << "\n"
      << "cv_deadline_ms = " << d(c.cv_deadline_ms) << "\n"
      << "nlp_deadline_ms = " << d(c.nlp_deadline_ms) << "\n"
      << "percentile = " << d(c.percentile) << "\n";
  out << "\n[cluster]\n"
      << "nodes = " << c.nodes << "\n"
      << "max_nodes = " << c.max_nodes << "\n"
      << "period_ms = " << d(c.cluster_period_ms) << "\n"
      << "low_periods = " << c.low_periods << "\n"
      << "headroom = " << d(c.headroom) << "\n"
      << "network_gbps = " << d(c.network_gbps) << "\n"
      << "rate_smoothing = " << d(c.rate_smoothing) << "\n"
      << "parallel = " << b(c.parallel) << "\n";
  for (const auto& f : c.function_list) {
    out << "\n[function." << f.id << "]\n"
        << "model = " << f.model << "\n"
        << "rate_per_min = " << d(f.rate_per_min) << "\n"
        << "deadline_ms = " << d(f.deadline_ms) << "\n"
        << "percentile = " << d(f.percentile) << "\n";
  }
}

Workload build_workload(const SimConfig& cfg) {
  cfg.validate();
  Workload w;
  SwapCalibration cal;
  cal.host_bandwidth = cfg.pcie_gib_s * static_cast<double>(GiB);
  cal.group_size = mib(cfg.group_size_mib);
  const Bytes fixed = mib(cfg.fixed_block_mib);
  w.catalog = cfg.catalog.empty() ? default_catalog(cal, cfg.slowdown_threshold, fixed)
                                  : load_model_catalog(cfg.resolve(cfg.catalog), cal, cfg.slowdown_threshold, fixed);
  const auto duration = static_cast<Micros>(std::llround(cfg.duration_s * 1e6));
  std::vector<FunctionRate> rates;
  if (cfg.function_list.empty()) {
    ScenarioParams p;
    p.functions = cfg.functions;
    p.rate_min = cfg.rate_min;
    p.rate_max = cfg.rate_max;
    p.rate_dist = cfg.rate_dist == "uniform" ? RateDistribution::Uniform : RateDistribution::PowerLaw;
    p.rate_tail = cfg.rate_tail;
    p.cv_deadline_ms = cfg.cv_deadline_ms;
    p.nlp_deadline_ms = cfg.nlp_deadline_ms;
    p.percentile = cfg.percentile;
    p.duration = duration;
    p.seed = cfg.seed;
    auto sc = make_scenario(p, w.catalog);
    w.functions = std::move(sc.functions);
    rates = std::move(sc.rates);
    w.trace = std::move(sc.trace);
  } else {
    for (std::uint32_t i = 0; i < cfg.function_list.size(); ++i) {
      const auto& e = cfg.function_list[i];
      auto it = std::find_if(w.catalog.begin(), w.catalog.end(), [&](const ModelProfile& m) { return m.name == e.model; });
      require(it != w.catalog.end(), ErrorKind::Config, "function." + e.id + ".model: unknown model '" + e.model + "'");
      w.functions.push_back({e.id, static_cast<std::size_t>(it - w.catalog.begin()), e.deadline_ms, e.percentile});
      rates.push_back({i, e.rate_per_min});
    }
    w.trace = gen_poisson_trace(rates, duration, cfg.seed ^ 0x9e3779b97f4a7c15ULL);
  }
  for (const auto& r : rates) w.rate_per_min.push_back(r.rate_per_minute);
  if (!cfg.trace.empty()) {
    w.trace = load_trace(cfg.resolve(cfg.trace), w.functions);
    const double minutes = static_cast<double>(std::max<Micros>(w.trace.duration, 1)) / 60e6;
    std::fill(w.rate_per_min.begin(), w.rate_per_min.end(), 0.0);
    for (const auto& r : w.trace.requests) w.rate_per_min[r.function] += 1.0 / minutes;
  }
  return w;
}

}  // namespace swapsim

#include "swapsim/cluster.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>
#include <numeric>

#include "swapsim/error.hpp"

namespace swapsim {

void ClusterConfig::validate() const {
  require(nodes >= 1, ErrorKind::Config, "cluster.nodes must be >= 1");
  require(max_nodes >= nodes, ErrorKind::Config, "cluster.max_nodes must be >= cluster.nodes");
  require(period > 0, ErrorKind::Config, "cluster.period_ms must be > 0");
  require(low_periods >= 1, ErrorKind::Config, "cluster.low_periods must be >= 1");
  require(headroom > 0 && headroom <= 1, ErrorKind::Config, "cluster.headroom must be in (0, 1]");
  require(network_gbps > 0, ErrorKind::Config, "cluster.network_gbps must be > 0");
  require(rate_smoothing > 0 && rate_smoothing <= 1, ErrorKind::Config, "cluster.rate_smoothing must be in (0, 1]");
}

std::vector<int> place_initial(const std::vector<double>& loads, int nodes) {
  require(nodes >= 1, ErrorKind::InvalidParameter, "placement needs at least one node");
  std::vector<std::size_t> order(loads.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return loads[a] > loads[b]; });
  std::vector<double> sum(static_cast<std::size_t>(nodes), 0.0);
  std::vector<int> out(loads.size(), 0);
  for (std::size_t f : order) {
    const auto best = static_cast<std::size_t>(std::min_element(sum.begin(), sum.end()) - sum.begin());
    out[f] = static_cast<int>(best);
    sum[best] += loads[f];
  }
  return out;
}

double ClusterReport::slo_ratio() const {
  std::size_t total = 0, ok = 0;
  for (const auto& f : functions) {
    if (f.stats.requests == 0) continue;
    ++total;
    ok += f.stats.compliant ? 1 : 0;
  }
  return total ? static_cast<double>(ok) / static_cast<double>(total) : 1.0;
}

double ClusterReport::normalized_p99() const { return tail_latency(normalized_latency, 0.99); }

std::size_t ClusterReport::moved() const {
  return static_cast<std::size_t>(
      std::count_if(migrations.begin(), migrations.end(), [](const Migration& m) { return !m.deferred; }));
}

namespace {

template <class Fn>
void for_nodes(std::size_t n, bool parallel, Fn&& fn) {
  std::exception_ptr err;
#pragma omp parallel for schedule(dynamic, 1) if (parallel)
  for (std::size_t i = 0; i < n; ++i) {
    try {
      fn(i);
    } catch (...) {
#pragma omp critical
      if (!err) err = std::current_exception();
    }
  }
  if (err) std::rethrow_exception(err);
}

}  // namespace

Cluster::Cluster(ClusterConfig cfg, std::vector<ModelProfile> catalog, std::vector<FunctionSpec> functions,
                 std::vector<double> expected_rate)
    : cfg_(std::move(cfg)), catalog_(std::move(catalog)), functions_(std::move(functions)), rate_(std::move(expected_rate)) {
  cfg_.validate();
  const auto n = functions_.size();
  require(rate_.size() == n, ErrorKind::InvalidParameter, "expected rate count must match function count");
  for (const auto& f : functions_) {
    f.validate();
    require(f.model < catalog_.size(), ErrorKind::Reference, "function '" + f.id + "' references unknown model");
  }
  for (double r : rate_) require(r >= 0 && std::isfinite(r), ErrorKind::InvalidParameter, "expected rate must be >= 0");
  std::vector<double> loads(n);
  for (std::uint32_t f = 0; f < n; ++f) loads[f] = function_load(f);
  placement_ = place_initial(loads, cfg_.nodes);
  seen_.assign(n, 0);
  held_until_.assign(n, 0);
  moves_.assign(n, 0);
  window_start_.assign(n, 0);
  for (int i = 0; i < cfg_.nodes; ++i) {
    std::vector<bool> active(n);
    for (std::uint32_t f = 0; f < n; ++f) active[f] = placement_[f] == i;
    EngineConfig ec = cfg_.node;
    ec.seed = cfg_.node.seed + static_cast<std::uint64_t>(i);
    nodes_.push_back(std::make_unique<Engine>(ec, catalog_, functions_, std::move(active)));
    nodes_.back()->set_expect_more(true);
    started_.push_back(0);
  }
  node_count_.push_back({0, cfg_.nodes});
}

Cluster::~Cluster() = default;

double Cluster::function_load(std::uint32_t f) const {
  return rate_.at(f) / 60.0 * catalog_[functions_[f].model].exec_ms / 1000.0;
}

double Cluster::node_load(int n) const {
  double s = 0;
  for (std::uint32_t f = 0; f < functions_.size(); ++f)
    if (placement_[f] == n) s += function_load(f);
  return s;
}

void Cluster::inject(const Trace& trace, std::size_t& cursor, Micros until) {
  for (; cursor < trace.requests.size() && trace.requests[cursor].arrival < until; ++cursor) {
    const auto& r = trace.requests[cursor];
    const Micros release = held_until_[r.function] > r.arrival ? held_until_[r.function] : -1;
    nodes_[static_cast<std::size_t>(placement_[r.function])]->add_arrival(r.function, r.arrival, release);
    ++seen_[r.function];
  }
}

void Cluster::advance(Micros t) {
  for_nodes(nodes_.size(), cfg_.parallel, [&](std::size_t i) { nodes_[i]->run_until(t); });
  const double elapsed_min = static_cast<double>(t - last_period_) / 60e6;
  if (elapsed_min > 0) {
    const double w = cfg_.rate_smoothing;
    for (std::size_t f = 0; f < rate_.size(); ++f) {
      rate_[f] = (1 - w) * rate_[f] + w * static_cast<double>(seen_[f]) / elapsed_min;
      seen_[f] = 0;
    }
  }
  last_period_ = t;
}

int Cluster::provision(Micros t) {
  const int id = static_cast<int>(nodes_.size());
  EngineConfig ec = cfg_.node;
  ec.seed = cfg_.node.seed + static_cast<std::uint64_t>(id);
  nodes_.push_back(std::make_unique<Engine>(ec, catalog_, functions_, std::vector<bool>(functions_.size(), false)));
  nodes_.back()->set_expect_more(true);
  nodes_.back()->run_until(t);
  started_.push_back(t);
  node_count_.push_back({t, static_cast<int>(nodes_.size())});
  return id;
}

std::vector<Migration> Cluster::rebalance(Micros t) {
  std::vector<std::uint32_t> cand;
  for (std::uint32_t f = 0; f < functions_.size(); ++f) {
    const auto& e = *nodes_[static_cast<std::size_t>(placement_[f])];
    if (e.active(f) && held_until_[f] <= t && e.low_streak(f) >= cfg_.low_periods) cand.push_back(f);
  }
  std::stable_sort(cand.begin(), cand.end(), [&](std::uint32_t a, std::uint32_t b) {
    const auto& ea = *nodes_[static_cast<std::size_t>(placement_[a])];
    const auto& eb = *nodes_[static_cast<std::size_t>(placement_[b])];
    return ea.low_streak(a) > eb.low_streak(b);
  });

  std::vector<double> load;
  for (int n = 0; n < static_cast<int>(nodes_.size()); ++n) load.push_back(node_load(n));
  std::vector<Migration> out;
  for (std::uint32_t f : cand) {
    const int src = placement_[f];
    const double lf = function_load(f);
    const double before = load[static_cast<std::size_t>(src)];
    auto fits = [&](int n) {
      const double after = load[static_cast<std::size_t>(n)] + lf;
      return after < cfg_.headroom * nodes_[static_cast<std::size_t>(n)]->topology().gpu_count() && after <= before;
    };
    int dst = -1;
    for (int n = 0; n < static_cast<int>(nodes_.size()); ++n) {
      if (n == src || !fits(n)) continue;
      if (dst < 0 || load[static_cast<std::size_t>(n)] < load[static_cast<std::size_t>(dst)]) dst = n;
    }
    Migration m;
    m.time = t;
    m.function = f;
    m.from = src;
    m.src_load = before;
    if (dst < 0 && static_cast<int>(nodes_.size()) < cfg_.max_nodes) {
      const double cap = cfg_.headroom * nodes_[0]->topology().gpu_count();
      if (lf < cap && lf <= before) {
        dst = provision(t);
        load.push_back(0);
        m.provisioned = true;
      }
    }
    if (dst < 0) {
      m.deferred = true;
      m.ready = t;
      out.push_back(m);
      continue;
    }
    const auto& model = catalog_[functions_[f].model];
    const Bytes bytes = cfg_.node.policy.shared_runtime && model.resident_bytes ? model.resident_bytes : model.footprint_bytes;
    const auto delay = static_cast<Micros>(std::ceil(static_cast<double>(bytes) / (cfg_.network_gbps * 1e9) * 1e6));
    nodes_[static_cast<std::size_t>(src)]->deactivate(f);
    nodes_[static_cast<std::size_t>(dst)]->activate(f);
    placement_[f] = dst;
    held_until_[f] = t + delay;
    ++moves_[f];
    window_start_[f] = t;
    load[static_cast<std::size_t>(src)] -= lf;
    load[static_cast<std::size_t>(dst)] += lf;
    m.to = dst;
    m.ready = t + delay;
    m.dst_load = load[static_cast<std::size_t>(dst)];
    out.push_back(m);
  }
  log_.insert(log_.end(), out.begin(), out.end());
  return out;
}

ClusterReport Cluster::run(const Trace& trace) {
  trace.validate(functions_.size());
  Trace sorted = trace;
  std::stable_sort(sorted.requests.begin(), sorted.requests.end(),
                   [](const Request& a, const Request& b) { return a.arrival < b.arrival; });
  std::size_t cursor = 0;
  for (Micros t = cfg_.period; t <= sorted.duration; t += cfg_.period) {
    inject(sorted, cursor, t);
    advance(t);
    rebalance(t);
  }
  inject(sorted, cursor, std::numeric_limits<Micros>::max());
  for_nodes(nodes_.size(), cfg_.parallel, [&](std::size_t i) {
    nodes_[i]->set_expect_more(false);
    nodes_[i]->run_to_quiescence();
  });
  return report(sorted.duration);
}

ClusterReport Cluster::report(Micros duration) const {
  ClusterReport rep;
  rep.policy = cfg_.node.policy.name;
  rep.duration = duration;
  rep.migrations = log_;
  rep.node_count = node_count_;
  rep.deferred = static_cast<std::uint64_t>(
      std::count_if(log_.begin(), log_.end(), [](const Migration& m) { return m.deferred; }));

  const auto n = functions_.size();
  std::vector<std::vector<double>> samples(n);
  rep.functions.resize(n);
  for (std::uint32_t f = 0; f < n; ++f) {
    auto& cf = rep.functions[f];
    const auto& spec = functions_[f];
    const auto& m = catalog_[spec.model];
    cf.stats.id = spec.id;
    cf.stats.model = m.name;
    cf.stats.heaviness = m.heaviness;
    cf.stats.deadline_ms = spec.deadline_ms;
    cf.stats.percentile = spec.tail_percentile;
    cf.home = placement_[f];
    cf.migrations = moves_[f];
    cf.window_start = window_start_[f];
  }
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    const auto& e = *nodes_[i];
    NodeSummary ns;
    ns.id = static_cast<int>(i);
    ns.started = started_[i];
    const double span = static_cast<double>(std::max<Micros>(duration - started_[i], 1));
    for (GpuId g = 0; g < e.topology().gpu_count(); ++g)
      ns.gpu_load.push_back(static_cast<double>(e.busy_time(g, duration) - e.busy_time(g, started_[i])) / span);
    const double mean = std::accumulate(ns.gpu_load.begin(), ns.gpu_load.end(), 0.0) / static_cast<double>(ns.gpu_load.size());
    for (double l : ns.gpu_load) ns.load_variance += (l - mean) * (l - mean);
    ns.load_variance /= static_cast<double>(ns.gpu_load.size());
    for (const auto& r : e.requests()) {
      const auto& spec = functions_[r.function];
      if (r.rejected) {
        ++ns.rejected;
      } else if (r.end >= 0) {
        ++ns.completed;
        rep.normalized_latency.push_back(to_ms(r.end - r.arrival) / spec.deadline_ms);
        SwapCounts& sc = catalog_[spec.model].heaviness == Heaviness::Heavy ? rep.heavy : rep.light;
        (r.kind == SwapKind::NoSwap ? sc.noswap : r.kind == SwapKind::FromHost ? sc.from_host : sc.from_gpu)++;
      }
      if (placement_[r.function] != static_cast<int>(i) || r.arrival < window_start_[r.function]) continue;
      auto& fr = rep.functions[r.function].stats;
      ++fr.requests;
      if (r.rejected) {
        ++fr.rejected;
      } else if (r.end >= 0) {
        ++fr.completed;
        samples[r.function].push_back(to_ms(r.end - r.arrival));
      }
    }
    rep.nodes.push_back(std::move(ns));
  }
  for (std::uint32_t f = 0; f < n; ++f) {
    auto& fr = rep.functions[f].stats;
    const auto& s = samples[f];
    if (!s.empty()) {
      fr.mean_ms = std::accumulate(s.begin(), s.end(), 0.0) / static_cast<double>(s.size());
      fr.tail_ms = tail_latency(s, fr.percentile);
    }
    fr.compliant = fr.rejected == 0 && fr.completed == fr.requests && fr.tail_ms <= fr.deadline_ms;
  }
  for (auto& ns : rep.nodes) {
    std::size_t total = 0, ok = 0;
    for (const auto& cf : rep.functions) {
      if (cf.home != ns.id) continue;
      ++ns.functions;
      if (cf.stats.requests == 0) continue;
      ++total;
      ok += cf.stats.compliant ? 1 : 0;
    }
    ns.slo_ratio = total ? static_cast<double>(ok) / static_cast<double>(total) : 1.0;
  }
  return rep;
}

ClusterReport run_cluster(const ClusterConfig& cfg, const std::vector<ModelProfile>& catalog,
                          const std::vector<FunctionSpec>& functions, const std::vector<double>& expected_rate,
                          const Trace& trace) {
  Cluster c(cfg, catalog, functions, expected_rate);
  return c.run(trace);
}

}  // namespace swapsim

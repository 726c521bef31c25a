#include "swapsim/sim.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "swapsim/error.hpp"

namespace swapsim {

const std::vector<std::string>& policy_names() {
  static const std::vector<std::string> names{"faaswap",    "faaswap-fifo", "faaswap-random", "faaswap-lru",
                                              "faaswap-block", "simpleswap", "nonswap",        "native"};
  return names;
}

PolicyBundle policy_select(const std::string& name) {
  PolicyBundle b;
  b.name = name;
  if (name == "faaswap") return b;
  if (name == "faaswap-fifo") {
    b.queueing = QueueMode::Fifo;
  } else if (name == "faaswap-random") {
    b.scheduling = SchedulingPolicy::Random;
  } else if (name == "faaswap-lru") {
    b.eviction = EvictionPolicy::PlainLru;
  } else if (name == "faaswap-block") {
    b.allocator = AllocatorPolicy::NativeCost;
  } else if (name == "simpleswap") {
    b.queueing = QueueMode::Fifo;
    b.scheduling = SchedulingPolicy::Random;
    b.eviction = EvictionPolicy::PlainLru;
  } else if (name == "nonswap") {
    b.binding = BindingPolicy::Static;
  } else if (name == "native") {
    b.queueing = QueueMode::Fifo;
    b.binding = BindingPolicy::Static;
    b.shared_runtime = false;
  } else {
    fail(ErrorKind::Config, "unknown policy '" + name + "'");
  }
  return b;
}

double tail_latency(std::vector<double> samples, double p) {
  if (samples.empty()) return 0.0;
  std::sort(samples.begin(), samples.end());
  const auto n = static_cast<double>(samples.size());
  auto rank = static_cast<std::size_t>(std::ceil(p * n - 1e-9));
  rank = std::clamp<std::size_t>(rank, 1, samples.size());
  return samples[rank - 1];
}

double SimReport::slo_ratio() const {
  std::size_t total = 0, ok = 0;
  for (const auto& f : functions) {
    if (f.requests == 0) continue;
    ++total;
    if (f.compliant) ++ok;
  }
  return total ? static_cast<double>(ok) / static_cast<double>(total) : 1.0;
}

std::uint64_t SimReport::completed() const {
  std::uint64_t c = 0;
  for (const auto& f : functions) c += f.completed;
  return c;
}

Engine::Engine(EngineConfig cfg, std::vector<ModelProfile> catalog, std::vector<FunctionSpec> functions,
               std::vector<bool> active)
    : cfg_(std::move(cfg)),
      catalog_(std::move(catalog)),
      functions_(std::move(functions)),
      topo_(cfg_.topology),
      links_(topo_),
      net_([&] {
        std::vector<double> caps;
        for (const auto& l : links_.links()) caps.push_back(l.capacity);
        return caps;
      }()),
      state_(topo_),
      rng_(cfg_.seed) {
  require(cfg_.period > 0, ErrorKind::Config, "run.period_ms must be > 0");
  require(cfg_.consolidate_period > 0, ErrorKind::Config, "memory.consolidate_period_ms must be > 0");
  require(cfg_.native_alloc_ms >= 0, ErrorKind::Config, "memory.native_alloc_ms must be >= 0");
  require(cfg_.routing_overhead_ms >= 0, ErrorKind::Config, "run.routing_overhead_ms must be >= 0");
  require(cfg_.group_size > 0, ErrorKind::Config, "transfer.group_size must be > 0");
  require(functions_.size() < (1u << 31), ErrorKind::Config, "too many functions");
  const auto n = functions_.size();
  if (active.empty()) active.assign(n, true);
  require(active.size() == n, ErrorKind::InvalidParameter, "active mask size mismatch");
  active_ = std::move(active);
  low_streak_.assign(n, 0);

  const PolicyBundle& pol = cfg_.policy;
  std::vector<double> deadlines, percentiles, priors;
  for (const auto& f : functions_) {
    f.validate();
    require(f.model < catalog_.size(), ErrorKind::Reference, "function '" + f.id + "' references unknown model");
    const auto& m = catalog_[f.model];
    Bytes bytes = m.footprint_bytes;
    if (pol.shared_runtime && m.resident_bytes) {
      bytes = m.resident_bytes;
    } else if (pol.shared_runtime) {
      bytes = bytes > cfg_.private_runtime ? bytes - cfg_.private_runtime : cfg_.memory.buddy_min;
    }
    info_.push_back({bytes, m.heaviness});
    blocks_.push_back(synthesize_blocks(bytes, cfg_.memory.fixed_block));
    deadlines.push_back(f.deadline_ms);
    percentiles.push_back(f.tail_percentile);
    priors.push_back(m.exec_ms);
  }

  if (pol.allocator == AllocatorPolicy::Pooled) {
    memory_ = std::make_unique<MemoryManager>(topo_, cfg_.memory);
  } else {
    const Bytes mem = cfg_.memory.gpu_memory_override ? cfg_.memory.gpu_memory_override : topo_.params().gpu_memory;
    // Same model budget as the pooled allocator, so the ablation differs only in block management.
    memory_ = std::make_unique<BlockCacheMemory>(topo_.gpu_count(), mem, mem - usable_model_memory(mem, cfg_.memory));
  }

  const int queue_count = pol.binding == BindingPolicy::Static ? topo_.gpu_count() : 1;
  auto qp = cfg_.queue;
  qp.mode = pol.queueing;
  for (int i = 0; i < queue_count; ++i) {
    queues_.push_back(std::make_unique<RequestQueues>(qp, deadlines, percentiles, priors));
  }
  gpu_run_.resize(static_cast<std::size_t>(topo_.gpu_count()));
  binding_.assign(n, -1);

  if (pol.binding == BindingPolicy::Static) {
    bind_static();
  } else {
    for (std::uint32_t f = 0; f < n; ++f) {
      require(info_[f].bytes <= memory_->usable_bytes(0), ErrorKind::Config,
              "function '" + functions_[f].id + "' does not fit in GPU memory");
      queues_[0]->set_active(f, active_[f]);
    }
    if (cfg_.preload) preload();
  }
}

Engine::~Engine() = default;

Micros Engine::exec_us(std::uint32_t f) const { return from_ms(catalog_[functions_[f].model].exec_ms); }

RequestQueues& Engine::queue_for(std::uint32_t f) {
  if (queues_.size() == 1) return *queues_[0];
  return *queues_.at(static_cast<std::size_t>(std::max<GpuId>(binding_[f], 0)));
}

const RequestQueues& Engine::queue_for(std::uint32_t f) const {
  if (queues_.size() == 1) return *queues_[0];
  return *queues_.at(static_cast<std::size_t>(std::max<GpuId>(binding_[f], 0)));
}

void Engine::preload() {
  const int g_count = topo_.gpu_count();
  int next = 0;
  for (std::uint32_t f = 0; f < functions_.size(); ++f) {
    if (!active_[f]) continue;
    for (int k = 0; k < g_count; ++k) {
      const GpuId g = (next + k) % g_count;
      if (memory_->free_bytes(g) < info_[f].bytes) continue;
      if (memory_->load_model(f, blocks_[f], g)) {
        state_.gpus[static_cast<std::size_t>(g)].resident[f] = 0;
        next = (g + 1) % g_count;
        break;
      }
    }
  }
}

void Engine::bind(std::uint32_t f) {
  const int g_count = topo_.gpu_count();
  static_assert(sizeof(GpuId) <= sizeof(int));
  const GpuId start = static_cast<GpuId>(f % static_cast<std::uint32_t>(g_count));
  binding_[f] = -1;
  for (int k = 0; k < g_count; ++k) {
    const GpuId g = (start + k) % g_count;
    if (memory_->free_bytes(g) < info_[f].bytes) continue;
    if (memory_->load_model(f, blocks_[f], g)) {
      state_.gpus[static_cast<std::size_t>(g)].resident[f] = 0;
      binding_[f] = g;
      break;
    }
  }
  for (std::size_t i = 0; i < queues_.size(); ++i) {
    queues_[i]->set_active(f, static_cast<GpuId>(i) == binding_[f]);
  }
}

void Engine::bind_static() {
  for (std::uint32_t f = 0; f < functions_.size(); ++f) {
    if (active_[f]) {
      bind(f);
    } else {
      for (auto& q : queues_) q->set_active(f, false);
    }
  }
}

void Engine::push(Micros t, EventKind k, std::uint64_t arg) {
  require(t >= now_, ErrorKind::InvariantViolation, "event scheduled in the past");
  events_.push(Event{t, seq_++, k, arg});
}

void Engine::add_arrival(std::uint32_t function, Micros arrival, Micros release) {
  require(function < functions_.size(), ErrorKind::Reference, "arrival for unknown function");
  require(arrival >= 0, ErrorKind::InvalidParameter, "negative arrival time");
  const Micros at = std::max(arrival, release);
  require(at >= now_, ErrorKind::InvalidParameter, "arrival before the current simulation time");
  const std::uint64_t id = records_.size();
  RequestRecord rec;
  rec.id = id;
  rec.function = function;
  rec.arrival = arrival;
  records_.push_back(rec);
  push(at, EventKind::Arrival, id);
  ++pending_arrivals_;
  schedule_ticks();
}

void Engine::add_trace(const Trace& trace) {
  trace.validate(functions_.size());
  for (const auto& r : trace.requests) add_arrival(r.function, r.arrival);
}

void Engine::set_expect_more(bool more) {
  expect_more_ = more;
  schedule_ticks();
}

bool Engine::has_work() const {
  if (pending_arrivals_ > 0 || expect_more_ || net_.active_count() > 0 || !delayed_.empty()) return true;
  for (const auto& q : queues_)
    if (!q->empty()) return true;
  for (const auto& g : state_.gpus)
    if (g.busy) return true;
  return false;
}

void Engine::schedule_ticks() {
  if (!has_work()) return;
  const Micros next_period = (now_ / cfg_.period + 1) * cfg_.period;
  if (!ticking_) {
    push(next_period, EventKind::PeriodTick);
    ticking_ = true;
  }
  const bool pooled_late = cfg_.policy.allocator == AllocatorPolicy::Pooled && cfg_.policy.binding == BindingPolicy::Late;
  if (pooled_late && !consolidating_) {
    push((now_ / cfg_.consolidate_period + 1) * cfg_.consolidate_period, EventKind::ConsolidateTick);
    consolidating_ = true;
  }
}

bool Engine::step() {
  if (events_.empty()) return false;
  const Event e = events_.top();
  events_.pop();
  require(e.time >= now_, ErrorKind::InvariantViolation, "event out of order");
  now_ = e.time;
  handle(e);
  if (cfg_.check_invariants) check_invariants();
  return true;
}

void Engine::run_until(Micros t) {
  while (!events_.empty() && events_.top().time <= t) step();
}

void Engine::run_to_quiescence() {
  while (step()) {
  }
}

void Engine::handle(const Event& e) {
  pump_network();
  switch (e.kind) {
    case EventKind::Arrival:
      --pending_arrivals_;
      on_arrival(e.arg);
      break;
    case EventKind::TransferStart: {
      auto it = std::find_if(delayed_.begin(), delayed_.end(), [&](const InFlight& f) { return f.request == e.arg; });
      require(it != delayed_.end(), ErrorKind::InvariantViolation, "transfer start for unknown request");
      const InFlight fl = *it;
      delayed_.erase(it);
      const Bytes bytes = catalog_[functions_[fl.model].model].transfer_bytes;
      const int n = cfg_.pipeline ? group_count(bytes, cfg_.group_size) : 1;
      const auto links = links_.route(fl.src >= 0 ? fl.src : kHost, fl.gpu);
      const TaskId task = net_.start(static_cast<double>(now_), bytes, links, PipelineSpec{n, fl.compute_us / n});
      in_flight_.emplace_back(task, fl);
      arm_network_wake();
      break;
    }
    case EventKind::NetWake:
      if (wake_at_ && *wake_at_ == e.time) wake_at_.reset();
      arm_network_wake();
      break;
    case EventKind::ComputeDone:
      finish_compute(e.arg);
      break;
    case EventKind::PeriodTick: {
      ticking_ = false;
      const bool single = queues_.size() == 1;
      for (std::size_t i = 0; i < queues_.size(); ++i) {
        auto row = queues_[i]->period_tick(now_);
        if (single || i == 0) alpha_rows_.push_back(row);
      }
      if (!single) {
        PeriodRow& row = alpha_rows_.back();
        row.high_count = row.low_count = 0;
        for (std::uint32_t f = 0; f < functions_.size(); ++f) {
          if (!active_[f] || binding_[f] < 0) continue;
          (in_high(f) ? row.high_count : row.low_count)++;
        }
        row.slo_ratio = slo_ratio();
      }
      for (std::uint32_t f = 0; f < functions_.size(); ++f) {
        if (!active_[f]) {
          low_streak_[f] = 0;
          continue;
        }
        low_streak_[f] = in_high(f) ? 0 : low_streak_[f] + 1;
      }
      break;
    }
    case EventKind::ConsolidateTick:
      consolidating_ = false;
      for (const auto& g : state_.gpus) {
        if (g.busy || g.loading || !g.pins.empty()) continue;
        consolidated_ += static_cast<std::uint64_t>(memory_->consolidate(g.id));
      }
      break;
  }
  try_dispatch();
  schedule_ticks();
}

void Engine::pump_network() {
  if (net_.active_count() == 0) return;
  const auto done = net_.advance(static_cast<double>(now_));
  for (const auto& c : done) {
    auto it = std::find_if(in_flight_.begin(), in_flight_.end(), [&](const auto& p) { return p.first == c.id; });
    require(it != in_flight_.end(), ErrorKind::InvariantViolation, "completion of an unknown transfer");
    const InFlight fl = it->second;
    in_flight_.erase(it);
    auto& gs = state_.gpus[static_cast<std::size_t>(fl.gpu)];
    gs.loading.reset();
    gs.resident[fl.model] = now_;
    if (fl.src >= 0) state_.unpin(fl.model, fl.src);
    const auto end = std::max<Micros>(now_, static_cast<Micros>(std::ceil(c.compute_done_us - 1e-6)));
    push(end, EventKind::ComputeDone, fl.request);
    if (cfg_.record_transfers) {
      transfers_.push_back({fl.request, fl.src >= 0 ? fl.src : kHost, fl.gpu, c.bytes, c.start_us, c.finish_us});
    }
  }
  if (!done.empty()) arm_network_wake();
}

void Engine::arm_network_wake() {
  const auto nc = net_.next_completion();
  if (!nc) return;
  const auto t = std::max<Micros>(now_, static_cast<Micros>(std::ceil(*nc - 1e-6)));
  if (wake_at_ && *wake_at_ <= t) return;
  wake_at_ = t;
  push(t, EventKind::NetWake);
}

void Engine::on_arrival(std::uint64_t id) {
  auto& rec = records_[id];
  const auto f = rec.function;
  if (cfg_.policy.binding == BindingPolicy::Static && binding_[f] < 0) {
    rec.rejected = true;
    return;
  }
  auto& q = queue_for(f);
  q.push(PendingRequest{id, f, rec.arrival});
  if (cfg_.policy.queueing == QueueMode::SloAware && queues_.size() == 1) {
    const double limit = cfg_.burst_factor * topo_.gpu_count();
    if (static_cast<double>(q.size()) > limit && (last_burst_ < 0 || now_ - last_burst_ >= cfg_.burst_min_gap)) {
      q.repartition(now_);
      last_burst_ = now_;
    }
  }
}

void Engine::try_dispatch() {
  if (cfg_.policy.binding == BindingPolicy::Static) {
    for (GpuId g = 0; g < topo_.gpu_count(); ++g)
      if (state_.available(g)) dispatch_static(g);
    return;
  }
  std::set<std::uint32_t> skip;
  while (state_.any_available() && !queues_[0]->empty()) {
    const auto r = queues_[0]->peek(now_, skip);
    if (!r) break;
    if (!dispatch_late(*r)) skip.insert(r->function);
  }
}

void Engine::dispatch_static(GpuId g) {
  auto& q = *queues_[static_cast<std::size_t>(g)];
  const auto r = q.peek(now_);
  if (!r) return;
  q.pop(*r);
  q.on_dispatch(*r);
  auto& rec = records_[r->id];
  rec.start = now_;
  rec.gpu = g;
  rec.kind = SwapKind::NoSwap;
  auto& gs = state_.gpus[static_cast<std::size_t>(g)];
  gs.busy = true;
  gpu_run_[static_cast<std::size_t>(g)].request = r->id;
  gpu_run_[static_cast<std::size_t>(g)].busy_since = now_;
  state_.pin(r->function, g);
  push(now_ + exec_us(r->function) + from_ms(cfg_.routing_overhead_ms), EventKind::ComputeDone, r->id);
}

bool Engine::make_room(ModelKey model, GpuId gpu, std::vector<ModelKey>& victims, int& native_calls) {
  auto& gs = state_.gpus[static_cast<std::size_t>(gpu)];
  for (;;) {
    if (auto res = memory_->load_model(model, blocks_[model], gpu)) {
      native_calls = res->native_calls;
      return true;
    }
    const Bytes free = memory_->free_bytes(gpu);
    const Bytes need = info_[model].bytes > free ? info_[model].bytes - free : cfg_.memory.fixed_block;
    std::vector<ModelKey> v;
    try {
      v = pick_eviction_victims(gpu, need, state_, info_, cfg_.policy.eviction);
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::Capacity) throw;
      return false;
    }
    if (v.empty()) return false;
    for (ModelKey m : v) {
      memory_->evict_model(m, gpu);
      gs.resident.erase(m);
      victims.push_back(m);
    }
  }
}

bool Engine::dispatch_late(const PendingRequest& r) {
  const ModelKey model = r.function;
  const Decision d = cfg_.policy.scheduling == SchedulingPolicy::Random ? schedule_random(model, state_, rng_)
                                                                         : schedule(model, state_);
  std::vector<ModelKey> victims;
  int native_calls = 0;
  if (d.kind != SwapKind::NoSwap && !make_room(model, d.gpu, victims, native_calls)) {
    ++capacity_retries_;
    if (!victims.empty()) decisions_.push_back({r.id, now_, d.gpu, d.kind, d.src, victims});
    return false;
  }
  auto& q = *queues_[0];
  q.pop(r);
  q.on_dispatch(r);
  auto& rec = records_[r.id];
  rec.start = now_;
  rec.gpu = d.gpu;
  rec.kind = d.kind;
  rec.src = d.src;
  auto& gs = state_.gpus[static_cast<std::size_t>(d.gpu)];
  auto& run = gpu_run_[static_cast<std::size_t>(d.gpu)];
  gs.busy = true;
  run.request = r.id;
  run.busy_since = now_;
  const Micros overhead = from_ms(cfg_.routing_overhead_ms);
  const Micros exec = exec_us(model);
  if (d.kind == SwapKind::NoSwap) {
    state_.pin(model, d.gpu);
    touch(state_, model, d.gpu, now_);
    push(now_ + overhead + exec, EventKind::ComputeDone, r.id);
    return true;
  }
  decisions_.push_back({r.id, now_, d.gpu, d.kind, d.src, victims});
  gs.loading = std::make_pair(model, info_[model].heaviness);
  state_.pin(model, d.gpu);
  if (d.src >= 0) state_.pin(model, d.src);
  const Bytes bytes = catalog_[functions_[model].model].transfer_bytes;
  const double compute = static_cast<double>(exec);
  if (bytes == 0) {
    gs.loading.reset();
    gs.resident[model] = now_;
    if (d.src >= 0) state_.unpin(model, d.src);
    push(now_ + overhead + exec, EventKind::ComputeDone, r.id);
    return true;
  }
  const Micros delay = overhead + from_ms(cfg_.native_alloc_ms * native_calls);
  delayed_.push_back(InFlight{r.id, d.gpu, d.src, model, compute});
  push(now_ + delay, EventKind::TransferStart, r.id);
  return true;
}

void Engine::finish_compute(std::uint64_t id) {
  auto& rec = records_[id];
  const GpuId g = rec.gpu;
  auto& gs = state_.gpus[static_cast<std::size_t>(g)];
  auto& run = gpu_run_[static_cast<std::size_t>(g)];
  require(run.request && *run.request == id, ErrorKind::InvariantViolation, "compute done on the wrong gpu");
  gs.busy = false;
  gs.idle_since = now_;
  run.request.reset();
  run.busy_total += now_ - run.busy_since;
  run.intervals.emplace_back(run.busy_since, now_);
  state_.unpin(rec.function, g);
  touch(state_, rec.function, g, now_);
  rec.end = now_;
  queue_for(rec.function).on_complete(PendingRequest{id, rec.function, rec.arrival}, now_);
}

bool Engine::in_high(std::uint32_t f) const { return queue_for(f).in_high(f); }

double Engine::slo_ratio() const {
  if (queues_.size() == 1) return queues_[0]->slo_ratio(now_);
  std::size_t total = 0, ok = 0;
  for (std::uint32_t f = 0; f < functions_.size(); ++f) {
    if (!active_[f] || binding_[f] < 0) continue;
    ++total;
    if (queue_for(f).current_rrc(f, now_) <= 0) ++ok;
  }
  return total ? static_cast<double>(ok) / static_cast<double>(total) : 1.0;
}

void Engine::activate(std::uint32_t f) {
  require(f < functions_.size(), ErrorKind::Reference, "unknown function");
  if (active_[f]) return;
  active_[f] = true;
  low_streak_[f] = 0;
  if (cfg_.policy.binding == BindingPolicy::Static) {
    if (binding_[f] < 0) bind(f);
    else queues_[static_cast<std::size_t>(binding_[f])]->set_active(f, true);
  } else {
    queues_[0]->set_active(f, true);
  }
  queue_for(f).reset_function(f);
}

void Engine::deactivate(std::uint32_t f) {
  require(f < functions_.size(), ErrorKind::Reference, "unknown function");
  active_[f] = false;
  low_streak_[f] = 0;
  for (auto& q : queues_) q->set_active(f, false);
}

std::size_t Engine::queued() const {
  std::size_t n = 0;
  for (const auto& q : queues_) n += q->size();
  return n;
}

std::size_t Engine::backlog(std::uint32_t f) const { return queue_for(f).pending(f); }

Micros Engine::busy_time(GpuId g, Micros until) const {
  const auto& run = gpu_run_.at(static_cast<std::size_t>(g));
  Micros busy = 0;
  for (const auto& [a, b] : run.intervals) busy += std::max<Micros>(0, std::min(b, until) - std::min(a, until));
  if (run.request) busy += std::max<Micros>(0, std::min(now_, until) - std::min(run.busy_since, until));
  return busy;
}

void Engine::check_invariants() const {
  for (const auto& g : state_.gpus) {
    const auto& run = gpu_run_[static_cast<std::size_t>(g.id)];
    require(g.busy == run.request.has_value(), ErrorKind::InvariantViolation, "gpu busy flag out of sync");
    for (const auto& [m, t] : g.resident) {
      (void)t;
      require(memory_->resident(m, g.id), ErrorKind::InvariantViolation, "scheduler residency without memory copy");
    }
    if (g.loading) {
      require(g.busy, ErrorKind::InvariantViolation, "loading on an idle gpu");
      require(memory_->resident(g.loading->first, g.id), ErrorKind::InvariantViolation, "loading without memory");
    }
  }
  memory_->check_invariants();
}

SimReport Engine::report(Micros duration) const {
  SimReport rep;
  rep.policy = cfg_.policy.name;
  rep.duration = duration;
  rep.end_time = now_;
  std::vector<std::vector<double>> samples(functions_.size());
  rep.functions.resize(functions_.size());
  for (std::uint32_t f = 0; f < functions_.size(); ++f) {
    auto& fr = rep.functions[f];
    const auto& spec = functions_[f];
    const auto& m = catalog_[spec.model];
    fr.id = spec.id;
    fr.model = m.name;
    fr.heaviness = m.heaviness;
    fr.deadline_ms = spec.deadline_ms;
    fr.percentile = spec.tail_percentile;
  }
  for (const auto& r : records_) {
    auto& fr = rep.functions[r.function];
    ++fr.requests;
    if (r.rejected) {
      ++fr.rejected;
      continue;
    }
    if (r.end < 0) continue;
    ++fr.completed;
    samples[r.function].push_back(to_ms(r.end - r.arrival));
    SwapCounts& sc = fr.heaviness == Heaviness::Heavy ? rep.heavy : rep.light;
    switch (r.kind) {
      case SwapKind::NoSwap: ++sc.noswap; break;
      case SwapKind::FromHost: ++sc.from_host; break;
      case SwapKind::FromGpu: ++sc.from_gpu; break;
    }
  }
  for (std::uint32_t f = 0; f < functions_.size(); ++f) {
    auto& fr = rep.functions[f];
    const auto& s = samples[f];
    if (!s.empty()) {
      fr.mean_ms = std::accumulate(s.begin(), s.end(), 0.0) / static_cast<double>(s.size());
      fr.tail_ms = tail_latency(s, fr.percentile);
    }
    fr.compliant = fr.rejected == 0 && fr.completed == fr.requests && fr.tail_ms <= fr.deadline_ms;
  }
  for (GpuId g = 0; g < topo_.gpu_count(); ++g) {
    GpuReport gr;
    gr.busy = busy_time(g, duration);
    gr.load = duration > 0 ? static_cast<double>(gr.busy) / static_cast<double>(duration) : 0.0;
    gr.memory = memory_->stats(g);
    rep.native_calls += gr.memory.native_calls;
    rep.gpus.push_back(gr);
  }
  rep.alpha = alpha_rows_;
  rep.requests = records_;
  rep.decisions = decisions_;
  rep.transfers = transfers_;
  rep.capacity_retries = capacity_retries_;
  rep.consolidated_blocks = consolidated_;
  return rep;
}

SimReport run(const EngineConfig& cfg, const std::vector<ModelProfile>& catalog,
              const std::vector<FunctionSpec>& functions, const Trace& trace) {
  Engine e(cfg, catalog, functions);
  e.add_trace(trace);
  e.run_to_quiescence();
  return e.report(trace.duration);
}

}  // namespace swapsim

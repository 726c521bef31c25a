#pragma once

#include <cstdint>
#include <deque>
#include <memory>
#include <optional>
#include <queue>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "swapsim/memory.hpp"
#include "swapsim/queueing.hpp"
#include "swapsim/scheduler.hpp"
#include "swapsim/topology.hpp"
#include "swapsim/transfer.hpp"
#include "swapsim/workload.hpp"

namespace swapsim {

enum class SchedulingPolicy { InterferenceAware, Random };
enum class AllocatorPolicy { Pooled, NativeCost };
enum class BindingPolicy { Late, Static };

struct PolicyBundle {
  std::string name;
  QueueMode queueing = QueueMode::SloAware;
  SchedulingPolicy scheduling = SchedulingPolicy::InterferenceAware;
  EvictionPolicy eviction = EvictionPolicy::HeavinessLru;
  AllocatorPolicy allocator = AllocatorPolicy::Pooled;
  BindingPolicy binding = BindingPolicy::Late;
  bool shared_runtime = true;  // false: every function carries its own runtime
};

PolicyBundle policy_select(const std::string& name);
const std::vector<std::string>& policy_names();

struct EngineConfig {
  TopologyParams topology = default_v100_params();
  MemoryConfig memory;
  Bytes group_size = 2 * MiB;
  Bytes private_runtime = 1 * GiB;  // part of a footprint that runtime sharing removes
  RequestQueues::Params queue;
  Micros period = 10 * kMicrosPerSec;
  Micros consolidate_period = 10 * kMicrosPerSec;
  double burst_factor = 2.0;  // repartition when queue > factor * gpus
  Micros burst_min_gap = 1 * kMicrosPerSec;
  double native_alloc_ms = 10.0;
  double routing_overhead_ms = 0.0;
  bool pipeline = true;
  bool preload = true;
  bool check_invariants = false;
  bool record_transfers = false;
  std::uint64_t seed = 1;
  PolicyBundle policy = policy_select("faaswap");
};

struct RequestRecord {
  std::uint64_t id = 0;
  std::uint32_t function = 0;
  Micros arrival = 0;
  Micros start = -1;  // dispatch
  Micros end = -1;
  GpuId gpu = -1;
  SwapKind kind = SwapKind::NoSwap;
  GpuId src = -1;
  bool rejected = false;
  bool operator==(const RequestRecord&) const = default;
};

struct DecisionRecord {
  std::uint64_t request = 0;
  Micros time = 0;
  GpuId gpu = 0;
  SwapKind kind = SwapKind::NoSwap;
  GpuId src = -1;
  std::vector<ModelKey> victims;
};

struct TransferLog {
  std::uint64_t request = 0;
  GpuId src = 0;  // kHost for host
  GpuId dst = 0;
  Bytes bytes = 0;
  double start_us = 0;
  double end_us = 0;
};

struct FunctionReport {
  std::string id;
  std::string model;
  Heaviness heaviness = Heaviness::Light;
  double deadline_ms = 0;
  double percentile = 0;
  std::uint64_t requests = 0;
  std::uint64_t completed = 0;
  std::uint64_t rejected = 0;
  double tail_ms = 0;
  double mean_ms = 0;
  bool compliant = true;
};

struct SwapCounts {
  std::uint64_t noswap = 0, from_host = 0, from_gpu = 0;
  std::uint64_t total() const { return noswap + from_host + from_gpu; }
  double no_host_share() const { return total() ? static_cast<double>(noswap + from_gpu) / total() : 0.0; }
};

struct GpuReport {
  double load = 0;
  Micros busy = 0;
  MemoryStats memory;
};

struct SimReport {
  std::string policy;
  Micros duration = 0;
  Micros end_time = 0;
  std::vector<FunctionReport> functions;
  std::vector<GpuReport> gpus;
  SwapCounts light, heavy;
  std::vector<PeriodRow> alpha;
  std::vector<RequestRecord> requests;
  std::vector<DecisionRecord> decisions;
  std::vector<TransferLog> transfers;
  std::uint64_t native_calls = 0;
  std::uint64_t capacity_retries = 0;
  std::uint64_t consolidated_blocks = 0;

  double slo_ratio() const;  // over functions that received requests
  std::uint64_t completed() const;
};

// Nearest-rank percentile of unsorted samples.
double tail_latency(std::vector<double> samples, double p);

class Engine {
 public:
  Engine(EngineConfig cfg, std::vector<ModelProfile> catalog, std::vector<FunctionSpec> functions,
         std::vector<bool> active = {});
  ~Engine();

  // release >= 0 holds the request until that time; latency still counts from arrival.
  void add_arrival(std::uint32_t function, Micros arrival, Micros release = -1);
  void add_trace(const Trace& trace);
  // Keep periodic ticks alive even when idle (more arrivals will be injected).
  void set_expect_more(bool more);

  bool step();
  void run_until(Micros t);
  void run_to_quiescence();

  Micros now() const { return now_; }
  SimReport report(Micros duration) const;

  // Cluster hooks.
  void activate(std::uint32_t f);
  void deactivate(std::uint32_t f);
  bool active(std::uint32_t f) const { return active_[f]; }
  int low_streak(std::uint32_t f) const { return low_streak_[f]; }
  std::size_t queued() const;
  std::size_t backlog(std::uint32_t f) const;
  bool in_high(std::uint32_t f) const;
  double slo_ratio() const;
  const NodeTopology& topology() const { return topo_; }
  const std::vector<RequestRecord>& requests() const { return records_; }
  Micros busy_time(GpuId g, Micros until) const;

  void check_invariants() const;

 private:
  enum class EventKind { Arrival, TransferStart, NetWake, ComputeDone, PeriodTick, ConsolidateTick };
  struct Event {
    Micros time;
    std::uint64_t seq;
    EventKind kind;
    std::uint64_t arg;
    bool operator>(const Event& o) const { return time != o.time ? time > o.time : seq > o.seq; }
  };
  struct GpuRun {
    std::optional<std::uint64_t> request;
    Micros busy_since = 0;
    Micros busy_total = 0;
    std::vector<std::pair<Micros, Micros>> intervals;
  };
  struct InFlight {
    std::uint64_t request;
    GpuId gpu;
    GpuId src;
    ModelKey model;
    double compute_us;
  };

  void push(Micros t, EventKind k, std::uint64_t arg = 0);
  void handle(const Event& e);
  void pump_network();
  void arm_network_wake();
  void on_arrival(std::uint64_t req);
  void try_dispatch();
  bool dispatch_late(const PendingRequest& r);
  void dispatch_static(GpuId g);
  bool make_room(ModelKey model, GpuId gpu, std::vector<ModelKey>& victims, int& native_calls);
  void start_transfer(std::uint64_t req);
  void finish_compute(std::uint64_t req);
  void schedule_ticks();
  bool has_work() const;
  void preload();
  void bind_static();
  Micros exec_us(std::uint32_t f) const;
  RequestQueues& queue_for(std::uint32_t f);
  const RequestQueues& queue_for(std::uint32_t f) const;
  void bind(std::uint32_t f);

  EngineConfig cfg_;
  std::vector<ModelProfile> catalog_;
  std::vector<FunctionSpec> functions_;
  std::vector<ModelInfo> info_;
  std::vector<std::vector<Bytes>> blocks_;
  NodeTopology topo_;
  LinkTable links_;
  FairShareNetwork net_;
  NodeState state_;
  std::unique_ptr<ModelMemory> memory_;
  std::vector<std::unique_ptr<RequestQueues>> queues_;  // one per GPU under static binding
  std::mt19937_64 rng_;

  std::priority_queue<Event, std::vector<Event>, std::greater<>> events_;
  std::uint64_t seq_ = 0;
  Micros now_ = 0;
  std::uint64_t pending_arrivals_ = 0;
  bool expect_more_ = false;
  bool ticking_ = false;
  bool consolidating_ = false;
  std::optional<Micros> wake_at_;
  Micros last_burst_ = -1;

  std::vector<RequestRecord> records_;
  std::vector<DecisionRecord> decisions_;
  std::vector<TransferLog> transfers_;
  std::vector<GpuRun> gpu_run_;
  std::vector<std::pair<TaskId, InFlight>> in_flight_;
  std::vector<InFlight> delayed_;  // waiting on native allocation before the transfer starts
  std::vector<PeriodRow> alpha_rows_;
  std::vector<bool> active_;
  std::vector<int> low_streak_;
  std::vector<GpuId> binding_;  // static binding, -1 = rejected
  std::vector<std::deque<std::uint64_t>> static_queue_;
  std::uint64_t capacity_retries_ = 0;
  std::uint64_t consolidated_ = 0;
};

SimReport run(const EngineConfig& cfg, const std::vector<ModelProfile>& catalog,
              const std::vector<FunctionSpec>& functions, const Trace& trace);

}  // namespace swapsim

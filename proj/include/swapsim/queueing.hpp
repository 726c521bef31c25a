#pragma once

#include <cstdint>
#include <deque>
#include <optional>
#include <set>
#include <vector>

#include "swapsim/units.hpp"

namespace swapsim {

double rrc(double n, double m, double p);

struct FunctionSloState {
  std::uint64_t n = 0;  // completed or expired
  std::uint64_t m = 0;  // served within deadline
  double p = 0.98;
  double avg_latency_ms = 0;  // running mean of served latencies
  std::uint64_t served = 0;
  double prior_latency_ms = 0;  // used before the first completion

  double latency_estimate() const { return served ? avg_latency_ms : prior_latency_ms; }
  void record(double latency_ms, bool in_deadline);
};

double normalized_rrc(const FunctionSloState& s);
double normalized_rrc(double n, double m, double p, double avg_latency_ms);

struct RankedFunction {
  std::uint32_t function = 0;
  double rrc = 0;
};

// Largest prefix k of the ascending list with sum_{j<=k} max(rrc_j,0) <= alpha * sum max(rrc_i,0).
std::size_t partition_point_alpha(const std::vector<RankedFunction>& ascending, double alpha);

struct Partition {
  std::vector<std::uint32_t> high;
  std::vector<std::uint32_t> low;
};
// Sorts by (rrc, id) and splits.
Partition partition(std::vector<RankedFunction> functions, double alpha);

double auto_config_alpha(double alpha, double last_ratio, double new_ratio, double scalar = 2.0,
                         double threshold = 0.04);

enum class HighOrder { SplitPositiveFirst, PureReverse };

// Dispatch order key: smaller goes first.
bool high_before(const RankedFunction& a, const RankedFunction& b, HighOrder order);
bool low_before(const RankedFunction& a, const RankedFunction& b);

enum class QueueMode { SloAware, Fifo };

struct PendingRequest {
  std::uint64_t id = 0;
  std::uint32_t function = 0;
  Micros arrival = 0;
};

struct PeriodRow {
  Micros time = 0;
  double alpha = 0;
  std::size_t high_count = 0;
  std::size_t low_count = 0;
  double slo_ratio = 0;
};

// Two-group prioritisation of pending requests (or plain FIFO).
class RequestQueues {
 public:
  struct Params {
    QueueMode mode = QueueMode::SloAware;
    HighOrder high_order = HighOrder::SplitPositiveFirst;
    double alpha0 = 0.5;
    double scalar = 2.0;
    double threshold = 0.04;
  };

  RequestQueues(Params params, std::vector<double> deadlines_ms, std::vector<double> percentiles,
                std::vector<double> prior_latency_ms);

  void push(const PendingRequest& r);
  // Highest-priority pending request whose function is not in `skip`.
  std::optional<PendingRequest> peek(Micros now, const std::set<std::uint32_t>& skip = {}) const;
  void pop(const PendingRequest& r);
  bool empty() const { return size_ == 0; }
  std::size_t size() const { return size_; }
  std::size_t pending(std::uint32_t f) const { return pending_[f].size(); }

  void on_dispatch(const PendingRequest& r);
  void on_complete(const PendingRequest& r, Micros end);

  // Algorithm-2 period: adapt alpha from the change in SLO ratio, then repartition.
  PeriodRow period_tick(Micros now);
  void repartition(Micros now);

  double alpha() const { return alpha_; }
  bool in_high(std::uint32_t f) const { return high_[f]; }
  double current_rrc(std::uint32_t f, Micros now) const;
  double slo_ratio(Micros now) const;
  const FunctionSloState& state(std::uint32_t f) const { return slo_[f]; }
  // Forget history, e.g. after the function moved to this node.
  void reset_function(std::uint32_t f);
  void set_active(std::uint32_t f, bool active);
  std::size_t function_count() const { return slo_.size(); }

 private:
  std::uint64_t expired_unfinished(std::uint32_t f, Micros now) const;

  Params params_;
  std::vector<double> deadline_ms_;
  std::vector<FunctionSloState> slo_;
  std::vector<std::deque<PendingRequest>> pending_;
  std::vector<std::multiset<Micros>> in_flight_;
  std::set<std::uint32_t> nonempty_;
  std::vector<bool> high_;
  std::vector<bool> active_;
  double alpha_;
  double last_ratio_ = -1;
  std::size_t size_ = 0;
};

}  // namespace swapsim

#include "swapsim/queueing.hpp"

#include <algorithm>
#include <cmath>
#include <tuple>

#include "swapsim/error.hpp"

namespace swapsim {

double rrc(double n, double m, double p) {
  require(p > 0 && p < 1, ErrorKind::InvalidParameter, "tail percentile must be in (0,1)");
  return (p * n - m) / (1 - p);
}

void FunctionSloState::record(double latency_ms, bool in_deadline) {
  ++n;
  if (in_deadline) ++m;
  ++served;
  avg_latency_ms += (latency_ms - avg_latency_ms) / static_cast<double>(served);
}

double normalized_rrc(double n, double m, double p, double avg_latency_ms) {
  const double r = rrc(n, m, p);
  return r == 0 ? 0.0 : r * avg_latency_ms;
}

double normalized_rrc(const FunctionSloState& s) {
  return normalized_rrc(static_cast<double>(s.n), static_cast<double>(s.m), s.p, s.latency_estimate());
}

std::size_t partition_point_alpha(const std::vector<RankedFunction>& asc, double alpha) {
  require(alpha >= 0 && alpha <= 1, ErrorKind::InvalidParameter, "alpha must be in [0,1]");
  double total = 0;
  for (const auto& f : asc) total += std::max(f.rrc, 0.0);
  const double budget = alpha * total;
  double prefix = 0;
  std::size_t k = 0;
  for (const auto& f : asc) {
    prefix += std::max(f.rrc, 0.0);
    if (prefix > budget) break;
    ++k;
  }
  return k;
}

Partition partition(std::vector<RankedFunction> fs, double alpha) {
  std::sort(fs.begin(), fs.end(), [](const RankedFunction& a, const RankedFunction& b) {
    return std::tie(a.rrc, a.function) < std::tie(b.rrc, b.function);
  });
  const std::size_t k = partition_point_alpha(fs, alpha);
  Partition out;
  for (std::size_t i = 0; i < fs.size(); ++i) (i < k ? out.high : out.low).push_back(fs[i].function);
  return out;
}

double auto_config_alpha(double alpha, double last_ratio, double new_ratio, double scalar, double threshold) {
  require(scalar > 1, ErrorKind::InvalidParameter, "queueing.scalar must be > 1");
  require(last_ratio >= 0 && last_ratio <= 1 && new_ratio >= 0 && new_ratio <= 1, ErrorKind::InvalidParameter,
          "SLO ratios must be in [0,1]");
  const double t = std::abs(threshold);
  const double delta = new_ratio - last_ratio;
  if (delta > t) return std::min(alpha * scalar, 1.0);
  if (delta < -t) return alpha / scalar;
  return alpha;
}

bool high_before(const RankedFunction& a, const RankedFunction& b, HighOrder order) {
  if (order == HighOrder::PureReverse) {
    if (a.rrc != b.rrc) return a.rrc > b.rrc;
    return a.function < b.function;
  }
  const bool pa = a.rrc > 0, pb = b.rrc > 0;
  if (pa != pb) return pa;
  if (a.rrc != b.rrc) return pa ? a.rrc < b.rrc : a.rrc > b.rrc;
  return a.function < b.function;
}

bool low_before(const RankedFunction& a, const RankedFunction& b) {
  return std::tie(a.rrc, a.function) < std::tie(b.rrc, b.function);
}

RequestQueues::RequestQueues(Params params, std::vector<double> deadlines_ms, std::vector<double> percentiles,
                             std::vector<double> prior_latency_ms)
    : params_(params), deadline_ms_(std::move(deadlines_ms)), alpha_(params.alpha0) {
  require(params_.alpha0 > 0 && params_.alpha0 <= 1, ErrorKind::InvalidParameter, "queueing.alpha0 must be in (0,1]");
  require(params_.scalar > 1, ErrorKind::InvalidParameter, "queueing.scalar must be > 1");
  const std::size_t n = deadline_ms_.size();
  require(percentiles.size() == n && prior_latency_ms.size() == n, ErrorKind::InvalidParameter,
          "queue setup: size mismatch");
  slo_.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    require(percentiles[i] > 0 && percentiles[i] < 1, ErrorKind::InvalidParameter, "tail percentile must be in (0,1)");
    slo_[i].p = percentiles[i];
    slo_[i].prior_latency_ms = prior_latency_ms[i];
  }
  pending_.resize(n);
  in_flight_.resize(n);
  high_.assign(n, true);
  active_.assign(n, true);
}

void RequestQueues::push(const PendingRequest& r) {
  require(r.function < pending_.size(), ErrorKind::Reference, "request for unknown function");
  pending_[r.function].push_back(r);
  nonempty_.insert(r.function);
  ++size_;
}

std::uint64_t RequestQueues::expired_unfinished(std::uint32_t f, Micros now) const {
  const Micros cutoff = now - from_ms(deadline_ms_[f]);
  const auto& q = pending_[f];
  auto it = std::partition_point(q.begin(), q.end(), [&](const PendingRequest& r) { return r.arrival < cutoff; });
  const auto& fl = in_flight_[f];
  return static_cast<std::uint64_t>(it - q.begin()) +
         static_cast<std::uint64_t>(std::distance(fl.begin(), fl.lower_bound(cutoff)));
}

double RequestQueues::current_rrc(std::uint32_t f, Micros now) const {
  const auto& s = slo_[f];
  const double n = static_cast<double>(s.n + expired_unfinished(f, now));
  return normalized_rrc(n, static_cast<double>(s.m), s.p, s.latency_estimate());
}

std::optional<PendingRequest> RequestQueues::peek(Micros now, const std::set<std::uint32_t>& skip) const {
  std::optional<PendingRequest> best;
  if (params_.mode == QueueMode::Fifo) {
    for (std::uint32_t f : nonempty_) {
      if (skip.count(f)) continue;
      const auto& r = pending_[f].front();
      if (!best || std::tie(r.arrival, r.id) < std::tie(best->arrival, best->id)) best = r;
    }
    return best;
  }
  RankedFunction top{};
  bool top_high = false;
  for (std::uint32_t f : nonempty_) {
    if (skip.count(f)) continue;
    const RankedFunction cand{f, current_rrc(f, now)};
    const bool h = high_[f];
    bool better;
    if (!best) {
      better = true;
    } else if (h != top_high) {
      better = h;
    } else {
      better = h ? high_before(cand, top, params_.high_order) : low_before(cand, top);
    }
    if (better) {
      best = pending_[f].front();
      top = cand;
      top_high = h;
    }
  }
  return best;
}

void RequestQueues::pop(const PendingRequest& r) {
  auto& q = pending_.at(r.function);
  require(!q.empty() && q.front().id == r.id, ErrorKind::InvalidState, "pop of a request that is not at the head");
  q.pop_front();
  --size_;
  if (q.empty()) nonempty_.erase(r.function);
}

void RequestQueues::on_dispatch(const PendingRequest& r) { in_flight_.at(r.function).insert(r.arrival); }

void RequestQueues::on_complete(const PendingRequest& r, Micros end) {
  auto& fl = in_flight_.at(r.function);
  auto it = fl.find(r.arrival);
  require(it != fl.end(), ErrorKind::InvalidState, "completion of a request that was not dispatched");
  fl.erase(it);
  const double latency = to_ms(end - r.arrival);
  slo_[r.function].record(latency, latency <= deadline_ms_[r.function]);
}

double RequestQueues::slo_ratio(Micros now) const {
  std::size_t total = 0, ok = 0;
  for (std::uint32_t f = 0; f < slo_.size(); ++f) {
    if (!active_[f]) continue;
    ++total;
    if (current_rrc(f, now) <= 0) ++ok;
  }
  return total ? static_cast<double>(ok) / static_cast<double>(total) : 1.0;
}

void RequestQueues::repartition(Micros now) {
  std::vector<RankedFunction> fs;
  for (std::uint32_t f = 0; f < slo_.size(); ++f)
    if (active_[f]) fs.push_back({f, current_rrc(f, now)});
  const auto p = partition(std::move(fs), alpha_);
  for (auto f : p.high) high_[f] = true;
  for (auto f : p.low) high_[f] = false;
}

PeriodRow RequestQueues::period_tick(Micros now) {
  const double ratio = slo_ratio(now);
  if (params_.mode == QueueMode::SloAware) {
    if (last_ratio_ >= 0) alpha_ = auto_config_alpha(alpha_, last_ratio_, ratio, params_.scalar, params_.threshold);
    repartition(now);
  }
  last_ratio_ = ratio;
  PeriodRow row{now, alpha_, 0, 0, ratio};
  for (std::uint32_t f = 0; f < slo_.size(); ++f) {
    if (!active_[f]) continue;
    (high_[f] ? row.high_count : row.low_count)++;
  }
  return row;
}

void RequestQueues::reset_function(std::uint32_t f) {
  const double prior = slo_.at(f).prior_latency_ms;
  const double p = slo_[f].p;
  slo_[f] = FunctionSloState{};
  slo_[f].p = p;
  slo_[f].prior_latency_ms = prior;
  high_[f] = true;
}

void RequestQueues::set_active(std::uint32_t f, bool active) { active_.at(f) = active; }

}  // namespace swapsim

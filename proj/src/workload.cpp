#include "swapsim/workload.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <random>
#include <sstream>
#include <unordered_map>

#include "swapsim/csv.hpp"
#include "swapsim/error.hpp"
#include "swapsim/transfer.hpp"

namespace swapsim {

const char* to_string(Heaviness h) { return h == Heaviness::Heavy ? "heavy" : "light"; }

std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

void ModelProfile::validate() const {
  const std::string where = "model '" + name + "': ";
  require(!name.empty(), ErrorKind::InvalidParameter, "model name must not be empty");
  require(exec_ms > 0, ErrorKind::InvalidParameter, where + "exec_ms must be > 0");
  require(nonpipeline_ms >= exec_ms, ErrorKind::InvalidParameter, where + "nonpipeline_ms must be >= exec_ms");
  require(footprint_bytes > 0, ErrorKind::InvalidParameter, where + "footprint_bytes must be > 0");
  require(transfer_bytes > 0 && transfer_bytes <= footprint_bytes, ErrorKind::InvalidParameter,
          where + "transfer_bytes must be in (0, footprint_bytes]");
  require(resident_bytes <= footprint_bytes, ErrorKind::InvalidParameter,
          where + "resident_bytes must not exceed footprint_bytes");
  Bytes sum = 0;
  for (Bytes b : block_spec) {
    require(b > 0, ErrorKind::InvalidParameter, where + "empty block in block_spec");
    sum += b;
  }
  require(sum == footprint_bytes, ErrorKind::InvalidParameter, where + "block_spec does not sum to footprint");
}

double transfer_ms(const ModelProfile& m, const SwapCalibration& cal) {
  return static_cast<double>(m.transfer_bytes) / cal.host_bandwidth * 1000.0;
}

double pipeline_pcie_ms(const ModelProfile& m, const SwapCalibration& cal) {
  return pipeline_latency(transfer_ms(m, cal), m.exec_ms, group_count(m.transfer_bytes, cal.group_size));
}

Heaviness classify_slowdown(double pipeline_ms, double exec_ms, double slowdown_threshold) {
  require(slowdown_threshold > 0, ErrorKind::InvalidParameter, "slowdown_threshold must be > 0");
  require(exec_ms > 0, ErrorKind::InvalidParameter, "exec latency must be > 0");
  return pipeline_ms / exec_ms > slowdown_threshold ? Heaviness::Heavy : Heaviness::Light;
}

Heaviness classify_heaviness(const ModelProfile& m, double slowdown_threshold, const SwapCalibration& cal) {
  require(slowdown_threshold > 0, ErrorKind::InvalidParameter, "slowdown_threshold must be > 0");
  require(cal.host_bandwidth > 0 && cal.group_size > 0, ErrorKind::InvalidParameter, "invalid swap calibration");
  return classify_slowdown(pipeline_pcie_ms(m, cal), m.exec_ms, slowdown_threshold);
}

Bytes calibrated_transfer_bytes(double exec_ms, double nonpipeline_ms, double bandwidth) {
  require(nonpipeline_ms > exec_ms, ErrorKind::InvalidParameter, "nonpipeline must exceed exec to back-solve");
  return static_cast<Bytes>(std::llround((nonpipeline_ms - exec_ms) / 1000.0 * bandwidth));
}

std::vector<Bytes> synthesize_blocks(Bytes footprint, Bytes fixed_block) {
  require(footprint > 0 && fixed_block > 0, ErrorKind::InvalidParameter, "synthesize_blocks: sizes must be > 0");
  std::vector<Bytes> out(footprint / fixed_block, fixed_block);
  if (footprint % fixed_block) out.push_back(footprint % fixed_block);
  return out;
}

ModelProfile make_profile(std::string name, double exec_ms, double nonpipeline_ms, Bytes footprint,
                          Bytes transfer_bytes, const SwapCalibration& cal, double slowdown_threshold,
                          Bytes fixed_block) {
  ModelProfile m;
  m.name = std::move(name);
  m.exec_ms = exec_ms;
  m.nonpipeline_ms = nonpipeline_ms;
  m.footprint_bytes = footprint;
  m.transfer_bytes =
      transfer_bytes ? transfer_bytes : calibrated_transfer_bytes(exec_ms, nonpipeline_ms, cal.host_bandwidth);
  m.block_spec = synthesize_blocks(footprint, fixed_block);
  m.validate();
  m.heaviness = classify_heaviness(m, slowdown_threshold, cal);
  return m;
}

const std::vector<Table4Row>& table4() {
  // Footprints include the ~1 GB private runtime; only ResNet-152 and Bert-qa are measured values.
  // Parameter counts are the published sizes of the reference architectures (Bert-qa is BERT-large).
  static const std::vector<Table4Row> rows = {
      {"ResNet-50", 11, 82, 9, 23, 13, 11, true, 1.4, 25.6},
      {"ResNet-101", 20, 157, 14, 35, 22, 16, true, 1.5, 44.5},
      {"ResNet-152", 27, 236, 19, 45, 29, 21, true, 1.6, 60.2},
      {"DenseNet-169", 30, 262, 25, 34, 27, 26, false, 1.4, 14.1},
      {"DenseNet-201", 36, 331, 28, 39, 30, 30, false, 1.5, 20.0},
      {"Inception-v3", 19, 151, 14, 27, 17, 16, false, 1.4, 27.2},
      {"EfficientNet", 17, 101, 12, 17, 13, 13, false, 1.3, 5.3},
      {"Bert-qa", 45, 92, 45, 190, 149, 48, true, 2.4, 335.0},
  };
  return rows;
}

std::vector<ModelProfile> default_catalog(const SwapCalibration& cal, double slowdown_threshold, Bytes fixed_block) {
  std::vector<ModelProfile> out;
  for (const auto& r : table4()) {
    const auto footprint = static_cast<Bytes>(std::llround(r.footprint_gib * static_cast<double>(GiB)));
    out.push_back(make_profile(r.name, r.exec_ms, r.nonpipeline_ms, footprint, 0, cal, slowdown_threshold,
                               fixed_block));
    out.back().resident_bytes = static_cast<Bytes>(std::llround(r.params_m * 4e6));
  }
  return out;
}

namespace {

constexpr const char* kCatalogVersion = "# swapsim-catalog v1";
constexpr const char* kCatalogHeader = "name,exec_ms,nonpipeline_ms,footprint_bytes,transfer_bytes,resident_bytes";
constexpr const char* kTraceVersion = "# swapsim-trace v1";
constexpr const char* kTraceHeader = "arrival_ms,function_id";

}  // namespace

std::vector<ModelProfile> load_model_catalog(const std::string& path, const SwapCalibration& cal,
                                             double slowdown_threshold, Bytes fixed_block) {
  CsvReader in(path, kCatalogVersion, kCatalogHeader);
  std::vector<ModelProfile> out;
  std::vector<std::string> row;
  while (in.next(row, 6)) {
    const std::string& name = row[0];
    const double exec = in.to_double(row[1], "exec_ms");
    const double nonpipe = in.to_double(row[2], "nonpipeline_ms");
    const Bytes footprint = in.to_u64(row[3], "footprint_bytes");
    const Bytes transfer = in.to_u64(row[4], "transfer_bytes");
    const Bytes resident = in.to_u64(row[5], "resident_bytes");
    if (transfer == 0) in.fail("transfer_bytes must be > 0");
    try {
      out.push_back(make_profile(name, exec, nonpipe, footprint, transfer, cal, slowdown_threshold, fixed_block));
      out.back().resident_bytes = resident;
      out.back().validate();
    } catch (const Error& e) {
      in.fail(e.what());
    }
    for (std::size_t i = 0; i + 1 < out.size(); ++i) {
      if (out[i].name == name) in.fail("duplicate model name '" + name + "'");
    }
  }
  return out;
}

void write_model_catalog(const std::string& path, const std::vector<ModelProfile>& catalog) {
  std::ofstream out(path);
  require(static_cast<bool>(out), ErrorKind::InvalidParameter, "cannot write " + path);
  out << kCatalogVersion << '\n' << kCatalogHeader << '\n';
  for (const auto& m : catalog) {
    out << m.name << ',' << format_double(m.exec_ms) << ',' << format_double(m.nonpipeline_ms) << ','
        << m.footprint_bytes << ',' << m.transfer_bytes << ',' << m.resident_bytes << '\n';
  }
}

std::size_t find_model(const std::vector<ModelProfile>& catalog, const std::string& name) {
  for (std::size_t i = 0; i < catalog.size(); ++i)
    if (catalog[i].name == name) return i;
  fail(ErrorKind::Reference, "unknown model '" + name + "'");
}

void FunctionSpec::validate() const {
  const std::string where = "function '" + id + "': ";
  require(!id.empty(), ErrorKind::InvalidParameter, "function id must not be empty");
  require(deadline_ms > 0, ErrorKind::InvalidParameter, where + "deadline must be > 0");
  require(tail_percentile > 0 && tail_percentile < 1, ErrorKind::InvalidParameter,
          where + "tail percentile must be in (0,1)");
}

void Trace::validate(std::size_t function_count) const {
  std::vector<std::uint64_t> last_seq(function_count, 0);
  std::vector<bool> seen(function_count, false);
  Micros prev = 0;
  for (const auto& r : requests) {
    require(r.arrival >= 0 && r.arrival >= prev, ErrorKind::InvalidParameter, "trace not sorted by arrival");
    require(r.arrival <= duration, ErrorKind::InvalidParameter, "trace arrival after duration");
    require(r.function < function_count, ErrorKind::Reference, "trace references unknown function");
    require(!seen[r.function] || r.seq > last_seq[r.function], ErrorKind::InvalidParameter,
            "trace seq not increasing per function");
    seen[r.function] = true;
    last_seq[r.function] = r.seq;
    prev = r.arrival;
  }
}

Trace gen_poisson_trace(const std::vector<FunctionRate>& functions, Micros duration, std::uint64_t seed) {
  require(!functions.empty(), ErrorKind::InvalidParameter, "gen_poisson_trace: empty function list");
  require(duration >= 0, ErrorKind::InvalidParameter, "gen_poisson_trace: negative duration");
  Trace t;
  t.duration = duration;
  for (const auto& f : functions) {
    require(f.rate_per_minute > 0, ErrorKind::InvalidParameter, "gen_poisson_trace: rate must be > 0");
    // Per-function stream so adding functions does not perturb the others.
    std::seed_seq ss{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), f.function,
                     0x5eedu};
    std::mt19937_64 rng(ss);
    std::exponential_distribution<double> gap(f.rate_per_minute / 60e6);  // per microsecond
    double at = 0;
    std::uint64_t seq = 0;
    while (true) {
      at += gap(rng);
      const auto us = static_cast<Micros>(at);
      if (us > duration) break;
      t.requests.push_back({f.function, us, seq++});
    }
  }
  std::stable_sort(t.requests.begin(), t.requests.end(), [](const Request& a, const Request& b) {
    return a.arrival != b.arrival ? a.arrival < b.arrival : a.function < b.function;
  });
  return t;
}

Trace load_trace(const std::string& path, const std::vector<FunctionSpec>& functions) {
  CsvReader in(path, kTraceVersion, kTraceHeader);
  std::unordered_map<std::string, std::uint32_t> index;
  for (std::size_t i = 0; i < functions.size(); ++i) index[functions[i].id] = static_cast<std::uint32_t>(i);
  Trace t;
  if (auto d = in.version_field("duration_ms")) t.duration = from_ms(in.to_double(*d, "duration_ms"));
  std::vector<std::uint64_t> seq(functions.size(), 0);
  std::vector<std::string> row;
  Micros prev = 0;
  while (in.next(row, 2)) {
    const Micros at = from_ms(in.to_double(row[0], "arrival_ms"));
    if (at < 0) in.fail("negative arrival");
    if (at < prev) in.fail("rows not sorted by arrival");
    auto it = index.find(row[1]);
    if (it == index.end()) in.fail("unknown function id '" + row[1] + "'", ErrorKind::Reference);
    t.requests.push_back({it->second, at, seq[it->second]++});
    prev = at;
  }
  t.duration = std::max(t.duration, prev);
  return t;
}

void write_trace(const std::string& path, const Trace& trace, const std::vector<FunctionSpec>& functions) {
  std::ofstream out(path);
  require(static_cast<bool>(out), ErrorKind::InvalidParameter, "cannot write " + path);
  out << kTraceVersion << " duration_ms=" << format_double(to_ms(trace.duration)) << '\n' << kTraceHeader << '\n';
  for (const auto& r : trace.requests) {
    require(r.function < functions.size(), ErrorKind::Reference, "trace references unknown function");
    out << format_double(to_ms(r.arrival)) << ',' << functions[r.function].id << '\n';
  }
}

}  // namespace swapsim

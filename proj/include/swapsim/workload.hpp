#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "swapsim/units.hpp"

namespace swapsim {

enum class Heaviness { Light, Heavy };
const char* to_string(Heaviness h);

// How host->GPU swap time is derived from a profile.
struct SwapCalibration {
  double host_bandwidth = 2.0 * static_cast<double>(GiB);  // bytes/sec
  Bytes group_size = 2 * MiB;
};

inline constexpr double kDefaultSlowdownThreshold = 1.25;
inline constexpr Bytes kDefaultFixedBlock = 20 * MiB;

struct ModelProfile {
  std::string name;
  double exec_ms = 0;         // warm execution with remoting
  double nonpipeline_ms = 0;  // swap then execute, no overlap
  Bytes footprint_bytes = 0;
  Bytes transfer_bytes = 0;
  Bytes resident_bytes = 0;  // parameter copy kept on a GPU under runtime sharing; 0 = unknown
  Heaviness heaviness = Heaviness::Light;
  std::vector<Bytes> block_spec;

  void validate() const;
  bool operator==(const ModelProfile&) const = default;
};

double transfer_ms(const ModelProfile& m, const SwapCalibration& cal);
double pipeline_pcie_ms(const ModelProfile& m, const SwapCalibration& cal);

// Heavy iff pipeline / exec > threshold (strict).
Heaviness classify_slowdown(double pipeline_ms, double exec_ms, double slowdown_threshold);
Heaviness classify_heaviness(const ModelProfile& m, double slowdown_threshold = kDefaultSlowdownThreshold,
                             const SwapCalibration& cal = {});

// Back-solves transfer bytes so that nonpipeline = exec + bytes / bandwidth.
Bytes calibrated_transfer_bytes(double exec_ms, double nonpipeline_ms, double bandwidth);

// Fixed-size blocks plus one remainder.
std::vector<Bytes> synthesize_blocks(Bytes footprint, Bytes fixed_block = kDefaultFixedBlock);

// transfer_bytes == 0 means "back-solve from the latencies".
ModelProfile make_profile(std::string name, double exec_ms, double nonpipeline_ms, Bytes footprint,
                          Bytes transfer_bytes = 0, const SwapCalibration& cal = {},
                          double slowdown_threshold = kDefaultSlowdownThreshold,
                          Bytes fixed_block = kDefaultFixedBlock);

struct Table4Row {
  const char* name;
  double native_ms;
  double remote_sync_ms;
  double exec_ms;
  double nonpipeline_ms;
  double pipeline_pcie_ms;
  double pipeline_nvlink_ms;
  bool heavy;
  double footprint_gib;
  double params_m;  // fp32 parameters, millions
};

const std::vector<Table4Row>& table4();

std::vector<ModelProfile> default_catalog(const SwapCalibration& cal = {},
                                          double slowdown_threshold = kDefaultSlowdownThreshold,
                                          Bytes fixed_block = kDefaultFixedBlock);

std::vector<ModelProfile> load_model_catalog(const std::string& path, const SwapCalibration& cal = {},
                                             double slowdown_threshold = kDefaultSlowdownThreshold,
                                             Bytes fixed_block = kDefaultFixedBlock);
void write_model_catalog(const std::string& path, const std::vector<ModelProfile>& catalog);

std::size_t find_model(const std::vector<ModelProfile>& catalog, const std::string& name);

struct FunctionSpec {
  std::string id;
  std::size_t model = 0;  // index into the catalog
  double deadline_ms = 0;
  double tail_percentile = 0.98;

  void validate() const;
  bool operator==(const FunctionSpec&) const = default;
};

struct Request {
  std::uint32_t function = 0;  // index into the function list
  Micros arrival = 0;
  std::uint64_t seq = 0;
  bool operator==(const Request&) const = default;
};

struct Trace {
  std::vector<Request> requests;
  Micros duration = 0;
  bool operator==(const Trace&) const = default;
  void validate(std::size_t function_count) const;
};

struct FunctionRate {
  std::uint32_t function = 0;
  double rate_per_minute = 0;
};

Trace gen_poisson_trace(const std::vector<FunctionRate>& functions, Micros duration, std::uint64_t seed);

Trace load_trace(const std::string& path, const std::vector<FunctionSpec>& functions);
void write_trace(const std::string& path, const Trace& trace, const std::vector<FunctionSpec>& functions);

// Shortest text that parses back to the same double.
std::string format_double(double v);

}  // namespace swapsim

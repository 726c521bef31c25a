// swapsim: simulate, gen-trace, report, dump-config.
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <tuple>

#include "CLI11.hpp"
#include "swapsim/config.hpp"
#include "swapsim/error.hpp"
#include "swapsim/report.hpp"

namespace fs = std::filesystem;
using namespace swapsim;
using nlohmann::ordered_json;

namespace {

constexpr int kOk = 0;
constexpr int kValidation = 2;
constexpr int kRuntime = 3;

// Validation-class errors: the input is wrong, not the run.
bool is_validation(ErrorKind k) {
  return k == ErrorKind::Config || k == ErrorKind::Parse || k == ErrorKind::Reference || k == ErrorKind::InvalidParameter;
}

void setup_logging() {
  auto logger = spdlog::stderr_color_mt("swapsim");
  spdlog::set_default_logger(logger);
  spdlog::set_pattern("[%l] %v");
  spdlog::set_level(spdlog::level::warn);
  if (const char* env = std::getenv("SWAPSIM_LOG")) {
    const std::string v = env;
    const auto lvl = spdlog::level::from_str(v);
    if (lvl == spdlog::level::off && v != "off") {
      spdlog::warn("SWAPSIM_LOG='{}' is not a level (trace, debug, info, warn, error, critical, off)", v);
    } else {
      spdlog::set_level(lvl);
    }
  }
}

std::ofstream open_out(const fs::path& p) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + p.string());
  return out;
}

struct SimulateArgs {
  std::string config, out;
  std::optional<std::string> policy;
  std::optional<std::uint64_t> seed;
  std::vector<std::string> overrides;
  bool requests = false, decisions = false;
};

int cmd_simulate(const SimulateArgs& a) {
  SimConfig cfg = load_config(a.config);
  if (a.policy) cfg.policy = *a.policy;
  if (a.seed) cfg.seed = *a.seed;
  for (const auto& o : a.overrides) apply_override(cfg, o);
  cfg.validate();
  const Workload w = build_workload(cfg);
  fs::create_directories(a.out);
  const fs::path dir(a.out);
  spdlog::info("simulate: policy {}, {} functions, {} requests, {} node(s)", cfg.policy, w.functions.size(),
               w.trace.requests.size(), cfg.nodes);

  ordered_json doc;
  std::vector<SimReport> node_reports;
  std::optional<ClusterReport> crep;
  if (cfg.nodes == 1 && cfg.max_nodes == 1) {
    node_reports.push_back(run(cfg.engine(), w.catalog, w.functions, w.trace));
    doc = report_json(node_reports[0], cfg.seed);
  } else {
    Cluster cluster(cfg.cluster(), w.catalog, w.functions, w.rate_per_min);
    crep = cluster.run(w.trace);
    for (int n = 0; n < static_cast<int>(cluster.node_count()); ++n)
      node_reports.push_back(cluster.engine(n).report(w.trace.duration));
    doc = report_json(*crep, cfg.seed);
    auto out = open_out(dir / "migrations.csv");
    write_migrations_csv(out, *crep);
  }
  NodeReports nodes;
  for (std::size_t i = 0; i < node_reports.size(); ++i) nodes.push_back({static_cast<int>(i), &node_reports[i]});
  {
    auto out = open_out(dir / "report.json");
    out << doc.dump(2) << '\n';
  }
  {
    auto out = open_out(dir / "alpha.csv");
    write_alpha_csv(out, nodes);
  }
  if (a.requests) {
    auto out = open_out(dir / "requests.csv");
    write_requests_csv(out, nodes);
  }
  if (a.decisions) {
    auto out = open_out(dir / "decisions.csv");
    write_decisions_csv(out, nodes);
  }
  std::cout << "policy " << cfg.policy << ": SLO ratio " << format_double(doc["slo_ratio"].get<double>()) << " over "
            << w.functions.size() << " functions, report in " << (dir / "report.json").string() << '\n';
  return kOk;
}

int cmd_gen_trace(const std::string& config, const std::string& out_path, const std::vector<std::string>& overrides) {
  SimConfig cfg = load_config(config);
  for (const auto& o : overrides) apply_override(cfg, o);
  cfg.trace.clear();
  const Workload w = build_workload(cfg);
  write_trace(out_path, w.trace, w.functions);
  spdlog::info("gen-trace: {} requests to {}", w.trace.requests.size(), out_path);
  return kOk;
}

struct Run {
  std::string dir;
  ordered_json doc;
};

std::vector<Run> load_runs(const std::vector<std::string>& dirs) {
  for (const auto& d : dirs) {
    require(fs::is_directory(d), ErrorKind::Config, "run directory not found: " + d);
    require(fs::exists(fs::path(d) / "report.json"), ErrorKind::Config, "no report.json in " + d);
  }
  std::vector<Run> runs(dirs.size());
  std::vector<std::string> errors(dirs.size());
#pragma omp parallel for schedule(dynamic, 1)
  for (std::size_t i = 0; i < dirs.size(); ++i) {
    runs[i].dir = dirs[i];
    std::ifstream in(fs::path(dirs[i]) / "report.json");
    try {
      runs[i].doc = ordered_json::parse(in);
      if (runs[i].doc.value("format", "") != kReportFormat) errors[i] = dirs[i] + ": not a " + kReportFormat + " file";
    } catch (const std::exception& e) {
      errors[i] = dirs[i] + ": " + e.what();
    }
  }
  for (const auto& e : errors) require(e.empty(), ErrorKind::Parse, e);
  std::stable_sort(runs.begin(), runs.end(), [](const Run& a, const Run& b) {
    const auto ka = std::make_tuple(a.doc["policy"].get<std::string>(), a.doc["function_count"].get<std::size_t>());
    const auto kb = std::make_tuple(b.doc["policy"].get<std::string>(), b.doc["function_count"].get<std::size_t>());
    return ka < kb;
  });
  return runs;
}

struct Row {
  std::string run, policy, mode;
  std::size_t functions = 0, nodes = 0;
  double slo = 0, p99 = 0, heavy_no_host = 0, light_no_host = 0, mean_load = 0, max_variance = 0;
  std::uint64_t completed = 0, rejected = 0;
};

Row summarize(const Run& r) {
  const auto& d = r.doc;
  Row row;
  row.run = r.dir;
  row.policy = d["policy"];
  row.mode = d["mode"];
  row.functions = d["function_count"];
  row.nodes = d["nodes"].size();
  row.slo = d["slo_ratio"];
  row.p99 = d["normalized_p99"];
  row.heavy_no_host = d["swaps"]["heavy"]["no_host_share"];
  row.light_no_host = d["swaps"]["light"]["no_host_share"];
  row.completed = d["completed"];
  row.rejected = d["rejected"];
  double sum = 0;
  std::size_t gpus = 0;
  for (const auto& n : d["nodes"]) {
    for (const auto& l : n["gpu_load"]) {
      sum += l.get<double>();
      ++gpus;
    }
    row.max_variance = std::max(row.max_variance, n["load_variance"].get<double>());
  }
  row.mean_load = gpus ? sum / static_cast<double>(gpus) : 0;
  return row;
}

const char* kColumns = "run,policy,mode,functions,nodes,slo_ratio,normalized_p99,heavy_no_host,light_no_host,mean_gpu_load,"
                       "max_load_variance,completed,rejected";

void print_rows(const std::vector<Row>& rows, const std::string& format) {
  if (format == "csv") {
    std::cout << "# swapsim-table v1\n" << kColumns << '\n';
    for (const auto& r : rows) {
      std::cout << r.run << ',' << r.policy << ',' << r.mode << ',' << r.functions << ',' << r.nodes << ','
                << format_double(r.slo) << ',' << format_double(r.p99) << ',' << format_double(r.heavy_no_host) << ','
                << format_double(r.light_no_host) << ',' << format_double(r.mean_load) << ','
                << format_double(r.max_variance) << ',' << r.completed << ',' << r.rejected << '\n';
    }
    return;
  }
  std::printf("%-16s %-8s %9s %6s %9s %9s %9s %9s %11s\n", "policy", "mode", "functions", "nodes", "slo", "p99/ddl",
              "heavy-nh", "mean-load", "max-var");
  for (const auto& r : rows) {
    std::printf("%-16s %-8s %9zu %6zu %9.3f %9.3f %9.3f %9.3f %11.3g\n", r.policy.c_str(), r.mode.c_str(), r.functions,
                r.nodes, r.slo, r.p99, r.heavy_no_host, r.mean_load, r.max_variance);
  }
}

void write_series(const std::vector<Run>& runs, const fs::path& dir) {
  fs::create_directories(dir);
  {
    auto out = open_out(dir / "slo_vs_functions.csv");
    out << "# swapsim-series v1\npolicy,functions,slo_ratio\n";
    for (const auto& r : runs)
      out << r.doc["policy"].get<std::string>() << ',' << r.doc["function_count"].get<std::size_t>() << ','
          << format_double(r.doc["slo_ratio"].get<double>()) << '\n';
  }
  {
    auto out = open_out(dir / "latency_cdf.csv");
    out << "# swapsim-series v1\nrun,policy,functions,quantile,latency_over_deadline\n";
    for (const auto& r : runs)
      for (const auto& p : r.doc["latency_cdf"])
        out << r.dir << ',' << r.doc["policy"].get<std::string>() << ',' << r.doc["function_count"].get<std::size_t>()
            << ',' << format_double(p[0].get<double>()) << ',' << format_double(p[1].get<double>()) << '\n';
  }
  {
    auto out = open_out(dir / "gpu_load.csv");
    out << "# swapsim-series v1\nrun,policy,node,gpu,load,node_load_variance\n";
    for (const auto& r : runs)
      for (const auto& n : r.doc["nodes"]) {
        int g = 0;
        for (const auto& l : n["gpu_load"])
          out << r.dir << ',' << r.doc["policy"].get<std::string>() << ',' << n["id"].get<int>() << ',' << g++ << ','
              << format_double(l.get<double>()) << ',' << format_double(n["load_variance"].get<double>()) << '\n';
      }
  }
}

int cmd_report(const std::vector<std::string>& dirs, const std::string& format, const std::string& series) {
  const auto runs = load_runs(dirs);
  std::vector<Row> rows;
  for (const auto& r : runs) rows.push_back(summarize(r));
  if (format == "json") {
    ordered_json a = ordered_json::array();
    for (const auto& r : rows)
      a.push_back({{"run", r.run},
                   {"policy", r.policy},
                   {"mode", r.mode},
                   {"functions", r.functions},
                   {"nodes", r.nodes},
                   {"slo_ratio", r.slo},
                   {"normalized_p99", r.p99},
                   {"heavy_no_host", r.heavy_no_host},
                   {"light_no_host", r.light_no_host},
                   {"mean_gpu_load", r.mean_load},
                   {"max_load_variance", r.max_variance},
                   {"completed", r.completed},
                   {"rejected", r.rejected}});
    std::cout << a.dump(2) << '\n';
  } else {
    print_rows(rows, format);
  }
  if (!series.empty()) write_series(runs, series);
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  setup_logging();
  CLI::App app{"swapsim: GPU model-swapping simulator for serverless inference"};
  app.require_subcommand(1);

  SimulateArgs sim;
  auto* s = app.add_subcommand("simulate", "Run one configuration and write report.json and CSV detail");
  s->add_option("-c,--config", sim.config, "Config file (INI)")->required();
  s->add_option("-o,--out", sim.out, "Output directory")->required();
  s->add_option("--policy", sim.policy, "Override run.policy");
  s->add_option("--seed", sim.seed, "Override run.seed");
  s->add_option("--set", sim.overrides, "Override a config key: section.key=value (repeatable)");
  s->add_flag("--requests", sim.requests, "Also write requests.csv");
  s->add_flag("--decisions", sim.decisions, "Also write decisions.csv");

  std::string trace_config, trace_out;
  auto* g = app.add_subcommand("gen-trace", "Write the config's Poisson arrivals as a trace CSV");
  g->add_option("-c,--config", trace_config, "Config file (INI)")->required();
  g->add_option("-o,--out", trace_out, "Trace file to write")->required();
  std::vector<std::string> trace_overrides;
  g->add_option("--set", trace_overrides, "Override a config key: section.key=value (repeatable)");

  std::vector<std::string> runs;
  std::string format = "table", series;
  auto* r = app.add_subcommand("report", "Compare runs and export plot series");
  r->add_option("runs", runs, "Run directories (each holding report.json)")->required();
  r->add_option("--format", format, "table, csv or json")->check(CLI::IsMember({"table", "csv", "json"}));
  r->add_option("--series", series, "Directory for CSV plot series");

  std::string dump_out;
  auto* d = app.add_subcommand("dump-config", "Print the default config");
  d->add_option("-o,--out", dump_out, "Write to a file instead of stdout");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kValidation;
  }

  try {
    if (*s) return cmd_simulate(sim);
    if (*g) return cmd_gen_trace(trace_config, trace_out, trace_overrides);
    if (*r) return cmd_report(runs, format, series);
    if (*d) {
      if (dump_out.empty()) {
        write_config(std::cout, SimConfig{});
      } else {
        auto out = open_out(dump_out);
        write_config(out, SimConfig{});
      }
      return kOk;
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return is_validation(e.kind()) ? kValidation : kRuntime;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kRuntime;
  }
  return kRuntime;
}

// pfplm: simulate, bench, live sender/reflector, golden vectors.
//
// Exit codes: 0 ok, 1 internal error, 2 usage/config, 3 protocol failure or
// FAIL verdict, 4 I/O.

#include <atomic>
#include <csignal>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <mutex>

#include "CLI11.hpp"
#include "pfplm/bench.hpp"
#include "pfplm/config.hpp"
#include "pfplm/endpoint.hpp"
#include "pfplm/error.hpp"
#include "pfplm/golden.hpp"
#include "pfplm/simnet.hpp"

namespace {

using namespace pfplm;

enum Exit : int { kOk = 0, kInternal = 1, kConfig = 2, kProtocol = 3, kIo = 4 };

std::atomic<bool> g_stop{false};

void on_signal(int) { g_stop = true; }

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  return out;
}

// --- simulate --------------------------------------------------------------------

struct SimulateArgs {
  std::string scenario;
  std::string csv;
  std::string events;
  bool quiet = false;
};

int cmd_simulate(const SimulateArgs& a) {
  sim::Scenario scenario = config::parse_scenario(config::read_file(a.scenario));
  if (!a.events.empty()) scenario.record_event_log = true;
  std::ofstream csv, events;
  if (!a.csv.empty()) csv = open_out(a.csv);
  if (!a.events.empty()) events = open_out(a.events);

  const sim::SimResult result = sim::run_scenario(scenario);

  if (!a.quiet) {
    std::cout << std::left << std::setw(6) << "flow" << std::setw(7) << "block" << std::setw(7)
              << "color" << std::setw(10) << "tx" << std::setw(10) << "rx" << std::setw(8)
              << "loss" << "truth\n";
    for (const auto& f : result.flows) {
      for (const auto& r : f.records) {
        const auto it = f.truth.find(r.block_index);
        const std::uint64_t truth = it == f.truth.end() ? 0 : it->second.dropped;
        std::cout << std::setw(6) << f.flow << std::setw(7) << r.block_index << std::setw(7)
                  << to_string(r.block_color) << std::setw(10) << r.tx_count << std::setw(10)
                  << r.rx_count << std::setw(8) << r.loss << truth << '\n';
      }
      for (const auto& g : f.gaps) {
        std::cout << "gap flow=" << f.flow << " block=" << g.block_index
                  << " seq=" << g.sender_seq << '\n';
      }
      for (const auto& e : f.protocol_errors) std::cout << "error flow=" << f.flow << ": " << e << '\n';
    }
  }
  if (csv.is_open()) {
    sim::write_results_csv(result, csv);
    if (!csv) throw IoError("failed writing " + a.csv);
  }
  if (events.is_open()) {
    sim::write_event_log(result, events);
    if (!events) throw IoError("failed writing " + a.events);
  }

  std::uint64_t records = 0;
  for (const auto& f : result.flows) records += f.records.size();
  std::cout << "packets=" << result.data_packets << " dropped=" << result.data_dropped
            << " records=" << records << '\n';
  if (result.exact()) {
    std::cout << "PASS: every reported loss matches ground truth\n";
    return kOk;
  }
  for (const auto& m : result.mismatches()) std::cout << "  " << m << '\n';
  std::cout << "FAIL: reported loss differs from ground truth\n";
  return kProtocol;
}

// --- bench -------------------------------------------------------------------------

struct BenchArgs {
  std::string config;
  std::vector<std::string> engines;
  std::vector<std::string> roles;
  std::vector<std::size_t> flows;
  std::optional<std::size_t> repetitions;
  std::optional<double> trial_ms;
  std::optional<double> min_trial_ms;
  std::optional<std::uint64_t> min_packets;
  std::optional<double> warmup_ms;
  std::optional<double> unmatched;
  std::optional<std::size_t> sids_per_list;
  bool no_coloring = false;
  std::string csv;
  std::string plot;
};

std::chrono::nanoseconds ms(double v) {
  return std::chrono::nanoseconds(static_cast<std::int64_t>(v * 1e6));
}

int cmd_bench(const BenchArgs& a) {
  bench::BenchConfig c;
  if (!a.config.empty()) c = config::parse_bench(config::read_file(a.config));
  if (!a.engines.empty()) {
    c.engines.clear();
    for (const auto& e : a.engines) c.engines.push_back(parse_engine_kind(e));
  }
  if (!a.roles.empty()) {
    c.roles.clear();
    for (const auto& r : a.roles) c.roles.push_back(bench::parse_role(r));
  }
  if (!a.flows.empty()) c.flow_counts = a.flows;
  if (a.repetitions) c.repetitions = *a.repetitions;
  if (a.trial_ms) c.trial_duration = ms(*a.trial_ms);
  if (a.min_trial_ms) c.min_trial_duration = ms(*a.min_trial_ms);
  if (a.min_packets) c.min_trial_packets = *a.min_packets;
  if (a.warmup_ms) c.warmup_duration = ms(*a.warmup_ms);
  if (a.unmatched) c.unmatched_fraction = *a.unmatched;
  if (a.sids_per_list) c.sids_per_list = *a.sids_per_list;
  if (a.no_coloring) c.include_coloring = false;
  bench::validate(c);

  std::ofstream csv, plot;
  if (!a.csv.empty()) csv = open_out(a.csv);
  if (!a.plot.empty()) plot = open_out(a.plot);

  const bench::BenchResult result = bench::run_bench(c);
  bench::write_csv(result, csv.is_open() ? static_cast<std::ostream&>(csv) : std::cout);
  if (plot.is_open()) bench::write_plot_data(result, plot);
  bool consistent = true;
  for (const auto& row : result.rows) consistent = consistent && row.counters_consistent;
  if (!consistent) {
    std::cerr << "counter sanity check failed: matched packets differ from generated\n";
    return kProtocol;
  }
  return kOk;
}

// --- live endpoints ----------------------------------------------------------------

struct EndpointArgs {
  std::string config;
  std::optional<double> run_for_ms;
  std::optional<std::uint16_t> lm_port;
  std::string report;
};

live::EndpointConfig load_endpoint(const EndpointArgs& a, live::EndpointRole role) {
  live::EndpointConfig c = config::parse_endpoint(config::read_file(a.config));
  c.role = role;
  if (a.run_for_ms) c.run_for = ms(*a.run_for_ms);
  if (a.lm_port) c.lm_port = *a.lm_port;
  live::validate(c);
  return c;
}

int cmd_sender(const EndpointArgs& a) {
  const live::EndpointConfig c = load_endpoint(a, live::EndpointRole::kSender);
  std::ofstream report;
  if (!a.report.empty()) {
    report = open_out(a.report);
    report << "flow,block,color,tx,rx,loss\n";
  }
  std::mutex out_mutex;
  bool unknown_flow = false;
  live::SenderEvents events;
  events.on_record = [&](std::size_t flow, const lm::LossRecord& r) {
    std::lock_guard lock(out_mutex);
    std::cout << "record flow=" << flow << " block=" << r.block_index
              << " color=" << to_string(r.block_color) << " tx=" << r.tx_count
              << " rx=" << r.rx_count << " loss=" << r.loss << std::endl;
    if (report.is_open()) {
      report << flow << ',' << r.block_index << ',' << to_string(r.block_color) << ','
             << r.tx_count << ',' << r.rx_count << ',' << r.loss << '\n';
    }
  };
  events.on_gap = [&](std::size_t flow, const lm::Gap& g) {
    std::lock_guard lock(out_mutex);
    std::cout << "gap flow=" << flow << " block=" << g.block_index
              << " color=" << to_string(g.block_color) << " seq=" << g.sender_seq << std::endl;
  };
  events.on_error = [&](std::size_t flow, const std::string& message) {
    std::lock_guard lock(out_mutex);
    if (message.find("does not monitor") != std::string::npos) unknown_flow = true;
    std::cout << "error flow=" << flow << ": " << message << std::endl;
  };
  live::SenderEndpoint sender(c, events);
  std::cerr << "sender: " << c.flows.size() << " flow(s) -> " << c.peer_address << ':'
            << c.lm_port << '\n';
  sender.run(g_stop);
  const auto s = sender.stats();
  std::cerr << "sender: data=" << s.data_sent << " queries=" << s.queries_sent
            << " records=" << s.records << " gaps=" << s.gaps << " errors=" << s.errors << '\n';
  if (report.is_open() && !report) throw IoError("failed writing " + a.report);
  return unknown_flow ? kProtocol : kOk;
}

int cmd_reflector(const EndpointArgs& a) {
  const live::EndpointConfig c = load_endpoint(a, live::EndpointRole::kReflector);
  live::ReflectorEndpoint reflector(c);
  std::cerr << "reflector: listening on " << c.bind_address << ':' << reflector.local_port()
            << " for " << c.flows.size() << " flow(s)\n";
  reflector.run(g_stop);
  const auto s = reflector.stats();
  std::cerr << "reflector: data=" << s.data_received << " queries=" << s.queries
            << " malformed=" << s.malformed << '\n';
  return kOk;
}

// --- vectors -----------------------------------------------------------------------

int cmd_vectors_dump(const std::string& out_path) {
  const std::string doc = golden::dump_vectors();
  if (out_path.empty()) {
    std::cout << doc;
  } else {
    auto out = open_out(out_path);
    out << doc;
    if (!out) throw IoError("failed writing " + out_path);
  }
  return kOk;
}

int cmd_vectors_verify(const std::vector<std::string>& files) {
  std::size_t failed = 0;
  std::size_t total = 0;
  for (const auto& file : files) {
    for (const auto& check : golden::verify_vectors(config::read_file(file))) {
      ++total;
      if (check.passed) {
        std::cout << "PASS " << check.name << '\n';
      } else {
        ++failed;
        std::cout << "FAIL " << check.name << ": " << check.detail << '\n';
      }
    }
  }
  std::cout << (total - failed) << '/' << total << " vectors passed\n";
  return failed == 0 ? kOk : kProtocol;
}

int run(int argc, char** argv) {
  CLI::App app{"Per-flow packet loss monitoring for SRv6: simulator, benchmark, live endpoints"};
  app.require_subcommand(1);

  SimulateArgs sim_args;
  auto* simulate = app.add_subcommand("simulate", "Run a simnet scenario and compare with ground truth");
  simulate->add_option("scenario", sim_args.scenario, "Scenario JSON file")->required();
  simulate->add_option("--csv", sim_args.csv, "Write per-block results as CSV");
  simulate->add_option("--events", sim_args.events, "Write the per-packet event log");
  simulate->add_flag("-q,--quiet", sim_args.quiet, "Only print the verdict");

  BenchArgs bench_args;
  auto* bench = app.add_subcommand("bench", "Throughput versus number of monitored flows");
  bench->add_option("--config", bench_args.config, "Bench JSON file (flags override it)");
  bench->add_option("--engine", bench_args.engines, "linear and/or hash (repeatable)");
  bench->add_option("--role", bench_args.roles, "ingress and/or egress (repeatable)");
  bench->add_option("--flows", bench_args.flows, "Flow counts, ascending")->delimiter(',');
  bench->add_option("--repetitions", bench_args.repetitions, "Trials per configuration");
  bench->add_option("--trial-ms", bench_args.trial_ms, "Trial duration");
  bench->add_option("--min-trial-ms", bench_args.min_trial_ms, "Shortest accepted trial duration");
  bench->add_option("--min-packets", bench_args.min_packets, "Minimum packets per trial");
  bench->add_option("--warmup-ms", bench_args.warmup_ms, "Discarded warm-up trial duration");
  bench->add_option("--unmatched", bench_args.unmatched, "Share of traffic that misses the flow table");
  bench->add_option("--sids", bench_args.sids_per_list, "SIDs per list");
  bench->add_flag("--no-coloring", bench_args.no_coloring, "Skip counting+coloring rows");
  bench->add_option("--csv", bench_args.csv, "CSV output (default stdout)");
  bench->add_option("--plot", bench_args.plot, "Plot-data output");

  EndpointArgs sender_args;
  auto* sender = app.add_subcommand("sender", "Live sender: encapsulate, color, count, query");
  sender->add_option("config", sender_args.config, "Endpoint JSON file")->required();
  sender->add_option("--run-for-ms", sender_args.run_for_ms, "Stop after this long");
  sender->add_option("--lm-port", sender_args.lm_port, "Reflector LM port");
  sender->add_option("--report", sender_args.report, "Append loss records as CSV");

  EndpointArgs reflector_args;
  auto* reflector = app.add_subcommand("reflector", "Live reflector: count and answer queries");
  reflector->add_option("config", reflector_args.config, "Endpoint JSON file")->required();
  reflector->add_option("--run-for-ms", reflector_args.run_for_ms, "Stop after this long");
  reflector->add_option("--lm-port", reflector_args.lm_port, "Port to listen on");

  auto* vectors = app.add_subcommand("vectors", "Golden wire vectors");
  vectors->require_subcommand(1);
  std::string dump_out;
  auto* dump = vectors->add_subcommand("dump", "Print the built-in vectors as JSON");
  dump->add_option("-o,--out", dump_out, "Output file (default stdout)");
  std::vector<std::string> verify_files;
  auto* verify = vectors->add_subcommand("verify", "Check vector files against the codec");
  verify->add_option("files", verify_files, "Vector JSON files")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kConfig;
  }

  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);

  if (*simulate) return cmd_simulate(sim_args);
  if (*bench) return cmd_bench(bench_args);
  if (*sender) return cmd_sender(sender_args);
  if (*reflector) return cmd_reflector(reflector_args);
  if (*dump) return cmd_vectors_dump(dump_out);
  if (*verify) return cmd_vectors_verify(verify_files);
  return kConfig;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfig;
  } catch (const SimError& e) {
    std::cerr << "scenario error: " << e.what() << '\n';
    return e.code() == SimErrc::kInvalidScenario ? kConfig : kInternal;
  } catch (const BenchError& e) {
    std::cerr << "bench error: " << e.what() << '\n';
    return e.code() == BenchErrc::kNoConvergence ? kProtocol : kConfig;
  } catch (const ProtocolError& e) {
    std::cerr << "protocol error: " << e.what() << '\n';
    return kProtocol;
  } catch (const IoError& e) {
    std::cerr << "I/O error: " << e.what() << '\n';
    return kIo;
  } catch (const std::ios_base::failure& e) {
    std::cerr << "I/O error: " << e.what() << '\n';
    return kIo;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kInternal;
  }
}

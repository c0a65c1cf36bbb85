#include "pfplm/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <initializer_list>
#include <limits>
#include <sstream>

#include "json.hpp"
#include "pfplm/error.hpp"

namespace pfplm::config {

namespace {

using nlohmann::json;

// A JSON node together with its location, for error messages.
struct Node {
  const json& value;
  std::string path;

  [[noreturn]] void fail(const std::string& what) const {
    throw ConfigError((path.empty() ? std::string("/") : path) + ": " + what);
  }

  Node at(std::string_view key) const { return {value.at(std::string(key)), path + "/" + std::string(key)}; }
  Node at(std::size_t i) const { return {value.at(i), path + "/" + std::to_string(i)}; }
  bool has(std::string_view key) const { return value.contains(std::string(key)); }

  void expect_object(std::initializer_list<std::string_view> allowed) const {
    if (!value.is_object()) fail("expected an object");
    for (const auto& [key, _] : value.items()) {
      bool known = false;
      for (auto a : allowed) known = known || a == key;
      if (!known) fail("unknown key '" + key + "'");
    }
  }

  void expect_array() const {
    if (!value.is_array()) fail("expected an array");
  }

  std::string str() const {
    if (!value.is_string()) fail("expected a string");
    return value.get<std::string>();
  }

  bool boolean() const {
    if (!value.is_boolean()) fail("expected true or false");
    return value.get<bool>();
  }

  double number() const {
    if (!value.is_number()) fail("expected a number");
    const double v = value.get<double>();
    if (!std::isfinite(v)) fail("expected a finite number");
    return v;
  }

  std::uint64_t unsigned_int() const {
    if (!value.is_number_unsigned()) fail("expected a non-negative integer");
    return value.get<std::uint64_t>();
  }

  Duration millis() const {
    const double ms = number();
    if (std::fabs(ms) > 9.0e12) fail("time out of range");
    return Duration{static_cast<std::int64_t>(std::llround(ms * 1e6))};
  }

  template <class T, class F>
  T wrap(F&& f) const {
    try {
      return f();
    } catch (const ConfigError& e) {
      fail(e.what());
    } catch (const Error& e) {
      fail(e.what());
    }
  }
};

json parse_document(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("parse error: ") + e.what());
  }
  return doc;
}

void check_version(const Node& root) {
  if (!root.value.is_object()) root.fail("expected an object");
  if (!root.has("schema_version")) root.fail("missing schema_version");
  const auto v = root.at("schema_version").unsigned_int();
  if (v != static_cast<std::uint64_t>(kSchemaVersion)) {
    root.fail("unsupported schema_version " + std::to_string(v) + " (expected " +
              std::to_string(kSchemaVersion) + ")");
  }
}

SidList sids_of(const Node& n) {
  return n.wrap<SidList>([&] { return SidList::parse(n.str()); });
}

Ipv6Address address_of(const Node& n) {
  return n.wrap<Ipv6Address>([&] { return Ipv6Address::from_string(n.str()); });
}

EngineKind engine_of(const Node& n) {
  return n.wrap<EngineKind>([&] { return parse_engine_kind(n.str()); });
}

sim::DropPlan drop_plan_of(const Node& n) {
  n.expect_object({"indices", "probability", "seed"});
  sim::DropPlan plan;
  if (n.has("indices") && n.has("probability")) n.fail("use either indices or probability");
  if (n.has("indices")) {
    const Node list = n.at("indices");
    list.expect_array();
    for (std::size_t i = 0; i < list.value.size(); ++i) plan.indices.insert(list.at(i).unsigned_int());
  }
  if (n.has("probability")) {
    plan.probability = n.at("probability").number();
    if (plan.probability < 0.0 || plan.probability > 1.0) n.fail("probability must be in [0, 1]");
  }
  if (n.has("seed")) plan.seed = n.at("seed").unsigned_int();
  return plan;
}

sim::LmTarget target_of(const Node& n, std::initializer_list<std::string_view> extra = {}) {
  std::vector<std::string_view> keys{"flow", "seq"};
  keys.insert(keys.end(), extra.begin(), extra.end());
  if (!n.value.is_object()) n.fail("expected an object");
  for (const auto& [key, _] : n.value.items()) {
    if (std::find(keys.begin(), keys.end(), key) == keys.end()) n.fail("unknown key '" + key + "'");
  }
  if (!n.has("flow") || !n.has("seq")) n.fail("flow and seq are required");
  const auto seq = n.at("seq").unsigned_int();
  if (seq > std::numeric_limits<std::uint32_t>::max()) n.fail("seq out of range");
  return {static_cast<std::size_t>(n.at("flow").unsigned_int()), static_cast<std::uint32_t>(seq)};
}

std::uint16_t port_of(const Node& n) {
  const auto p = n.unsigned_int();
  if (p > 65535) n.fail("port out of range");
  return static_cast<std::uint16_t>(p);
}

}  // namespace

sim::Scenario parse_scenario(std::string_view json_text) {
  const json doc = parse_document(json_text);
  const Node root{doc, ""};
  check_version(root);
  root.expect_object({"schema_version", "period_ms", "blocks", "seed", "engine", "guard_ms",
                      "record_event_log", "link", "flows", "faults"});

  sim::Scenario s;
  if (root.has("period_ms")) s.period = root.at("period_ms").millis();
  if (root.has("blocks")) s.blocks = root.at("blocks").unsigned_int();
  if (root.has("seed")) s.seed = root.at("seed").unsigned_int();
  if (root.has("engine")) s.engine = engine_of(root.at("engine"));
  if (root.has("guard_ms")) s.guard = root.at("guard_ms").millis();
  if (root.has("record_event_log")) s.record_event_log = root.at("record_event_log").boolean();

  if (root.has("link")) {
    const Node link = root.at("link");
    link.expect_object({"delay_ms", "data_drops", "protect_lm", "lm_drops"});
    if (link.has("delay_ms")) s.link.propagation_delay = link.at("delay_ms").millis();
    if (link.has("data_drops")) s.link.data_drops = drop_plan_of(link.at("data_drops"));
    if (link.has("protect_lm")) s.link.protect_lm = link.at("protect_lm").boolean();
    if (link.has("lm_drops")) s.link.lm_drops = drop_plan_of(link.at("lm_drops"));
  }

  if (!root.has("flows")) root.fail("missing flows");
  const Node flows = root.at("flows");
  flows.expect_array();
  for (std::size_t i = 0; i < flows.value.size(); ++i) {
    const Node f = flows.at(i);
    f.expect_object({"sids", "destination", "rate_pps", "start_ms", "stop_ms", "monitored"});
    if (!f.has("sids") || !f.has("destination")) f.fail("sids and destination are required");
    sim::FlowSpec spec;
    spec.sids = sids_of(f.at("sids"));
    spec.destination = address_of(f.at("destination"));
    if (f.has("rate_pps")) spec.rate_pps = f.at("rate_pps").number();
    if (f.has("start_ms")) spec.start = f.at("start_ms").millis();
    if (f.has("stop_ms")) spec.stop = f.at("stop_ms").millis();
    if (f.has("monitored")) spec.monitored = f.at("monitored").boolean();
    s.flows.push_back(std::move(spec));
  }

  if (root.has("faults")) {
    const Node faults = root.at("faults");
    faults.expect_object({"drop_queries", "drop_responses", "replay_responses", "reflector_restarts_ms"});
    for (const char* key : {"drop_queries", "drop_responses"}) {
      if (!faults.has(key)) continue;
      const Node list = faults.at(key);
      list.expect_array();
      auto& dest = std::string_view(key) == "drop_queries" ? s.faults.drop_queries
                                                           : s.faults.drop_responses;
      for (std::size_t i = 0; i < list.value.size(); ++i) dest.insert(target_of(list.at(i)));
    }
    if (faults.has("replay_responses")) {
      const Node list = faults.at("replay_responses");
      list.expect_array();
      for (std::size_t i = 0; i < list.value.size(); ++i) {
        const Node r = list.at(i);
        sim::Replay replay{target_of(r, {"extra_delay_ms"}), Duration{0}};
        if (r.has("extra_delay_ms")) replay.extra_delay = r.at("extra_delay_ms").millis();
        s.faults.replay_responses.push_back(replay);
      }
    }
    if (faults.has("reflector_restarts_ms")) {
      const Node list = faults.at("reflector_restarts_ms");
      list.expect_array();
      for (std::size_t i = 0; i < list.value.size(); ++i) {
        s.faults.reflector_restarts.push_back(Timestamp{list.at(i).millis()});
      }
    }
  }

  root.wrap<int>([&] {
    sim::validate(s);
    return 0;
  });
  return s;
}

live::EndpointConfig parse_endpoint(std::string_view json_text) {
  const json doc = parse_document(json_text);
  const Node root{doc, ""};
  check_version(root);
  root.expect_object({"schema_version", "role", "engine", "period_ms", "guard_ms",
                      "response_timeout_ms", "bind", "peer", "lm_port", "flows", "run_for_ms"});

  live::EndpointConfig c;
  if (root.has("role")) {
    const std::string role = root.at("role").str();
    if (role == "sender") {
      c.role = live::EndpointRole::kSender;
    } else if (role == "reflector") {
      c.role = live::EndpointRole::kReflector;
    } else {
      root.at("role").fail("expected sender or reflector");
    }
  }
  if (root.has("engine")) c.engine = engine_of(root.at("engine"));
  if (root.has("period_ms")) c.period = root.at("period_ms").millis();
  if (root.has("guard_ms")) c.guard = root.at("guard_ms").millis();
  if (root.has("response_timeout_ms")) c.response_timeout = root.at("response_timeout_ms").millis();
  if (root.has("bind")) c.bind_address = root.at("bind").str();
  if (root.has("peer")) c.peer_address = root.at("peer").str();
  if (root.has("lm_port")) c.lm_port = port_of(root.at("lm_port"));
  if (root.has("run_for_ms")) c.run_for = root.at("run_for_ms").millis();
  if (!root.has("flows")) root.fail("missing flows");
  const Node flows = root.at("flows");
  flows.expect_array();
  for (std::size_t i = 0; i < flows.value.size(); ++i) {
    const Node f = flows.at(i);
    f.expect_object({"sids", "destination", "rate_pps"});
    if (!f.has("sids") || !f.has("destination")) f.fail("sids and destination are required");
    live::EndpointFlow flow{sids_of(f.at("sids")), address_of(f.at("destination"))};
    if (f.has("rate_pps")) flow.rate_pps = f.at("rate_pps").number();
    c.flows.push_back(std::move(flow));
  }
  root.wrap<int>([&] {
    live::validate(c);
    return 0;
  });
  return c;
}

bench::BenchConfig parse_bench(std::string_view json_text) {
  const json doc = parse_document(json_text);
  const Node root{doc, ""};
  check_version(root);
  root.expect_object({"schema_version", "roles", "engines", "flow_counts", "sids_per_list",
                      "unmatched_fraction", "inner_payload_bytes", "coloring", "repetitions",
                      "trial_ms", "min_trial_packets", "min_trial_ms", "warmup_ms"});
  bench::BenchConfig c;
  if (root.has("roles")) {
    const Node list = root.at("roles");
    list.expect_array();
    c.roles.clear();
    for (std::size_t i = 0; i < list.value.size(); ++i) {
      const Node r = list.at(i);
      c.roles.push_back(r.wrap<bench::Role>([&] { return bench::parse_role(r.str()); }));
    }
  }
  if (root.has("engines")) {
    const Node list = root.at("engines");
    list.expect_array();
    c.engines.clear();
    for (std::size_t i = 0; i < list.value.size(); ++i) c.engines.push_back(engine_of(list.at(i)));
  }
  if (root.has("flow_counts")) {
    const Node list = root.at("flow_counts");
    list.expect_array();
    c.flow_counts.clear();
    for (std::size_t i = 0; i < list.value.size(); ++i) {
      c.flow_counts.push_back(static_cast<std::size_t>(list.at(i).unsigned_int()));
    }
  }
  if (root.has("sids_per_list")) c.sids_per_list = root.at("sids_per_list").unsigned_int();
  if (root.has("unmatched_fraction")) c.unmatched_fraction = root.at("unmatched_fraction").number();
  if (root.has("inner_payload_bytes")) {
    c.inner_payload_bytes = root.at("inner_payload_bytes").unsigned_int();
  }
  if (root.has("coloring")) c.include_coloring = root.at("coloring").boolean();
  if (root.has("repetitions")) c.repetitions = root.at("repetitions").unsigned_int();
  if (root.has("trial_ms")) c.trial_duration = root.at("trial_ms").millis();
  if (root.has("min_trial_packets")) c.min_trial_packets = root.at("min_trial_packets").unsigned_int();
  if (root.has("min_trial_ms")) c.min_trial_duration = root.at("min_trial_ms").millis();
  if (root.has("warmup_ms")) c.warmup_duration = root.at("warmup_ms").millis();
  root.wrap<int>([&] {
    bench::validate(c);
    return 0;
  });
  return c;
}

SrPolicyTable parse_policy_table(std::string_view json_text) {
  const json doc = parse_document(json_text);
  const Node root{doc, ""};
  check_version(root);
  root.expect_object({"schema_version", "policies"});
  if (!root.has("policies")) root.fail("missing policies");
  const Node list = root.at("policies");
  list.expect_array();
  SrPolicyTable table;
  for (std::size_t i = 0; i < list.value.size(); ++i) {
    const Node p = list.at(i);
    p.expect_object({"prefix", "sids", "monitored"});
    if (!p.has("prefix") || !p.has("sids")) p.fail("prefix and sids are required");
    SrPolicy policy;
    policy.prefix = p.wrap<Ipv6Prefix>([&] { return Ipv6Prefix::parse(p.at("prefix").str()); });
    policy.sids = sids_of(p.at("sids"));
    if (p.has("monitored")) policy.monitored = p.at("monitored").boolean();
    p.wrap<int>([&] {
      table.add(policy);
      return 0;
    });
  }
  return table;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw IoError("failed to read " + path.string());
  return ss.str();
}

}  // namespace pfplm::config

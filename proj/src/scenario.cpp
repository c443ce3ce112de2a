#include "escm/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <fmt/format.h>
#include <fstream>
#include <json.hpp>
#include <set>
#include <sstream>

#include "escm/error.hpp"

namespace escm {
namespace {

using nlohmann::json;

const char* mobility_name(MobilityModel m) { return m == MobilityModel::Formation ? "formation" : "waypoint"; }

// Reads one JSON object, remembering which keys were consumed so leftovers can be reported.
class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) fail("expected an object");
  }

  template <class T>
  void field(const char* key, T& out) {
    if (const json* v = take(key)) read(*v, join(key), out);
  }

  template <class F>
  void section(const char* key, F&& body) {
    if (const json* v = take(key)) {
      Section child(*v, join(key));
      body(child);
      child.finish();
    }
  }

  void finish() const {
    for (const auto& [key, value] : j_.items())
      if (!seen_.contains(key)) throw ConfigError(fmt::format("{}: unknown key", join(key.c_str())));
  }

  [[noreturn]] void fail(const std::string& what) const {
    throw ConfigError(fmt::format("{}: {}", path_.empty() ? "config" : path_, what));
  }

 private:
  const json* take(const char* key) {
    seen_.insert(key);
    const auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  std::string join(const char* key) const { return path_.empty() ? key : path_ + "." + key; }

  [[noreturn]] static void bad(const std::string& path, const char* what) {
    throw ConfigError(fmt::format("{}: expected {}", path, what));
  }

  static void read(const json& v, const std::string& path, double& out) {
    if (!v.is_number()) bad(path, "a number");
    out = v.get<double>();
  }
  static void read(const json& v, const std::string& path, int& out) {
    if (!v.is_number_integer()) bad(path, "an integer");
    const auto x = v.get<std::int64_t>();
    if (x < INT32_MIN || x > INT32_MAX) bad(path, "a 32-bit integer");
    out = static_cast<int>(x);
  }
  static void read(const json& v, const std::string& path, std::uint32_t& out) {
    if (!v.is_number_unsigned()) bad(path, "a non-negative integer");
    const auto x = v.get<std::uint64_t>();
    if (x > UINT32_MAX) bad(path, "a 32-bit integer");
    out = static_cast<std::uint32_t>(x);
  }
  static void read(const json& v, const std::string& path, std::uint64_t& out) {
    if (!v.is_number_unsigned()) bad(path, "a non-negative integer");
    out = v.get<std::uint64_t>();
  }
  static void read(const json& v, const std::string& path, bool& out) {
    if (!v.is_boolean()) bad(path, "true or false");
    out = v.get<bool>();
  }
  static void read(const json& v, const std::string& path, std::string& out) {
    if (!v.is_string()) bad(path, "a string");
    out = v.get<std::string>();
  }
  static void read(const json& v, const std::string& path, sim::Vec3& out) {
    if (!v.is_array() || v.size() != 3) bad(path, "an [x, y, z] array");
    read(v[0], path + "[0]", out.x);
    read(v[1], path + "[1]", out.y);
    read(v[2], path + "[2]", out.z);
  }
  static void read(const json& v, const std::string& path, MobilityModel& out) {
    std::string s;
    read(v, path, s);
    if (s == "formation") out = MobilityModel::Formation;
    else if (s == "waypoint") out = MobilityModel::Waypoint;
    else bad(path, "\"formation\" or \"waypoint\"");
  }
  static void read(const json& v, const std::string& path, ponc::Strategy& out) {
    std::string s;
    read(v, path, s);
    const auto parsed = ponc::parse_strategy(s);
    if (!parsed) bad(path, "one of score_inflation, dependent_vectors, verdict_inversion, abstention");
    out = *parsed;
  }
  template <class T>
  static void read(const json& v, const std::string& path, std::vector<T>& out) {
    if (!v.is_array()) bad(path, "an array");
    out.assign(v.size(), T{});
    for (std::size_t i = 0; i < v.size(); ++i) read(v[i], fmt::format("{}[{}]", path, i), out[i]);
  }
  static void read(const json& v, const std::string& path, Fig2Curve& out) {
    Section s(v, path);
    s.field("speed", out.speed);
    s.field("density", out.density);
    s.finish();
  }

  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

void read_channel(Section& s, analytics::ChannelParams& c) {
  s.field("transmit_power", c.transmit_power);
  s.field("noise_power", c.noise_power);
  s.field("path_loss_exponent", c.path_loss_exponent);
  s.field("snr_threshold_db", c.snr_threshold_db);
  s.field("density", c.density);
  s.field("node_count", c.node_count);
}

json write_channel(const analytics::ChannelParams& c) {
  return {{"transmit_power", c.transmit_power}, {"noise_power", c.noise_power},
          {"path_loss_exponent", c.path_loss_exponent}, {"snr_threshold_db", c.snr_threshold_db},
          {"density", c.density}, {"node_count", c.node_count}};
}

json vec3(const sim::Vec3& v) { return json::array({v.x, v.y, v.z}); }

void from_json_root(const json& j, ScenarioConfig& c) {
  Section root(j, "");
  root.field("seed", c.seed);
  root.field("volume", c.volume);
  root.section("drones", [&](Section& s) {
    auto& d = c.drones;
    s.field("count", d.count);
    s.field("speed_kmh", d.speed_kmh);
    s.field("malicious_fraction", d.malicious_fraction);
    s.field("malicious", d.malicious);
    s.field("mobility", d.mobility);
    s.field("formation_radius", d.formation_radius);
    s.field("positions", d.positions);
    s.section("capability", [&](Section& g) {
      g.field("mean", d.capability.mean);
      g.field("stddev", d.capability.stddev);
      g.field("min", d.capability.min);
      g.field("max", d.capability.max);
    });
  });
  root.section("channel", [&](Section& s) { read_channel(s, c.channel); });
  root.section("link", [&](Section& s) {
    s.field("range", c.link.range);
    s.field("mac_delay", c.link.mac_delay);
    s.field("light_speed", c.link.light_speed);
  });
  root.section("abc", [&](Section& s) {
    s.field("population", c.abc.population);
    s.field("max_generations", c.abc.max_generations);
    s.field("limit", c.abc.limit);
    s.field("weight_load", c.abc.weight_load);
    s.field("weight_success", c.abc.weight_success);
  });
  root.section("bees", [&](Section& s) {
    s.field("rate_hz", c.bees.rate_hz);
    s.field("ttl_hops", c.bees.ttl_hops);
    s.field("size_bits", c.bees.size_bits);
    s.field("dwell", c.bees.dwell);
    s.field("scout_probes", c.bees.scout_probes);
    s.field("entry_ttl", c.bees.entry_ttl);
  });
  root.section("message", [&](Section& s) {
    s.field("enabled", c.message.enabled);
    s.field("size_bits", c.message.size_bits);
    s.field("interval", c.message.interval);
  });
  root.field("candidates", c.candidates);
  root.section("topology", [&](Section& s) {
    s.field("relays", c.topology.relays);
    s.field("per_receiver", c.topology.per_receiver);
    s.field("receivers", c.topology.receivers);
    s.field("parallel_messages", c.topology.parallel_messages);
  });
  root.section("consensus", [&](Section& s) {
    s.field("max_retries", c.consensus.max_retries);
    s.field("inflation_factor", c.consensus.inflation_factor);
    s.field("strategy", c.consensus.strategy);
    s.field("ipc_latency", c.consensus.ipc_latency);
  });
  root.section("features", [&](Section& s) {
    s.field("coding", c.features.coding);
    s.field("ponc", c.features.ponc);
    s.field("dt", c.features.dt);
  });
  root.section("radio", [&](Section& s) {
    s.section("channel", [&](Section& ch) { read_channel(ch, c.radio.channel); });
    s.field("elapsed_time", c.radio.elapsed_time);
  });
  root.field("duration", c.duration);
  root.field("warmup", c.warmup);
  root.field("view_refresh", c.view_refresh);
  root.field("mobility_step", c.mobility_step);
  root.field("edge_radius", c.edge_radius);
  root.field("replications", c.replications);
  root.field("output_dir", c.output_dir);
  root.section("sweeps", [&](Section& s) {
    s.field("drone_counts", c.sweeps.drone_counts);
    s.field("speeds_kmh", c.sweeps.speeds_kmh);
  });
  root.section("fig2", [&](Section& s) {
    s.section("channel", [&](Section& ch) { read_channel(ch, c.fig2.channel); });
    s.field("elapsed_time", c.fig2.elapsed_time);
    s.field("curves", c.fig2.curves);
    s.field("committee_sizes", c.fig2.committee_sizes);
  });
  root.section("fig11", [&](Section& s) {
    s.field("committee", c.fig11.committee);
    s.field("parallel_messages", c.fig11.parallel_messages);
    s.field("relays", c.fig11.relays);
    s.field("hop_latency", c.fig11.hop_latency);
  });
  root.section("fig12", [&](Section& s) {
    auto& f = c.fig12;
    s.field("committee_sizes", f.committee_sizes);
    s.field("block_counts", f.block_counts);
    s.field("block_committee", f.block_committee);
    s.field("honest_rate", f.honest_rate);
    s.field("malicious_rates", f.malicious_rates);
    s.field("lead_blocks", f.lead_blocks);
    s.field("attack_population", f.attack_population);
    s.field("attack_committees", f.attack_committees);
    s.field("malicious_ratios", f.malicious_ratios);
    s.field("attack_trials", f.attack_trials);
  });
  root.finish();
}

json to_json(const ScenarioConfig& c) {
  json positions = json::array();
  for (const auto& p : c.drones.positions) positions.push_back(vec3(p));
  json curves = json::array();
  for (const auto& k : c.fig2.curves) curves.push_back({{"speed", k.speed}, {"density", k.density}});
  const auto& d = c.drones;
  const auto& f = c.fig12;
  return {
      {"seed", c.seed},
      {"volume", vec3(c.volume)},
      {"drones",
       {{"count", d.count},
        {"speed_kmh", d.speed_kmh},
        {"malicious_fraction", d.malicious_fraction},
        {"malicious", d.malicious},
        {"mobility", mobility_name(d.mobility)},
        {"formation_radius", d.formation_radius},
        {"positions", positions},
        {"capability",
         {{"mean", d.capability.mean}, {"stddev", d.capability.stddev}, {"min", d.capability.min},
          {"max", d.capability.max}}}}},
      {"channel", write_channel(c.channel)},
      {"link", {{"range", c.link.range}, {"mac_delay", c.link.mac_delay}, {"light_speed", c.link.light_speed}}},
      {"abc",
       {{"population", c.abc.population},
        {"max_generations", c.abc.max_generations},
        {"limit", c.abc.limit},
        {"weight_load", c.abc.weight_load},
        {"weight_success", c.abc.weight_success}}},
      {"bees",
       {{"rate_hz", c.bees.rate_hz},
        {"ttl_hops", c.bees.ttl_hops},
        {"size_bits", c.bees.size_bits},
        {"dwell", c.bees.dwell},
        {"scout_probes", c.bees.scout_probes},
        {"entry_ttl", c.bees.entry_ttl}}},
      {"message",
       {{"enabled", c.message.enabled}, {"size_bits", c.message.size_bits}, {"interval", c.message.interval}}},
      {"candidates", c.candidates},
      {"topology",
       {{"relays", c.topology.relays},
        {"per_receiver", c.topology.per_receiver},
        {"receivers", c.topology.receivers},
        {"parallel_messages", c.topology.parallel_messages}}},
      {"consensus",
       {{"max_retries", c.consensus.max_retries},
        {"inflation_factor", c.consensus.inflation_factor},
        {"strategy", ponc::strategy_name(c.consensus.strategy)},
        {"ipc_latency", c.consensus.ipc_latency}}},
      {"features", {{"coding", c.features.coding}, {"ponc", c.features.ponc}, {"dt", c.features.dt}}},
      {"radio", {{"channel", write_channel(c.radio.channel)}, {"elapsed_time", c.radio.elapsed_time}}},
      {"duration", c.duration},
      {"warmup", c.warmup},
      {"view_refresh", c.view_refresh},
      {"mobility_step", c.mobility_step},
      {"edge_radius", c.edge_radius},
      {"replications", c.replications},
      {"output_dir", c.output_dir},
      {"sweeps", {{"drone_counts", c.sweeps.drone_counts}, {"speeds_kmh", c.sweeps.speeds_kmh}}},
      {"fig2",
       {{"channel", write_channel(c.fig2.channel)},
        {"elapsed_time", c.fig2.elapsed_time},
        {"curves", curves},
        {"committee_sizes", c.fig2.committee_sizes}}},
      {"fig11",
       {{"committee", c.fig11.committee},
        {"parallel_messages", c.fig11.parallel_messages},
        {"relays", c.fig11.relays},
        {"hop_latency", c.fig11.hop_latency}}},
      {"fig12",
       {{"committee_sizes", f.committee_sizes},
        {"block_counts", f.block_counts},
        {"block_committee", f.block_committee},
        {"honest_rate", f.honest_rate},
        {"malicious_rates", f.malicious_rates},
        {"lead_blocks", f.lead_blocks},
        {"attack_population", f.attack_population},
        {"attack_committees", f.attack_committees},
        {"malicious_ratios", f.malicious_ratios},
        {"attack_trials", f.attack_trials}}},
  };
}

void check(bool ok, const char* field, const std::string& what) {
  if (!ok) throw ConfigError(fmt::format("{}: {}", field, what));
}

template <class F>
void nested(const char* field, F&& validate) {
  try {
    validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(fmt::format("{}: {}", field, e.what()));
  }
}

bool finite_all(std::initializer_list<double> xs) {
  return std::all_of(xs.begin(), xs.end(), [](double x) { return std::isfinite(x); });
}

}  // namespace

void ScenarioConfig::validate() const {
  check(finite_all({volume.x, volume.y, volume.z}) && volume.x > 0 && volume.y > 0 && volume.z > 0, "volume",
        "every dimension must be positive");
  check(drones.count >= 2, "drones.count", "at least two drones are needed");
  check(std::isfinite(drones.speed_kmh) && drones.speed_kmh >= 0, "drones.speed_kmh", "must be >= 0");
  check(drones.malicious_fraction >= 0 && drones.malicious_fraction < 1, "drones.malicious_fraction",
        "must lie in [0, 1)");
  for (auto id : drones.malicious)
    check(id < static_cast<std::uint32_t>(drones.count), "drones.malicious", fmt::format("unknown drone {}", id));
  check(drones.formation_radius > 0, "drones.formation_radius", "must be positive");
  check(drones.positions.empty() || drones.positions.size() == static_cast<std::size_t>(drones.count),
        "drones.positions", "must list one position per drone");
  for (const auto& p : drones.positions) check(box().contains(p), "drones.positions", "position outside the volume");
  nested("drones.capability", [&] { drones.capability.validate(); });
  nested("channel", [&] { channel.validate(); });
  check(link.range > 0 && link.mac_delay >= 0 && link.light_speed > 0, "link",
        "range and light_speed must be positive, mac_delay non-negative");
  nested("abc", [&] {
    abc::AbcConfig a = abc;
    a.validate();
  });
  nested("bees", [&] { bees.validate(); });
  check(message.size_bits > 0, "message.size_bits", "must be positive");
  check(message.interval > 0, "message.interval", "must be positive");
  check(candidates >= 1, "candidates", "must be >= 1");
  check(topology.parallel_messages >= 1 && topology.parallel_messages <= topology.per_receiver,
        "topology.parallel_messages", "must lie in [1, per_receiver]");
  nested("topology", [&] {
    coding::CnTopology::cyclic(static_cast<std::size_t>(std::max(topology.relays, 0)),
                               static_cast<std::size_t>(std::max(topology.per_receiver, 0)),
                               static_cast<std::size_t>(std::max(topology.receivers, 0)));
  });
  check(topology.relays <= 255, "topology.relays", "at most 255 relays");
  check(consensus.max_retries >= 0, "consensus.max_retries", "must be >= 0");
  check(consensus.inflation_factor > 1, "consensus.inflation_factor", "must exceed 1");
  check(consensus.ipc_latency >= 0, "consensus.ipc_latency", "must be >= 0");
  nested("radio.channel", [&] { radio.channel.validate(); });
  check(radio.elapsed_time >= 0, "radio.elapsed_time", "must be >= 0");
  check(duration > 0, "duration", "must be positive");
  check(warmup >= 0 && warmup < duration, "warmup", "must lie in [0, duration)");
  check(view_refresh > 0, "view_refresh", "must be positive");
  check(mobility_step > 0, "mobility_step", "must be positive");
  check(edge_radius > 0, "edge_radius", "must be positive");
  check(replications >= 1, "replications", "must be >= 1");
  check(!output_dir.empty(), "output_dir", "must not be empty");
  for (int n : sweeps.drone_counts) check(n >= 2, "sweeps.drone_counts", "every count must be >= 2");
  for (double v : sweeps.speeds_kmh) check(v >= 0, "sweeps.speeds_kmh", "every speed must be >= 0");
  nested("fig2.channel", [&] { fig2.channel.validate(); });
  for (const auto& c : fig2.curves) check(c.speed >= 0 && c.density > 0, "fig2.curves", "need speed >= 0, density > 0");
  for (int k : fig2.committee_sizes) check(k >= 1, "fig2.committee_sizes", "every size must be >= 1");
  check(fig11.committee >= 1, "fig11.committee", "must be >= 1");
  for (int q : fig11.parallel_messages)
    check(q >= 1 && q < fig11.committee, "fig11.parallel_messages", "need 1 <= q < committee");
  for (int n : fig11.relays) check(n > fig11.committee && n <= 255, "fig11.relays", "need committee < n <= 255");
  check(fig11.hop_latency > 0, "fig11.hop_latency", "must be positive");
  for (int k : fig12.committee_sizes) check(k >= 2, "fig12.committee_sizes", "every size must be >= 2");
  for (int b : fig12.block_counts) check(b >= 1, "fig12.block_counts", "every count must be >= 1");
  check(fig12.block_committee >= 2, "fig12.block_committee", "must be >= 2");
  check(fig12.honest_rate > 0 && fig12.honest_rate <= 1, "fig12.honest_rate", "must lie in (0, 1]");
  for (double p : fig12.malicious_rates) check(p >= 0 && p <= 1, "fig12.malicious_rates", "must lie in [0, 1]");
  for (int z : fig12.lead_blocks) check(z >= 0, "fig12.lead_blocks", "must be >= 0");
  check(fig12.attack_population >= 1, "fig12.attack_population", "must be >= 1");
  for (int k : fig12.attack_committees)
    check(k >= 1 && k <= fig12.attack_population, "fig12.attack_committees", "need 1 <= k <= attack_population");
  for (double r : fig12.malicious_ratios) check(r >= 0 && r <= 1, "fig12.malicious_ratios", "must lie in [0, 1]");
  check(fig12.attack_trials >= 1, "fig12.attack_trials", "must be >= 1");
}

std::string to_json_text(const ScenarioConfig& cfg) { return to_json(cfg).dump(2) + "\n"; }

ScenarioConfig parse_config(const std::string& text) {
  ScenarioConfig cfg;
  if (std::all_of(text.begin(), text.end(), [](unsigned char ch) { return std::isspace(ch); })) {
    cfg.validate();
    return cfg;
  }
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    const auto offset = std::min<std::size_t>(e.byte == 0 ? 0 : e.byte - 1, text.size());
    std::size_t line = 1;
    std::size_t column = 1;
    for (std::size_t i = 0; i < offset; ++i) {
      if (text[i] == '\n') {
        ++line;
        column = 1;
      } else {
        ++column;
      }
    }
    throw ConfigError(fmt::format("parse error at line {}, column {}", line, column));
  }
  from_json_root(j, cfg);
  cfg.validate();
  return cfg;
}

ScenarioConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError(fmt::format("cannot open config file {}", path.string()));
  std::ostringstream text;
  text << in.rdbuf();
  return parse_config(text.str());
}

}  // namespace escm

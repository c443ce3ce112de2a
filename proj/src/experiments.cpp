#include "escm/experiments.hpp"

#include <cmath>
#include <fmt/format.h>
#include <fstream>
#include <set>
#include <system_error>

#include "escm/analytics.hpp"
#include "escm/error.hpp"
#include "escm/ponc.hpp"
#include "escm/simulation.hpp"

namespace escm {
namespace {

constexpr AblationVariant variants[] = {
    {"full", {true, true, true}},
    {"no_coding", {false, true, true}},
    {"no_ponc", {true, false, true}},
    {"no_dt", {true, true, false}},
    {"baseline", {false, false, false}},
};

// Radio consensus with link-layer retransmission: every message eventually arrives.
class RetransmittingRadio final : public ponc::MessageBus {
 public:
  RetransmittingRadio(double p, double mac, Rng& rng) : p_(p), mac_(mac), rng_(rng) {}
  bool deliver(ponc::Step, DroneId, DroneId) override {
    do elapsed_ += mac_;
    while (!rng_.bernoulli(p_));
    return true;
  }

 private:
  double p_;
  double mac_;
  Rng& rng_;
};

std::vector<ponc::ConsensusNode> honest_committee(std::size_t k, const analytics::TruncatedGaussian& cr, Rng& rng) {
  std::vector<ponc::ConsensusNode> nodes;
  for (std::size_t i = 0; i < k; ++i) nodes.push_back({drone_id(i), cr.sample(rng)});
  return nodes;
}

struct Collector {
  std::vector<ResultRow>& rows;
  std::string scenario;
  void add(const std::string& var, double x, const std::string& metric, double value, int rep, std::uint64_t seed) {
    rows.push_back({scenario, var, x, metric, value, rep, seed});
  }
};

void simulate_sweeps(const ScenarioConfig& base, const std::string& scenario, std::vector<ResultRow>& rows) {
  Collector out{rows, scenario};
  auto record = [&](const ScenarioConfig& c, const char* var, double x, int rep) {
    const auto m = run(c);
    out.add(var, x, "arrival_rate", m.arrival_rate(), rep, c.seed);
    out.add(var, x, "mean_delay", m.mean_delay(), rep, c.seed);
    out.add(var, x, "throughput", m.throughput(), rep, c.seed);
  };
  for (int n : base.sweeps.drone_counts) {
    for (int rep = 0; rep < base.replications; ++rep) {
      ScenarioConfig c = base;
      c.drones.count = n;
      c.drones.positions.clear();
      c.seed = base.seed + static_cast<std::uint64_t>(rep);
      record(c, "drones", n, rep);
    }
  }
  for (double v : base.sweeps.speeds_kmh) {
    for (int rep = 0; rep < base.replications; ++rep) {
      ScenarioConfig c = base;
      c.drones.speed_kmh = v;
      c.seed = base.seed + static_cast<std::uint64_t>(rep);
      record(c, "speed_kmh", v, rep);
    }
  }
}

void fig2_rows(const ScenarioConfig& cfg, std::vector<ResultRow>& rows) {
  Collector out{rows, "fig2"};
  for (int k : cfg.fig2.committee_sizes) {
    for (const auto& curve : cfg.fig2.curves) {
      analytics::ChannelParams ch = cfg.fig2.channel;
      ch.density = curve.density;
      ch.node_count = k;
      analytics::MobilityParams m;
      m.relative_speed = curve.speed;
      m.elapsed_time = cfg.fig2.elapsed_time;
      out.add("k", k, fmt::format("success_v{}_gamma{}", curve.speed, curve.density),
              analytics::mobile_success_rate(ch, m), 0, cfg.seed);
    }
  }
}

std::int64_t simulated_ponc_messages(int k, Rng& rng, const ScenarioConfig& cfg) {
  auto nodes = honest_committee(static_cast<std::size_t>(k), cfg.drones.capability, rng);
  ponc::TwinBus bus(cfg.consensus.ipc_latency);
  const auto topology = coding::CnTopology::combination(static_cast<std::size_t>(k), 1);
  return ponc::run_consensus(nodes, topology, bus, rng).messages_exchanged;
}

std::int64_t simulated_poso_messages(int k, Rng& rng, const ScenarioConfig& cfg) {
  const auto nodes = honest_committee(static_cast<std::size_t>(k), cfg.drones.capability, rng);
  return ponc::run_poso_baseline(nodes, rng).messages_exchanged;
}

void fig12_rows(const ScenarioConfig& cfg, std::vector<ResultRow>& rows) {
  const auto& f = cfg.fig12;
  constexpr int poso_runs = 10000;
  {
    Collector out{rows, "fig12-overhead"};
    for (int k : f.committee_sizes) {
      for (int rep = 0; rep < cfg.replications; ++rep) {
        const std::uint64_t seed = cfg.seed + static_cast<std::uint64_t>(rep);
        Rng rng(hash_keys(seed, 12, static_cast<std::uint64_t>(k)));
        out.add("k", k, "ponc_messages", static_cast<double>(simulated_ponc_messages(k, rng, cfg)), rep, seed);
        double total = 0.0;
        for (int i = 0; i < poso_runs; ++i) total += static_cast<double>(simulated_poso_messages(k, rng, cfg));
        out.add("k", k, "poso_messages_mean", total / poso_runs, rep, seed);
      }
      out.add("k", k, "ponc_closed_form", static_cast<double>(analytics::ponc_overhead(k)), 0, cfg.seed);
      out.add("k", k, "poso_closed_form", analytics::poso_overhead(k).to_double(), 0, cfg.seed);
    }
  }
  {
    Collector out{rows, "fig12-blocks"};
    for (int b : f.block_counts) {
      for (int rep = 0; rep < cfg.replications; ++rep) {
        const std::uint64_t seed = cfg.seed + static_cast<std::uint64_t>(rep);
        Rng rng(hash_keys(seed, 13, static_cast<std::uint64_t>(b)));
        double ponc_total = 0.0;
        double poso_total = 0.0;
        for (int i = 0; i < b; ++i) {
          ponc_total += static_cast<double>(simulated_ponc_messages(f.block_committee, rng, cfg));
          poso_total += static_cast<double>(simulated_poso_messages(f.block_committee, rng, cfg));
        }
        out.add("blocks", b, "ponc_messages", ponc_total, rep, seed);
        out.add("blocks", b, "poso_messages", poso_total, rep, seed);
      }
    }
  }
  {
    Collector out{rows, "fig12-dsa"};
    for (int z : f.lead_blocks) {
      for (double pm : f.malicious_rates) {
        const analytics::DsaParams d{pm, f.honest_rate, z};
        out.add("z", z, fmt::format("success_pm{}", pm), analytics::dsa_success_probability(d), 0, cfg.seed);
      }
    }
  }
  {
    Collector out{rows, "fig12-internal"};
    for (double r : f.malicious_ratios) {
      for (int k : f.attack_committees) {
        analytics::InternalAttackParams p;
        p.total_drones = f.attack_population;
        p.malicious_count = static_cast<int>(std::lround(r * f.attack_population));
        p.committee_size = k;
        p.cr = cfg.drones.capability;
        const std::uint64_t seed = hash_keys(cfg.seed, 14, static_cast<std::uint64_t>(k),
                                             static_cast<std::uint64_t>(p.malicious_count));
        out.add("malicious_ratio", r, fmt::format("success_k{}", k),
                analytics::internal_attack_probability(p, f.attack_trials, seed), 0, cfg.seed);
      }
    }
  }
}

void fig11_rows(const ScenarioConfig& cfg, std::vector<ResultRow>& rows) {
  Collector out{rows, "fig11"};
  for (int n : cfg.fig11.relays) {
    for (int rep = 0; rep < cfg.replications; ++rep) {
      const std::uint64_t seed = cfg.seed + static_cast<std::uint64_t>(rep);
      for (int q : cfg.fig11.parallel_messages)
        for (LinkMode mode : {LinkMode::P2PC, LinkMode::V2VCUncoded, LinkMode::V2VCCoded})
          out.add("n", n, fmt::format("{}_q{}", link_mode_name(mode), q), multicast_throughput(cfg, n, q, mode, seed),
                  rep, seed);
    }
  }
}

void ensure_directory(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec || !std::filesystem::is_directory(dir))
    throw OutputError(fmt::format("cannot create output directory {}", dir.string()));
}

std::ofstream open_output(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw OutputError(fmt::format("cannot write {}", path.string()));
  return out;
}

void write_plot_script(const std::filesystem::path& path, const std::string& csv_name, const std::string& title) {
  auto out = open_output(path);
  out << "import csv\n"
         "import os\n"
         "from collections import defaultdict\n\n"
         "import matplotlib\n"
         "matplotlib.use(\"Agg\")\n"
         "import matplotlib.pyplot as plt\n\n"
         "HERE = os.path.dirname(os.path.abspath(__file__))\n"
      << "CSV = os.path.join(HERE, \"" << csv_name << "\")\n"
      << "TITLE = \"" << title << "\"\n\n"
      << "series = defaultdict(lambda: defaultdict(list))\n"
         "with open(CSV, newline=\"\") as f:\n"
         "    for row in csv.DictReader(f):\n"
         "        panel = (row[\"scenario\"], row[\"sweep_variable\"], row[\"metric\"].split(\"_q\")[0])\n"
         "        series[panel][(row[\"metric\"], float(row[\"sweep_value\"]))].append(float(row[\"value\"]))\n\n"
         "for (scenario, variable, group), points in sorted(series.items()):\n"
         "    fig, ax = plt.subplots()\n"
         "    for metric in sorted({m for m, _ in points}):\n"
         "        xs = sorted(x for m, x in points if m == metric)\n"
         "        ys = [sum(points[(metric, x)]) / len(points[(metric, x)]) for x in xs]\n"
         "        ax.plot(xs, ys, marker=\"o\", label=metric)\n"
         "    ax.set_xlabel(variable)\n"
         "    ax.set_title(f\"{TITLE}: {scenario}\")\n"
         "    ax.legend()\n"
         "    fig.savefig(os.path.join(HERE, f\"{scenario}_{variable}_{group}.png\"), dpi=120)\n"
         "    plt.close(fig)\n";
}

std::vector<std::filesystem::path> emit(const std::vector<ResultRow>& rows, const std::string& name,
                                        const std::filesystem::path& out_dir) {
  ensure_directory(out_dir);
  const auto csv = out_dir / (name + ".csv");
  {
    auto out = open_output(csv);
    write_csv(out, rows);
    if (!out) throw OutputError(fmt::format("cannot write {}", csv.string()));
  }
  const auto script = out_dir / ("plot_" + name + ".py");
  write_plot_script(script, csv.filename().string(), name);
  return {csv, script};
}

}  // namespace

const char* scenario_name(ScenarioName s) {
  switch (s) {
    case ScenarioName::Fig2: return "fig2";
    case ScenarioName::Fig10: return "fig10";
    case ScenarioName::Fig11: return "fig11";
    case ScenarioName::Fig12: return "fig12";
    case ScenarioName::Fig13: return "fig13";
  }
  return "?";
}

std::optional<ScenarioName> parse_scenario(std::string_view name) {
  for (auto s : {ScenarioName::Fig2, ScenarioName::Fig10, ScenarioName::Fig11, ScenarioName::Fig12, ScenarioName::Fig13})
    if (name == scenario_name(s)) return s;
  return std::nullopt;
}

const char* link_mode_name(LinkMode m) {
  switch (m) {
    case LinkMode::P2PC: return "p2pc";
    case LinkMode::V2VCUncoded: return "v2vc_uncoded";
    case LinkMode::V2VCCoded: return "v2vc_coded";
  }
  return "?";
}

void write_csv(std::ostream& out, std::span<const ResultRow> rows) {
  out << "scenario,sweep_variable,sweep_value,metric,value,replication,seed\n";
  for (const auto& r : rows) {
    if (!std::isfinite(r.sweep_value) || !std::isfinite(r.value))
      throw OutputError(fmt::format("non-finite value in {} {}", r.scenario, r.metric));
    out << fmt::format("{},{},{},{},{},{},{}\n", r.scenario, r.sweep_variable, r.sweep_value, r.metric, r.value,
                       r.replication, r.seed);
  }
}

std::span<const AblationVariant> ablation_variants() { return variants; }

double multicast_throughput(const ScenarioConfig& cfg, int relays, int messages, LinkMode mode, std::uint64_t seed) {
  if (messages < 1 || messages >= cfg.fig11.committee || relays <= cfg.fig11.committee)
    throw std::invalid_argument("throughput model needs q < k < n");
  // Draws depend on the seed only, so every grid point of one replication sees the same committee and links.
  Rng rng(hash_keys(seed, 11));
  auto nodes = honest_committee(static_cast<std::size_t>(cfg.fig11.committee), cfg.drones.capability, rng);
  const auto topology = coding::CnTopology::cyclic(static_cast<std::size_t>(relays),
                                                   static_cast<std::size_t>(messages),
                                                   static_cast<std::size_t>(relays));
  const double h = cfg.fig11.hop_latency;
  double consensus = 0.0;
  double capability = 0.0;
  if (mode == LinkMode::P2PC) {
    Rng link_rng(hash_keys(seed, 0x70327063));
    const double p = radio_success_probability(cfg);
    if (!(p > 0.0)) return 0.0;
    RetransmittingRadio bus(p, cfg.link.mac_delay, link_rng);
    const auto r = ponc::run_consensus(nodes, topology, bus, rng);
    consensus = r.elapsed;
    capability = nodes[index_of(r.elected)].coding_capability;
  } else {
    ponc::TwinBus bus(cfg.consensus.ipc_latency);
    const auto r = ponc::run_consensus(nodes, topology, bus, rng);
    consensus = r.elapsed;
    capability = nodes[index_of(r.elected)].coding_capability;
  }
  const double bits = static_cast<double>(messages) * cfg.message.size_bits;
  // Coded: all relays forward one combination in parallel after the encoder has mixed the batch.
  // Uncoded: the batch is pipelined through a relay one message after another.
  const double data = mode == LinkMode::V2VCCoded ? 2.0 * h + bits / (capability * 1000.0)
                                                  : static_cast<double>(messages + 1) * h;
  return static_cast<double>(relays) * bits / (consensus + data);
}

std::vector<ResultRow> scenario_rows(ScenarioName name, const ScenarioConfig& cfg) {
  cfg.validate();
  std::vector<ResultRow> rows;
  switch (name) {
    case ScenarioName::Fig2:
      fig2_rows(cfg, rows);
      break;
    case ScenarioName::Fig10:
      simulate_sweeps(cfg, "fig10", rows);
      break;
    case ScenarioName::Fig11:
      fig11_rows(cfg, rows);
      break;
    case ScenarioName::Fig12:
      fig12_rows(cfg, rows);
      break;
    case ScenarioName::Fig13:
      for (const auto& v : variants) {
        ScenarioConfig c = cfg;
        c.features = v.features;
        simulate_sweeps(c, fmt::format("fig13-{}", v.name), rows);
      }
      break;
  }
  return rows;
}

std::vector<ResultRow> ablation_rows(const ScenarioConfig& cfg) {
  cfg.validate();
  std::vector<ResultRow> rows;
  for (const auto& v : variants) {
    Collector out{rows, fmt::format("ablation-{}", v.name)};
    for (int rep = 0; rep < cfg.replications; ++rep) {
      ScenarioConfig c = cfg;
      c.features = v.features;
      c.seed = cfg.seed + static_cast<std::uint64_t>(rep);
      const auto m = run(c);
      out.add("speed_kmh", c.drones.speed_kmh, "arrival_rate", m.arrival_rate(), rep, c.seed);
      out.add("speed_kmh", c.drones.speed_kmh, "mean_delay", m.mean_delay(), rep, c.seed);
      out.add("speed_kmh", c.drones.speed_kmh, "throughput", m.throughput(), rep, c.seed);
      out.add("speed_kmh", c.drones.speed_kmh, "consensus_messages", static_cast<double>(m.consensus_messages), rep,
              c.seed);
      if (m.consensus_link_attempts > 0)
        out.add("speed_kmh", c.drones.speed_kmh, "consensus_link_success",
                static_cast<double>(m.consensus_link_successes) / static_cast<double>(m.consensus_link_attempts), rep,
                c.seed);
    }
  }
  return rows;
}

std::vector<std::filesystem::path> run_scenario(ScenarioName name, const ScenarioConfig& cfg,
                                                const std::filesystem::path& out_dir) {
  ensure_directory(out_dir);
  return emit(scenario_rows(name, cfg), scenario_name(name), out_dir);
}

std::vector<ResultRow> run_ablation(const ScenarioConfig& cfg, const std::filesystem::path& out_dir) {
  ensure_directory(out_dir);
  auto rows = ablation_rows(cfg);
  emit(rows, "ablation", out_dir);
  return rows;
}

}  // namespace escm

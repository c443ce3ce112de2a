#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "escm/scenario.hpp"

namespace escm {

enum class ScenarioName { Fig2, Fig10, Fig11, Fig12, Fig13 };

const char* scenario_name(ScenarioName s);
std::optional<ScenarioName> parse_scenario(std::string_view name);

struct ResultRow {
  std::string scenario;
  std::string sweep_variable;
  double sweep_value = 0.0;
  std::string metric;
  double value = 0.0;
  int replication = 0;
  std::uint64_t seed = 0;
};

void write_csv(std::ostream& out, std::span<const ResultRow> rows);

struct AblationVariant {
  const char* name;
  FeatureFlags features;
};

// full, no_coding, no_ponc, no_dt, baseline (ABC routing alone).
std::span<const AblationVariant> ablation_variants();

enum class LinkMode { P2PC, V2VCUncoded, V2VCCoded };
const char* link_mode_name(LinkMode m);

// Multicast throughput (bits/s) of q messages to n receivers behind a k-relay committee, including
// the relay election.
double multicast_throughput(const ScenarioConfig& cfg, int relays, int messages, LinkMode mode, std::uint64_t seed);

// Rows in (sweep value, replication) order; deterministic for a given config.
std::vector<ResultRow> scenario_rows(ScenarioName name, const ScenarioConfig& cfg);
std::vector<ResultRow> ablation_rows(const ScenarioConfig& cfg);

// Writes <name>.csv and plot_<name>.py into `out_dir`; returns the files written.
std::vector<std::filesystem::path> run_scenario(ScenarioName name, const ScenarioConfig& cfg,
                                                const std::filesystem::path& out_dir);
std::vector<ResultRow> run_ablation(const ScenarioConfig& cfg, const std::filesystem::path& out_dir);

}  // namespace escm

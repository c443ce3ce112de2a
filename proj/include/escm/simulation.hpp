#pragma once

#include "escm/cyberuav.hpp"
#include "escm/scenario.hpp"
#include "escm/sim_core.hpp"

namespace escm {

// Success probability of one drone-to-drone consensus message when the twin network is disabled.
double radio_success_probability(const ScenarioConfig& cfg);

// Runs the full pipeline: mobility, bee routing, relay election and data forwarding.
// Identical configs produce identical metrics. When `ledger` is given it receives every block.
sim::SimMetrics run(const ScenarioConfig& cfg, cyber::Ledger* ledger = nullptr);

}  // namespace escm

#pragma once

// N-agent commodity exchange model. Goods and agents share 0-based indices:
// agent k produces good k.
//
// One transaction runs, in order:
//   1. pick trader k uniformly
//   2. co-trader l != k holding the most units of k's want (uniform tie-break)
//   3. (no-op; both sides inspect their state)
//   4. bump views for standing unmet demand, average the two views, renormalize
//   5. build shopping lists against the partner's stock
//   6. exchange units (balanced unit count, rarest-first for the larger list)
//   7. consume the want, produce own good if out of stock, redraw wants
//
// RNG draw order per transaction: trader index, tie-break among co-trader
// maximizers (only when more than one), new want of k, new want of l.

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "moneylife/rng.hpp"

namespace moneylife {

using Good = std::size_t;
using Units = std::int64_t;

// What counts as "previous demands were not satisfied" when Step 4 runs.
enum class DemandMemory {
    // The demand vector as left by the agent's previous transaction, including
    // lists that were never exchanged because the partner's list was empty.
    Standing,
    // Lists that could not be exchanged at all are dropped at the end of the
    // transaction; only partially filled lists carry over.
    ExchangedOnly,
};

struct ModelConfig {
    std::size_t n_agents = 50;
    double thresh = 2.5;
    std::uint64_t seed = 1;
    std::uint64_t max_turns = 5'000'000;
    DemandMemory demand_memory = DemandMemory::Standing;
};

// Throws ConfigError unless n_agents >= 3, 0 <= thresh <= n_agents and
// max_turns > 0.
void validate(const ModelConfig& config);

struct AgentState {
    std::vector<Units> possession;
    std::vector<Units> demand;
    std::vector<double> view;
    Good want = 0;

    bool operator==(const AgentState&) const = default;
};

struct TurnStats {
    std::vector<Units> units_exchanged_per_good;
    Units units_produced = 0;
    Units units_consumed = 0;

    void reset(std::size_t n_goods);
    bool operator==(const TurnStats&) const = default;
};

struct WorldState {
    ModelConfig config;
    std::vector<AgentState> agents;
    std::uint64_t turn = 0;
    std::size_t transactions_this_turn = 0;
    Rng rng;
    TurnStats turn_stats;

    std::size_t size() const { return agents.size(); }
    bool operator==(const WorldState& other) const;
};

struct Pair {
    std::size_t trader = 0;
    std::size_t co_trader = 0;
};

// Units received by each side during Step 6, per good.
struct ExchangeResult {
    std::vector<Units> received_by_a;
    std::vector<Units> received_by_b;
    Units total_a = 0;
    Units total_b = 0;
};

WorldState init_world(const ModelConfig& config);

// Steps 1-2.
Pair select_pair(WorldState& world);

// Co-trader choice for a fixed trader (Step 2 alone).
std::size_t select_co_trader(const WorldState& world, std::size_t trader, Rng& rng);

// Step 4. Both views end up identical and summing to N.
void exchange_views(AgentState& a, AgentState& b);

// Step 5 for one side.
std::vector<Units> build_shopping_list(const AgentState& self, const AgentState& partner,
                                       double thresh);
void build_shopping_list(const AgentState& self, const AgentState& partner, double thresh,
                         std::span<Units> out);

// Step 6. Demands must already be built. Throws InvariantViolation if a
// demanded unit is not in the partner's stock.
ExchangeResult execute_exchange(AgentState& a, AgentState& b);
// Allocation-free form: receipts are added into the given per-good counters
// (which may alias). Returns the units received by each side.
Units execute_exchange(AgentState& a, AgentState& b, std::span<Units> received_by_a,
                       std::span<Units> received_by_b);

// Step 7 for one trader. Returns {consumed, produced}.
std::pair<bool, bool> consume_and_produce(AgentState& agent, std::size_t own_good, Rng& rng);

// Steps 1-7 once. Rolls the turn over after N transactions.
Pair run_transaction(WorldState& world);

// N transactions starting from a turn boundary.
void run_turn(WorldState& world);

// Uniform draw from {0..n-1} \ {self}.
Good draw_want(std::size_t n, std::size_t self, Rng& rng);

// Throws InvariantViolation if any state-level invariant fails.
void check_invariants(const WorldState& world, double view_tolerance = 1e-9);

// Plain-text dump of the full state (config, turn, rng, agents) for debugging
// and replay checksums.
std::string serialize(const WorldState& world);

// FNV-1a over serialize(world).
std::uint64_t checksum(const WorldState& world);

} // namespace moneylife

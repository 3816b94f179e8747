#include "moneylife/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <sstream>

#include "moneylife/errors.hpp"

namespace moneylife {

std::string Rng::serialize() const {
    std::ostringstream out;
    out << engine_;
    return out.str();
}

void validate(const ModelConfig& config) {
    if (config.n_agents < 3) {
        throw ConfigError("n_agents must be at least 3, got " + std::to_string(config.n_agents));
    }
    if (!(config.thresh >= 0.0) || config.thresh > static_cast<double>(config.n_agents)) {
        throw ConfigError("thresh must lie in [0, n_agents], got " + std::to_string(config.thresh));
    }
    if (config.max_turns == 0) throw ConfigError("max_turns must be positive");
}

void TurnStats::reset(std::size_t n_goods) {
    units_exchanged_per_good.assign(n_goods, 0);
    units_produced = 0;
    units_consumed = 0;
}

bool WorldState::operator==(const WorldState& other) const {
    return config.n_agents == other.config.n_agents && config.thresh == other.config.thresh &&
           config.seed == other.config.seed && agents == other.agents && turn == other.turn &&
           transactions_this_turn == other.transactions_this_turn && rng == other.rng &&
           turn_stats == other.turn_stats;
}

Good draw_want(std::size_t n, std::size_t self, Rng& rng) {
    // Draw from n-1 slots and skip over self.
    const Good g = static_cast<Good>(rng.below(n - 1));
    return g >= self ? g + 1 : g;
}

WorldState init_world(const ModelConfig& config) {
    validate(config);
    const std::size_t n = config.n_agents;
    WorldState world;
    world.config = config;
    world.rng = Rng(config.seed);
    world.agents.resize(n);
    for (std::size_t k = 0; k < n; ++k) {
        AgentState& a = world.agents[k];
        a.possession.assign(n, 0);
        a.possession[k] = 1;
        a.demand.assign(n, 0);
        a.view.assign(n, 1.0);
    }
    for (std::size_t k = 0; k < n; ++k) world.agents[k].want = draw_want(n, k, world.rng);
    world.turn_stats.reset(n);
    return world;
}

std::size_t select_co_trader(const WorldState& world, std::size_t trader, Rng& rng) {
    const Good wanted = world.agents[trader].want;
    Units best = -1;
    // Maximizers are few; a small local buffer avoids allocation in the hot loop.
    std::size_t ties[256];
    std::vector<std::size_t> overflow;
    std::size_t n_ties = 0;
    for (std::size_t j = 0; j < world.size(); ++j) {
        if (j == trader) continue;
        const Units held = world.agents[j].possession[wanted];
        if (held > best) {
            best = held;
            n_ties = 0;
            overflow.clear();
        }
        if (held == best) {
            if (n_ties < std::size(ties)) {
                ties[n_ties] = j;
            } else {
                overflow.push_back(j);
            }
            ++n_ties;
        }
    }
    if (n_ties == 1) return ties[0];
    const std::size_t pick = static_cast<std::size_t>(rng.below(n_ties));
    return pick < std::size(ties) ? ties[pick] : overflow[pick - std::size(ties)];
}

Pair select_pair(WorldState& world) {
    const auto trader = static_cast<std::size_t>(world.rng.below(world.size()));
    return {trader, select_co_trader(world, trader, world.rng)};
}

void exchange_views(AgentState& a, AgentState& b) {
    const std::size_t n = a.view.size();
    double total = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
        const double va = a.view[j] + (a.demand[j] > 0 ? 1.0 : 0.0);
        const double vb = b.view[j] + (b.demand[j] > 0 ? 1.0 : 0.0);
        const double mean = 0.5 * (va + vb);
        a.view[j] = mean;
        total += mean;
    }
    const double scale = static_cast<double>(n) / total;
    for (std::size_t j = 0; j < n; ++j) {
        a.view[j] *= scale;
        b.view[j] = a.view[j];
    }
}

void build_shopping_list(const AgentState& self, const AgentState& partner, double thresh,
                         std::span<Units> out) {
    const std::size_t n = self.view.size();
    for (std::size_t j = 0; j < n; ++j) {
        const Units stock = partner.possession[j];
        out[j] = (stock > 0 && (self.want == j || self.view[j] > thresh)) ? stock : 0;
    }
}

std::vector<Units> build_shopping_list(const AgentState& self, const AgentState& partner,
                                       double thresh) {
    std::vector<Units> list(self.view.size(), 0);
    build_shopping_list(self, partner, thresh, list);
    return list;
}

namespace {

// Total demand of `buyer`, checking every component against the seller's
// current stock.
Units checked_total(const AgentState& buyer, const AgentState& seller, const char* who) {
    Units total = 0;
    for (std::size_t j = 0; j < buyer.demand.size(); ++j) {
        const Units d = buyer.demand[j];
        if (d < 0 || d > seller.possession[j]) {
            throw InvariantViolation(std::string("demand of ") + who + " for good " +
                                     std::to_string(j) + " exceeds partner stock");
        }
        total += d;
    }
    return total;
}

// Moves all of buyer's demand out of seller's stock and clears the list.
void fill_completely(AgentState& buyer, AgentState& seller, std::span<Units> received) {
    for (std::size_t j = 0; j < buyer.demand.size(); ++j) {
        const Units d = buyer.demand[j];
        if (d == 0) continue;
        seller.possession[j] -= d;
        buyer.possession[j] += d;
        received[j] += d;
        buyer.demand[j] = 0;
    }
}

// Takes `count` units, each time from the good with the smallest nonzero
// remaining demand (lowest index on ties). Taking a unit only lowers that
// component further, so whole runs are moved at once.
void fill_rarest_first(AgentState& buyer, AgentState& seller, Units count,
                       std::span<Units> received) {
    const std::size_t n = buyer.demand.size();
    while (count > 0) {
        std::size_t pick = n;
        for (std::size_t j = 0; j < n; ++j) {
            const Units d = buyer.demand[j];
            if (d > 0 && (pick == n || d < buyer.demand[pick])) pick = j;
        }
        if (pick == n) throw InvariantViolation("rarest-first fill ran out of demand");
        const Units take = std::min(count, buyer.demand[pick]);
        buyer.demand[pick] -= take;
        seller.possession[pick] -= take;
        buyer.possession[pick] += take;
        received[pick] += take;
        count -= take;
    }
}

} // namespace

Units execute_exchange(AgentState& a, AgentState& b, std::span<Units> received_by_a,
                       std::span<Units> received_by_b) {
    const Units total_a = checked_total(a, b, "trader a");
    const Units total_b = checked_total(b, a, "trader b");
    if (total_a == 0 || total_b == 0) return 0;

    // Both lists were built against pre-exchange stock, and each side only
    // gives away what the other demanded, so the two fills are independent.
    if (total_a == total_b) {
        fill_completely(a, b, received_by_a);
        fill_completely(b, a, received_by_b);
    } else if (total_a > total_b) {
        fill_completely(b, a, received_by_b);
        fill_rarest_first(a, b, total_b, received_by_a);
    } else {
        fill_completely(a, b, received_by_a);
        fill_rarest_first(b, a, total_a, received_by_b);
    }
    return std::min(total_a, total_b);
}

ExchangeResult execute_exchange(AgentState& a, AgentState& b) {
    ExchangeResult result;
    result.received_by_a.assign(a.demand.size(), 0);
    result.received_by_b.assign(b.demand.size(), 0);
    result.total_a = execute_exchange(a, b, result.received_by_a, result.received_by_b);
    result.total_b = result.total_a;
    return result;
}

std::pair<bool, bool> consume_and_produce(AgentState& agent, std::size_t own_good, Rng& rng) {
    bool consumed = false;
    bool produced = false;
    if (agent.possession[agent.want] > 0) {
        --agent.possession[agent.want];
        consumed = true;
    }
    if (agent.possession[own_good] == 0) {
        agent.possession[own_good] = 1;
        produced = true;
    }
    agent.want = draw_want(agent.possession.size(), own_good, rng);
    return {consumed, produced};
}

Pair run_transaction(WorldState& world) {
    const std::size_t n = world.size();
    if (world.transactions_this_turn == 0) world.turn_stats.reset(n);

    const Pair pair = select_pair(world);
    AgentState& k = world.agents[pair.trader];
    AgentState& l = world.agents[pair.co_trader];

    exchange_views(k, l);
    build_shopping_list(k, l, world.config.thresh, k.demand);
    build_shopping_list(l, k, world.config.thresh, l.demand);

    // Both sides' receipts land in the per-good turn counter directly.
    auto& exchanged = world.turn_stats.units_exchanged_per_good;
    const Units moved = execute_exchange(k, l, exchanged, exchanged);
    if (world.config.demand_memory == DemandMemory::ExchangedOnly && moved == 0) {
        std::fill(k.demand.begin(), k.demand.end(), 0);
        std::fill(l.demand.begin(), l.demand.end(), 0);
    }

    for (auto [agent, own] : {std::pair{&k, pair.trader}, std::pair{&l, pair.co_trader}}) {
        const auto [consumed, produced] = consume_and_produce(*agent, own, world.rng);
        world.turn_stats.units_consumed += consumed ? 1 : 0;
        world.turn_stats.units_produced += produced ? 1 : 0;
    }

    if (++world.transactions_this_turn == n) {
        world.transactions_this_turn = 0;
        ++world.turn;
    }
    return pair;
}

void run_turn(WorldState& world) {
    if (world.transactions_this_turn != 0) {
        throw InvariantViolation("run_turn called in the middle of a turn");
    }
    for (std::size_t t = 0; t < world.size(); ++t) run_transaction(world);
}

void check_invariants(const WorldState& world, double view_tolerance) {
    const std::size_t n = world.size();
    const double n_real = static_cast<double>(n);
    for (std::size_t k = 0; k < n; ++k) {
        const AgentState& a = world.agents[k];
        if (a.want == k || a.want >= n) {
            throw InvariantViolation("agent " + std::to_string(k) + " wants an invalid good");
        }
        double total = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            if (a.possession[j] < 0) throw InvariantViolation("negative possession");
            if (a.demand[j] < 0) throw InvariantViolation("negative demand");
            const double v = a.view[j];
            if (!(v >= 0.0) || v > n_real + view_tolerance) throw InvariantViolation("view out of [0, N]");
            total += v;
        }
        if (std::abs(total - n_real) > view_tolerance) {
            throw InvariantViolation("view of agent " + std::to_string(k) + " sums to " +
                                     std::to_string(total));
        }
    }
    if (world.transactions_this_turn >= n) throw InvariantViolation("turn counter overflow");
}

std::string serialize(const WorldState& world) {
    std::ostringstream out;
    out << "n_agents " << world.config.n_agents << '\n'
        << "thresh " << std::hexfloat << world.config.thresh << std::defaultfloat << '\n'
        << "seed " << world.config.seed << '\n'
        << "turn " << world.turn << '\n'
        << "transactions_this_turn " << world.transactions_this_turn << '\n'
        << "rng " << world.rng.serialize() << '\n';
    for (std::size_t k = 0; k < world.size(); ++k) {
        const AgentState& a = world.agents[k];
        out << "agent " << k << " want " << a.want << "\n  P";
        for (Units p : a.possession) out << ' ' << p;
        out << "\n  D";
        for (Units d : a.demand) out << ' ' << d;
        out << "\n  V" << std::hexfloat;
        for (double v : a.view) out << ' ' << v;
        out << std::defaultfloat << '\n';
    }
    out << "stats produced " << world.turn_stats.units_produced << " consumed "
        << world.turn_stats.units_consumed << " exchanged";
    for (Units u : world.turn_stats.units_exchanged_per_good) out << ' ' << u;
    out << '\n';
    return out.str();
}

std::uint64_t checksum(const WorldState& world) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : serialize(world)) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

} // namespace moneylife

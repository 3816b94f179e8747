#include <doctest.h>

#include <algorithm>
#include <numeric>

#include "moneylife/errors.hpp"
#include "moneylife/model.hpp"

using namespace moneylife;

namespace {

AgentState make_agent(std::vector<Units> possession, std::vector<double> view, Good want,
                      std::vector<Units> demand = {}) {
    AgentState a;
    a.possession = std::move(possession);
    a.view = std::move(view);
    a.want = want;
    a.demand = demand.empty() ? std::vector<Units>(a.possession.size(), 0) : std::move(demand);
    return a;
}

// One unit at a time from the smallest nonzero remaining demand, lowest index
// on ties.
std::vector<Units> unit_by_unit(std::vector<Units> demand, Units count) {
    std::vector<Units> got(demand.size(), 0);
    for (Units u = 0; u < count; ++u) {
        std::size_t pick = demand.size();
        for (std::size_t j = 0; j < demand.size(); ++j) {
            if (demand[j] > 0 && (pick == demand.size() || demand[j] < demand[pick])) pick = j;
        }
        --demand[pick];
        ++got[pick];
    }
    return got;
}

Units total(const std::vector<Units>& v) { return std::accumulate(v.begin(), v.end(), Units{0}); }

} // namespace

TEST_CASE("config validation") {
    ModelConfig c;
    CHECK_NOTHROW(validate(c));
    c.n_agents = 2;
    CHECK_THROWS_AS(validate(c), ConfigError);
    c = {};
    c.thresh = -0.1;
    CHECK_THROWS_AS(validate(c), ConfigError);
    c.thresh = 51.0;
    CHECK_THROWS_AS(validate(c), ConfigError);
    c = {};
    c.max_turns = 0;
    CHECK_THROWS_AS(validate(c), ConfigError);
}

TEST_CASE("initial world") {
    ModelConfig c;
    c.n_agents = 7;
    const WorldState w = init_world(c);
    REQUIRE(w.size() == 7);
    for (std::size_t k = 0; k < 7; ++k) {
        const AgentState& a = w.agents[k];
        CHECK(a.possession[k] == 1);
        CHECK(total(a.possession) == 1);
        CHECK(a.want != k);
        CHECK(std::accumulate(a.view.begin(), a.view.end(), 0.0) == doctest::Approx(7.0));
    }
    CHECK_NOTHROW(check_invariants(w));
}

TEST_CASE("view exchange worked example") {
    // Unmet demand for good 1 bumps a's view there before averaging.
    AgentState a = make_agent({0, 0, 0}, {3, 0, 0}, 1, {0, 1, 0});
    AgentState b = make_agent({0, 0, 0}, {0, 3, 0}, 0);
    exchange_views(a, b);
    CHECK(a.view[0] == doctest::Approx(9.0 / 7.0).epsilon(1e-14));
    CHECK(a.view[1] == doctest::Approx(12.0 / 7.0).epsilon(1e-14));
    CHECK(a.view[2] == 0.0);
    CHECK(a.view == b.view);
}

TEST_CASE("view exchange keeps normalization") {
    Rng rng(7);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t n = 3 + rng.below(40);
        std::vector<double> va(n), vb(n);
        std::vector<Units> da(n), db(n);
        for (std::size_t j = 0; j < n; ++j) {
            va[j] = rng.uniform();
            vb[j] = rng.uniform();
            da[j] = static_cast<Units>(rng.below(3));
            db[j] = static_cast<Units>(rng.below(3));
        }
        const double sa = std::accumulate(va.begin(), va.end(), 0.0);
        const double sb = std::accumulate(vb.begin(), vb.end(), 0.0);
        for (auto& v : va) v *= static_cast<double>(n) / sa;
        for (auto& v : vb) v *= static_cast<double>(n) / sb;
        AgentState a = make_agent(std::vector<Units>(n, 0), va, 0, da);
        AgentState b = make_agent(std::vector<Units>(n, 0), vb, 1, db);
        exchange_views(a, b);
        CHECK(std::accumulate(a.view.begin(), a.view.end(), 0.0) ==
              doctest::Approx(static_cast<double>(n)).epsilon(1e-12));
        CHECK(a.view == b.view);
        CHECK(std::all_of(a.view.begin(), a.view.end(), [](double v) { return v >= 0.0; }));
    }
}

TEST_CASE("shopping list") {
    const AgentState partner = make_agent({2, 0, 5, 1}, {1, 1, 1, 1}, 0);
    SUBCASE("threshold is strict") {
        const AgentState self = make_agent({0, 0, 0, 0}, {2.5, 0.5, 0.5, 0.5}, 1);
        CHECK(build_shopping_list(self, partner, 2.5) == std::vector<Units>{0, 0, 0, 0});
        CHECK(build_shopping_list(self, partner, 2.4) == std::vector<Units>{2, 0, 0, 0});
    }
    SUBCASE("want overrides the threshold") {
        const AgentState self = make_agent({0, 0, 0, 0}, {1, 1, 1, 1}, 2);
        CHECK(build_shopping_list(self, partner, 3.0) == std::vector<Units>{0, 0, 5, 0});
    }
    SUBCASE("nothing is listed that the partner lacks") {
        const AgentState self = make_agent({0, 0, 0, 0}, {0.1, 3.7, 0.1, 0.1}, 1);
        CHECK(build_shopping_list(self, partner, 1.0) == std::vector<Units>{0, 0, 0, 0});
    }
}

TEST_CASE("exchange with equal list totals is a full swap") {
    AgentState a = make_agent({3, 0, 0}, {1, 1, 1}, 1, {0, 2, 0});
    AgentState b = make_agent({0, 2, 1}, {1, 1, 1}, 0, {2, 0, 0});
    const ExchangeResult r = execute_exchange(a, b);
    CHECK(r.total_a == 2);
    CHECK(r.total_b == 2);
    CHECK(a.possession == std::vector<Units>{1, 2, 0});
    CHECK(b.possession == std::vector<Units>{2, 0, 1});
    CHECK(total(a.demand) == 0);
    CHECK(total(b.demand) == 0);
}

TEST_CASE("exchange needs both lists") {
    AgentState a = make_agent({3, 0, 0}, {1, 1, 1}, 1, {0, 2, 0});
    AgentState b = make_agent({0, 2, 0}, {1, 1, 1}, 0);
    const ExchangeResult r = execute_exchange(a, b);
    CHECK(r.total_a == 0);
    CHECK(a.possession == std::vector<Units>{3, 0, 0});
    CHECK(a.demand == std::vector<Units>{0, 2, 0});
}

TEST_CASE("demand beyond partner stock is an invariant violation") {
    AgentState a = make_agent({3, 0, 0}, {1, 1, 1}, 1, {0, 5, 0});
    AgentState b = make_agent({0, 2, 0}, {1, 1, 1}, 0, {1, 0, 0});
    CHECK_THROWS_AS(execute_exchange(a, b), InvariantViolation);
}

TEST_CASE("rarest-first fill matches a unit-by-unit oracle") {
    Rng rng(11);
    for (int trial = 0; trial < 2000; ++trial) {
        const std::size_t n = 3 + rng.below(12);
        std::vector<Units> stock_a(n), stock_b(n), da(n), db(n);
        for (std::size_t j = 0; j < n; ++j) {
            stock_a[j] = static_cast<Units>(rng.below(6));
            stock_b[j] = static_cast<Units>(rng.below(6));
            da[j] = stock_b[j] > 0 && rng.below(2) ? static_cast<Units>(1 + rng.below(stock_b[j])) : 0;
            db[j] = stock_a[j] > 0 && rng.below(2) ? static_cast<Units>(1 + rng.below(stock_a[j])) : 0;
        }
        const Units ta = total(da), tb = total(db);
        if (ta == 0 || tb == 0) continue;
        AgentState a = make_agent(stock_a, std::vector<double>(n, 1.0), 0, da);
        AgentState b = make_agent(stock_b, std::vector<double>(n, 1.0), 1, db);
        const ExchangeResult r = execute_exchange(a, b);
        const Units units = std::min(ta, tb);
        REQUIRE(r.total_a == units);
        CHECK(total(r.received_by_a) == units);
        CHECK(total(r.received_by_b) == units);
        CHECK(r.received_by_a == (ta > tb ? unit_by_unit(da, units) : da));
        CHECK(r.received_by_b == (tb > ta ? unit_by_unit(db, units) : db));
        for (std::size_t j = 0; j < n; ++j) {
            CHECK(a.possession[j] == stock_a[j] + r.received_by_a[j] - r.received_by_b[j]);
            CHECK(a.possession[j] >= 0);
            CHECK(b.possession[j] >= 0);
            CHECK(a.demand[j] == da[j] - r.received_by_a[j]);
        }
    }
}

TEST_CASE("consume and produce") {
    Rng rng(3);
    SUBCASE("want held and own good present") {
        AgentState a = make_agent({2, 1, 0}, {1, 1, 1}, 1);
        const auto [consumed, produced] = consume_and_produce(a, 0, rng);
        CHECK(consumed);
        CHECK_FALSE(produced);
        CHECK(a.possession == std::vector<Units>{2, 0, 0});
        CHECK(a.want != 0);
    }
    SUBCASE("own stock empty triggers production") {
        AgentState a = make_agent({0, 0, 1}, {1, 1, 1}, 1);
        const auto [consumed, produced] = consume_and_produce(a, 0, rng);
        CHECK_FALSE(consumed);
        CHECK(produced);
        CHECK(a.possession == std::vector<Units>{1, 0, 1});
    }
}

TEST_CASE("wants are never the own good and cover the rest uniformly") {
    Rng rng(5);
    const std::size_t n = 10, self = 4;
    std::vector<int> hits(n, 0);
    const int draws = 100'000;
    for (int i = 0; i < draws; ++i) ++hits[draw_want(n, self, rng)];
    CHECK(hits[self] == 0);
    for (std::size_t g = 0; g < n; ++g) {
        if (g == self) continue;
        // 9 equiprobable outcomes; 5 sigma is about 0.0047.
        CHECK(static_cast<double>(hits[g]) / draws == doctest::Approx(1.0 / 9.0).epsilon(0.05));
    }
}

TEST_CASE("co-trader ties are broken uniformly") {
    ModelConfig c;
    c.n_agents = 3;
    WorldState w = init_world(c);
    // Trader 0 wants good 1; agents 1 and 2 hold one unit each.
    w.agents[0].want = 1;
    w.agents[2].possession[1] = 1;
    Rng rng(99);
    int first = 0;
    const int trials = 10'000;
    for (int i = 0; i < trials; ++i) {
        const std::size_t l = select_co_trader(w, 0, rng);
        REQUIRE((l == 1 || l == 2));
        first += l == 1 ? 1 : 0;
    }
    CHECK(static_cast<double>(first) / trials == doctest::Approx(0.5).epsilon(0.04));
}

TEST_CASE("co-trader holds the most of the trader's want") {
    ModelConfig c;
    c.n_agents = 5;
    WorldState w = init_world(c);
    w.agents[0].want = 3;
    w.agents[2].possession[3] = 4;
    Rng rng(1);
    CHECK(select_co_trader(w, 0, rng) == 2);
    // The trader's own stock does not count.
    w.agents[0].possession[3] = 10;
    CHECK(select_co_trader(w, 0, rng) == 2);
}

TEST_CASE("replay is deterministic") {
    ModelConfig c;
    c.seed = 42;
    WorldState a = init_world(c), b = init_world(c);
    for (int t = 0; t < 200; ++t) {
        run_turn(a);
        run_turn(b);
    }
    CHECK(a == b);
    CHECK(checksum(a) == checksum(b));
    CHECK(serialize(a) == serialize(b));

    c.seed = 43;
    WorldState other = init_world(c);
    for (int t = 0; t < 200; ++t) run_turn(other);
    CHECK(checksum(other) != checksum(a));
}

TEST_CASE("state invariants hold along a trajectory") {
    for (double thresh : {1.0, 2.5}) {
        ModelConfig c;
        c.thresh = thresh;
        c.seed = 8;
        WorldState w = init_world(c);
        Units stock = 0;
        for (const AgentState& a : w.agents) stock += total(a.possession);
        for (int t = 0; t < 300; ++t) {
            run_turn(w);
            REQUIRE_NOTHROW(check_invariants(w));
            Units now = 0;
            for (const AgentState& a : w.agents) now += total(a.possession);
            CHECK(now == stock + w.turn_stats.units_produced - w.turn_stats.units_consumed);
            stock = now;
        }
        CHECK(w.turn == 300);
    }
}

TEST_CASE("run_turn refuses to start mid-turn") {
    WorldState w = init_world({});
    run_transaction(w);
    CHECK_THROWS_AS(run_turn(w), InvariantViolation);
}

#pragma once

// Money detection on top of the exchange model: the most wanted good per turn,
// switching events when it is overtaken, and the lifetime series between them.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "moneylife/model.hpp"

namespace moneylife {

struct MoneyObservation {
    std::uint64_t turn = 0;
    Good argmax_good = 0;
    double v_max = 0.0;  // max_j sum_k V_kj / N
    Units total_trade_units = 0;
    Units exchanged_units_of_argmax = 0;
    Units units_produced = 0;
    Units money_supply = 0;  // units of argmax_good held across all agents
};

// Ties go to `incumbent` when it is among the maximizers, otherwise to the
// lowest index.
MoneyObservation observe_turn(const WorldState& world, std::optional<Good> incumbent = std::nullopt);

// Observation stream of one lifetime interval, summarized for the money
// conditions.
struct MoneyWindow {
    Good candidate = 0;
    std::uint64_t lifetime = 0;
    bool argmax_throughout = true;
    Units total_trade_units = 0;
    std::vector<Units> exchanged_per_good;
};

struct QualificationConfig {
    std::uint64_t min_lifetime = 10;
};

// Conditions (i)-(iv): candidate is the argmax in every turn, total trade is
// nonzero, the candidate is exchanged at least as much as the median good, and
// the interval lasts at least min_lifetime turns.
bool money_qualifies(const MoneyWindow& window, const QualificationConfig& config = {});

struct LifetimeSeries {
    std::vector<std::uint64_t> lifetimes;
    double thresh = 0.0;
    std::size_t n_agents = 0;
    std::uint64_t seed = 0;
    // Per interval, aligned with lifetimes.
    std::vector<Good> money_good;
    std::vector<bool> qualifies;

    std::size_t size() const { return lifetimes.size(); }
    bool empty() const { return lifetimes.empty(); }
    std::vector<double> as_doubles() const;
};

// Incremental switch detection. Feed one observation per turn in turn order;
// lifetimes close whenever the argmax changes. The open interval after the
// last event is never emitted.
class SwitchDetector {
public:
    explicit SwitchDetector(QualificationConfig qualification = {}) : qualification_(qualification) {}

    // Returns true if this observation is a switching event.
    bool push(const MoneyObservation& obs, std::span<const Units> exchanged_per_good = {});

    std::size_t event_count() const { return events_; }
    std::optional<Good> incumbent() const { return incumbent_; }
    std::optional<std::uint64_t> first_event_turn() const { return first_event_turn_; }
    std::uint64_t observed_turns() const { return observed_; }
    // Turns observed since the last event (discarded if the run stops here).
    std::uint64_t open_interval() const { return window_.lifetime; }

    const std::vector<std::uint64_t>& lifetimes() const { return lifetimes_; }
    const std::vector<Good>& money_goods() const { return goods_; }
    const std::vector<bool>& qualifies() const { return qualifies_; }

private:
    QualificationConfig qualification_;
    std::optional<Good> incumbent_;
    std::optional<std::uint64_t> first_event_turn_;
    std::uint64_t observed_ = 0;
    std::size_t events_ = 0;
    MoneyWindow window_;
    std::vector<std::uint64_t> lifetimes_;
    std::vector<Good> goods_;
    std::vector<bool> qualifies_;
};

// Batch form of SwitchDetector. Fewer than two events yields an empty series;
// callers treat that as "extend the run".
LifetimeSeries detect_switches(std::span<const MoneyObservation> observations,
                               const QualificationConfig& qualification = {});

// Two tab-separated columns (event_index, lifetime_turns) preceded by '#'
// header lines carrying config and seed.
void write_lifetimes(std::ostream& out, const LifetimeSeries& series,
                     std::span<const std::string> extra_header = {});
LifetimeSeries read_lifetimes(std::istream& in);

} // namespace moneylife

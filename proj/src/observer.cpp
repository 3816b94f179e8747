#include "moneylife/observer.hpp"

#include <algorithm>
#include <istream>
#include <ostream>
#include <sstream>

#include "moneylife/errors.hpp"

namespace moneylife {

MoneyObservation observe_turn(const WorldState& world, std::optional<Good> incumbent) {
    const std::size_t n = world.size();
    std::vector<double> column(n, 0.0);
    for (const AgentState& a : world.agents) {
        for (std::size_t j = 0; j < n; ++j) column[j] += a.view[j];
    }
    const double best = *std::max_element(column.begin(), column.end());
    Good argmax = static_cast<Good>(std::find(column.begin(), column.end(), best) - column.begin());
    if (incumbent && *incumbent < n && column[*incumbent] == best) argmax = *incumbent;

    MoneyObservation obs;
    obs.turn = world.turn;
    obs.argmax_good = argmax;
    obs.v_max = best / static_cast<double>(n);
    const auto& exchanged = world.turn_stats.units_exchanged_per_good;
    for (Units u : exchanged) obs.total_trade_units += u;
    obs.exchanged_units_of_argmax = exchanged.empty() ? 0 : exchanged[argmax];
    obs.units_produced = world.turn_stats.units_produced;
    for (const AgentState& a : world.agents) obs.money_supply += a.possession[argmax];
    return obs;
}

bool money_qualifies(const MoneyWindow& window, const QualificationConfig& config) {
    if (!window.argmax_throughout) return false;
    if (window.total_trade_units <= 0) return false;
    if (window.lifetime < config.min_lifetime) return false;
    if (window.candidate >= window.exchanged_per_good.size()) return false;

    std::vector<Units> sorted = window.exchanged_per_good;
    std::sort(sorted.begin(), sorted.end());
    const std::size_t m = sorted.size();
    // Median of an even count is the mean of the middle pair; compare doubled
    // values to stay in integers.
    const Units twice_median = (m % 2 == 1) ? 2 * sorted[m / 2] : sorted[m / 2 - 1] + sorted[m / 2];
    return 2 * window.exchanged_per_good[window.candidate] >= twice_median;
}

std::vector<double> LifetimeSeries::as_doubles() const {
    return {lifetimes.begin(), lifetimes.end()};
}

bool SwitchDetector::push(const MoneyObservation& obs, std::span<const Units> exchanged_per_good) {
    ++observed_;
    if (!incumbent_) {
        incumbent_ = obs.argmax_good;
        return false;
    }
    const bool is_event = obs.argmax_good != *incumbent_;
    if (is_event) {
        if (events_ > 0) {
            lifetimes_.push_back(window_.lifetime);
            goods_.push_back(window_.candidate);
            qualifies_.push_back(money_qualifies(window_, qualification_));
        } else {
            first_event_turn_ = obs.turn;
        }
        ++events_;
        incumbent_ = obs.argmax_good;
        window_ = MoneyWindow{};
        window_.candidate = obs.argmax_good;
        window_.exchanged_per_good.assign(exchanged_per_good.size(), 0);
    }
    if (events_ > 0) {
        ++window_.lifetime;
        window_.argmax_throughout = window_.argmax_throughout && obs.argmax_good == window_.candidate;
        window_.total_trade_units += obs.total_trade_units;
        if (window_.exchanged_per_good.size() < exchanged_per_good.size()) {
            window_.exchanged_per_good.resize(exchanged_per_good.size(), 0);
        }
        for (std::size_t j = 0; j < exchanged_per_good.size(); ++j) {
            window_.exchanged_per_good[j] += exchanged_per_good[j];
        }
    }
    return is_event;
}

LifetimeSeries detect_switches(std::span<const MoneyObservation> observations,
                               const QualificationConfig& qualification) {
    SwitchDetector detector(qualification);
    for (const MoneyObservation& obs : observations) {
        // Without per-good counts, condition (iii) falls back to the argmax
        // count alone, padded so the candidate slot exists.
        std::vector<Units> counts(obs.argmax_good + 1, 0);
        counts[obs.argmax_good] = obs.exchanged_units_of_argmax;
        detector.push(obs, counts);
    }
    LifetimeSeries series;
    series.lifetimes = detector.lifetimes();
    series.money_good = detector.money_goods();
    series.qualifies = detector.qualifies();
    return series;
}

void write_lifetimes(std::ostream& out, const LifetimeSeries& series,
                     std::span<const std::string> extra_header) {
    out << "# lifetime series\n"
        << "# n_agents\t" << series.n_agents << '\n'
        << "# thresh\t" << series.thresh << '\n'
        << "# seed\t" << series.seed << '\n';
    for (const std::string& line : extra_header) out << "# " << line << '\n';
    out << "# event_index\tlifetime_turns\n";
    for (std::size_t i = 0; i < series.lifetimes.size(); ++i) {
        out << i << '\t' << series.lifetimes[i] << '\n';
    }
}

LifetimeSeries read_lifetimes(std::istream& in) {
    LifetimeSeries series;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        if (line[0] == '#') {
            std::istringstream header(line.substr(1));
            std::string key;
            header >> key;
            if (key == "n_agents") header >> series.n_agents;
            if (key == "thresh") header >> series.thresh;
            if (key == "seed") header >> series.seed;
            continue;
        }
        std::istringstream row(line);
        std::size_t index = 0;
        std::uint64_t lifetime = 0;
        if (!(row >> index >> lifetime)) throw ConfigError("malformed lifetime row: " + line);
        series.lifetimes.push_back(lifetime);
    }
    return series;
}

} // namespace moneylife

#include "moneylife/harness.hpp"

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <mutex>
#include <sstream>
#include <thread>

#include "moneylife/errors.hpp"

namespace moneylife {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string short_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%g", v);
    return buf;
}

std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

std::ofstream open_output(const fs::path& path, std::string_view manifest_hash, std::string_view columns) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << "# manifest_hash=" << manifest_hash << '\n' << "# columns=" << columns << '\n';
    return out;
}

double seconds_since(std::chrono::steady_clock::time_point start) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

const char* demand_memory_name(DemandMemory m) {
    return m == DemandMemory::Standing ? "standing" : "exchanged-only";
}

DemandMemory parse_demand_memory(const std::string& s) {
    if (s == "standing") return DemandMemory::Standing;
    if (s == "exchanged-only") return DemandMemory::ExchangedOnly;
    throw ConfigError("unknown demand-memory '" + s + "'");
}

json fit_range_json(const std::optional<std::pair<double, double>>& r) {
    if (!r) return nullptr;
    return json::array({r->first, r->second});
}

std::optional<std::pair<double, double>> fit_range_from(const json& j) {
    if (j.is_null()) return std::nullopt;
    if (!j.is_array() || j.size() != 2) throw ConfigError("fit-range must be [lo, hi]");
    return std::pair{j[0].get<double>(), j[1].get<double>()};
}

json to_json_value(const ExperimentPlan& plan) {
    json j;
    j["n-agents"] = plan.base.n_agents;
    j["thresh"] = plan.base.thresh;
    j["seed"] = plan.base.seed;
    j["max-turns"] = plan.base.max_turns;
    j["demand-memory"] = demand_memory_name(plan.base.demand_memory);
    j["thresh-list"] = plan.thresh_list;
    j["seeds"] = plan.seeds;
    j["min-lifetime-events"] = plan.min_lifetime_events;
    j["output-dir"] = plan.output_dir.string();
    j["workers"] = plan.workers;
    j["fig1-turns"] = plan.fig1_turns;
    j["write-field"] = plan.write_field;
    j["mfdfa"] = {{"poly-order", plan.mfdfa.poly_order},
                  {"q-grid", plan.mfdfa.q_grid},
                  {"scales", plan.mfdfa.scales},
                  {"fit-range", fit_range_json(plan.mfdfa.fit_range)},
                  {"min-retained-windows", plan.mfdfa.min_retained_windows}};
    j["wtmm"] = {{"q-grid", plan.wtmm.q_grid},
                 {"scales", plan.wtmm.scales},
                 {"link-window", plan.wtmm.link_window},
                 {"edge-margin-factor", plan.wtmm.edge_margin_factor},
                 {"fit-range", fit_range_json(plan.wtmm.fit_range)},
                 {"min-lines", plan.wtmm.min_lines},
                 {"integrate", plan.wtmm.integrate},
                 {"periodic", plan.wtmm.periodic}};
    return j;
}

template <class T>
void take(const json& j, const char* key, T& into) {
    if (j.contains(key)) into = j.at(key).get<T>();
}

void merge_value(ExperimentPlan& plan, const json& j) {
    if (!j.is_object()) throw ConfigError("config must be a JSON object");
    take(j, "n-agents", plan.base.n_agents);
    take(j, "thresh", plan.base.thresh);
    take(j, "seed", plan.base.seed);
    take(j, "max-turns", plan.base.max_turns);
    if (j.contains("demand-memory")) plan.base.demand_memory = parse_demand_memory(j["demand-memory"]);
    take(j, "thresh-list", plan.thresh_list);
    take(j, "seeds", plan.seeds);
    take(j, "min-lifetime-events", plan.min_lifetime_events);
    if (j.contains("output-dir")) plan.output_dir = j["output-dir"].get<std::string>();
    take(j, "workers", plan.workers);
    take(j, "fig1-turns", plan.fig1_turns);
    take(j, "write-field", plan.write_field);
    if (j.contains("mfdfa")) {
        const json& m = j["mfdfa"];
        take(m, "poly-order", plan.mfdfa.poly_order);
        take(m, "q-grid", plan.mfdfa.q_grid);
        take(m, "scales", plan.mfdfa.scales);
        if (m.contains("fit-range")) plan.mfdfa.fit_range = fit_range_from(m["fit-range"]);
        take(m, "min-retained-windows", plan.mfdfa.min_retained_windows);
    }
    if (j.contains("wtmm")) {
        const json& w = j["wtmm"];
        take(w, "q-grid", plan.wtmm.q_grid);
        take(w, "scales", plan.wtmm.scales);
        take(w, "link-window", plan.wtmm.link_window);
        take(w, "edge-margin-factor", plan.wtmm.edge_margin_factor);
        if (w.contains("fit-range")) plan.wtmm.fit_range = fit_range_from(w["fit-range"]);
        take(w, "min-lines", plan.wtmm.min_lines);
        take(w, "integrate", plan.wtmm.integrate);
        take(w, "periodic", plan.wtmm.periodic);
    }
}

template <class F>
void run_estimator(F&& f, std::optional<std::string>& error) {
    try {
        f();
    } catch (const std::exception& e) {
        error = e.what();
    }
}

void analyze_mfdfa(std::span<const double> original, std::span<const double> shuffled, const MfdfaConfig& config,
                   RunAnalysis& out) {
    run_estimator([&] { out.original.mfdfa = run_mfdfa(original, config); }, out.original.mfdfa_error);
    run_estimator([&] { out.shuffled.mfdfa = run_mfdfa(shuffled, config); }, out.shuffled.mfdfa_error);
}

void analyze_wtmm(std::span<const double> original, std::span<const double> shuffled, const WtmmConfig& config,
                  RunAnalysis& out) {
    run_estimator([&] { out.original.wtmm = run_wtmm(original, config); }, out.original.wtmm_error);
    run_estimator([&] { out.shuffled.wtmm = run_wtmm(shuffled, config); }, out.shuffled.wtmm_error);
}

std::uint64_t median_of(std::vector<std::uint64_t> v) {
    if (v.empty()) return 0;
    std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2), v.end());
    return v[v.size() / 2];
}

std::vector<SweepRow> sweep_rows(double thresh, std::uint64_t seed, const SimulationOutput& sim,
                                 const RunAnalysis& analysis) {
    const auto& life = sim.lifetimes.lifetimes;
    SweepRow base;
    base.thresh = thresh;
    base.seed = seed;
    base.lifetime_count = life.size();
    base.median_lifetime = median_of(life);
    base.max_lifetime = life.empty() ? 0 : *std::max_element(life.begin(), life.end());
    base.under_sampled = sim.under_sampled;

    SweepRow m = base;
    m.method = Method::Mfdfa;
    if (analysis.original.mfdfa) {
        const MfdfaResult& r = *analysis.original.mfdfa;
        m.delta_alpha = r.spectrum.width();
        m.alpha_at_max_f = r.spectrum.alpha_at_max_f();
        m.r2_q2 = r.hurst.r2_at(2.0);
        double lo = std::numeric_limits<double>::infinity(), hi = -lo;
        for (double h : r.hurst.h) {
            if (!std::isfinite(h)) continue;
            lo = std::min(lo, h);
            hi = std::max(hi, h);
        }
        m.h_range = hi >= lo ? hi - lo : kNaN;
        m.fit_decades = std::log10(r.hurst.fit_range.second / r.hurst.fit_range.first);
    } else {
        m.delta_alpha = m.alpha_at_max_f = m.r2_q2 = m.h_range = m.fit_decades = kNaN;
        m.error = analysis.original.mfdfa_error.value_or("not run");
    }
    if (analysis.shuffled.mfdfa) {
        m.delta_alpha_shuffled = analysis.shuffled.mfdfa->spectrum.width();
        m.alpha_at_max_f_shuffled = analysis.shuffled.mfdfa->spectrum.alpha_at_max_f();
    } else {
        m.delta_alpha_shuffled = m.alpha_at_max_f_shuffled = kNaN;
        if (m.error.empty()) m.error = "shuffled: " + analysis.shuffled.mfdfa_error.value_or("not run");
    }

    SweepRow w = base;
    w.method = Method::Wtmm;
    w.h_range = kNaN;
    if (analysis.original.wtmm) {
        const WtmmResult& r = *analysis.original.wtmm;
        w.delta_alpha = r.spectrum.width();
        w.alpha_at_max_f = r.spectrum.alpha_at_max_f();
        w.r2_q2 = kNaN;
        for (std::size_t i = 0; i < r.partition.q.size(); ++i) {
            if (r.partition.q[i] == 2.0) w.r2_q2 = r.partition.r2[i];
        }
        w.fit_decades = std::log10(r.partition.scales.back() / r.partition.scales.front());
    } else {
        w.delta_alpha = w.alpha_at_max_f = w.r2_q2 = w.fit_decades = kNaN;
        w.error = analysis.original.wtmm_error.value_or("not run");
    }
    if (analysis.shuffled.wtmm) {
        w.delta_alpha_shuffled = analysis.shuffled.wtmm->spectrum.width();
        w.alpha_at_max_f_shuffled = analysis.shuffled.wtmm->spectrum.alpha_at_max_f();
    } else {
        w.delta_alpha_shuffled = w.alpha_at_max_f_shuffled = kNaN;
        if (w.error.empty()) w.error = "shuffled: " + analysis.shuffled.wtmm_error.value_or("not run");
    }
    return {m, w};
}

struct RunOutcome {
    RunManifest manifest;
    std::vector<SweepRow> rows;
};

RunOutcome execute_run(const ExperimentPlan& plan, double thresh, std::uint64_t seed) {
    RunOutcome outcome;
    RunManifest& manifest = outcome.manifest;
    manifest.plan = plan;
    manifest.plan.base.thresh = thresh;
    manifest.plan.base.seed = seed;
    manifest.plan.thresh_list = {thresh};
    manifest.plan.seeds = {seed};
    manifest.plan.output_dir = run_directory(plan, thresh, seed);
    manifest.shuffle_seed = shuffle_seed_for(seed, thresh);
    validate(manifest.plan);
    const std::string hash = manifest.hash();
    const fs::path dir = manifest.plan.output_dir;
    fs::create_directories(dir);

    auto start = std::chrono::steady_clock::now();
    const SimulationOutput sim = simulate(manifest.plan.base, plan.min_lifetime_events, plan.fig1_turns);
    manifest.turns = sim.turns_run;
    manifest.lifetime_count = sim.lifetimes.size();
    manifest.qualifying_count = static_cast<std::size_t>(
        std::count(sim.lifetimes.qualifies.begin(), sim.lifetimes.qualifies.end(), true));
    manifest.under_sampled = sim.under_sampled;
    if (sim.under_sampled) {
        manifest.warnings.push_back("under-sampled: " + std::to_string(sim.lifetimes.size()) +
                                    " lifetimes after " + std::to_string(sim.turns_run) + " turns");
    }
    {
        write_turns(dir / "turns.tsv", sim.turns, hash);
        std::ofstream out(dir / "lifetimes.tsv");
        if (!out) throw std::runtime_error("cannot write " + (dir / "lifetimes.tsv").string());
        const std::string header = "manifest_hash=" + hash;
        write_lifetimes(out, sim.lifetimes, std::span<const std::string>(&header, 1));
        write_qualification(dir / "lifetime_qualification.tsv", sim.lifetimes, hash);
    }
    manifest.stages.push_back({"simulate", dir / "lifetimes.tsv", seconds_since(start)});

    const std::vector<double> series = sim.lifetimes.as_doubles();
    const std::vector<double> surrogate = shuffle(series, manifest.shuffle_seed);
    RunAnalysis analysis;

    start = std::chrono::steady_clock::now();
    analyze_mfdfa(series, surrogate, plan.mfdfa, analysis);
    if (analysis.original.mfdfa) {
        write_fluctuation(dir / "mfdfa_fluct.tsv", analysis.original.mfdfa->fluctuation, hash);
        const SingularitySpectrum* shuf = analysis.shuffled.mfdfa ? &analysis.shuffled.mfdfa->spectrum : nullptr;
        write_spectrum(dir / "mfdfa_spectrum.tsv", analysis.original.mfdfa->spectrum, shuf, hash);
        manifest.stages.push_back({"analyze-mfdfa", dir / "mfdfa_spectrum.tsv", seconds_since(start)});
        for (const auto& w : analysis.original.mfdfa->spectrum.warnings) manifest.warnings.push_back("mfdfa: " + w);
    }

    start = std::chrono::steady_clock::now();
    analyze_wtmm(series, surrogate, plan.wtmm, analysis);
    if (analysis.original.wtmm) {
        write_tau(dir / "wtmm_tau.tsv", analysis.original.wtmm->partition, hash);
        const SingularitySpectrum* shuf = analysis.shuffled.wtmm ? &analysis.shuffled.wtmm->spectrum : nullptr;
        write_spectrum(dir / "wtmm_spectrum.tsv", analysis.original.wtmm->spectrum, shuf, hash);
        if (plan.write_field) write_field(dir / "wtmm_field.tsv", analysis.original.wtmm->field, hash);
        manifest.stages.push_back({"analyze-wtmm", dir / "wtmm_spectrum.tsv", seconds_since(start)});
        for (const auto& w : analysis.original.wtmm->spectrum.warnings) manifest.warnings.push_back("wtmm: " + w);
    }

    std::string errors;
    if (analysis.original.mfdfa_error) errors += "mfdfa: " + *analysis.original.mfdfa_error + "; ";
    if (analysis.original.wtmm_error) errors += "wtmm: " + *analysis.original.wtmm_error + "; ";
    if (!errors.empty()) manifest.analysis_error = errors;

    {
        std::ofstream out(dir / "manifest.json");
        if (!out) throw std::runtime_error("cannot write manifest in " + dir.string());
        out << manifest.to_json() << '\n';
    }
    outcome.rows = sweep_rows(thresh, seed, sim, analysis);
    return outcome;
}

std::string sanitize(std::string s) {
    for (char& c : s) {
        if (c == '\t' || c == '\n' || c == '\r') c = ' ';
    }
    return s.empty() ? "-" : s;
}

std::vector<std::string> split_tabs(const std::string& line) {
    std::vector<std::string> out;
    std::string field;
    std::istringstream in(line);
    while (std::getline(in, field, '\t')) out.push_back(field);
    return out;
}

double parse_double(const std::string& s) {
    return std::strtod(s.c_str(), nullptr);
}

bool same_thresh(double a, double b) { return std::abs(a - b) < 1e-9; }

void copy_into(const fs::path& from, const fs::path& to, std::vector<std::string>& errors, std::string_view fig) {
    if (!fs::exists(from)) {
        errors.push_back(std::string(fig) + ": missing " + from.string());
        return;
    }
    fs::copy_file(from, to, fs::copy_options::overwrite_existing);
}

} // namespace

std::vector<std::uint64_t> default_seeds(std::size_t count) {
    std::vector<std::uint64_t> seeds(count);
    for (std::size_t i = 0; i < count; ++i) seeds[i] = i + 1;
    return seeds;
}

fs::path default_output_root() {
    if (const char* env = std::getenv(kOutputRootEnv); env != nullptr && *env != '\0') return env;
    return "moneylife-out";
}

void validate(const ExperimentPlan& plan) {
    validate(plan.base);
    if (plan.thresh_list.empty()) throw ConfigError("thresh-list is empty");
    for (double t : plan.thresh_list) {
        if (!(t >= 0.0 && t <= static_cast<double>(plan.base.n_agents))) {
            throw ConfigError("thresh " + short_double(t) + " outside [0, N]");
        }
    }
    if (plan.min_lifetime_events < kUnderSampledEvents) {
        throw ConfigError("min-lifetime-events must be at least " + std::to_string(kUnderSampledEvents));
    }
    if (plan.workers == 0) throw ConfigError("workers must be positive");
    if (!(plan.wtmm.link_window > 0.0)) throw ConfigError("link-window must be positive");
    if (plan.wtmm.edge_margin_factor < 3.0) throw ConfigError("edge-margin-factor must be at least 3");
    if (!std::is_sorted(plan.wtmm.scales.begin(), plan.wtmm.scales.end())) {
        throw ConfigError("wtmm scales must increase");
    }
}

std::string plan_to_json(const ExperimentPlan& plan) { return to_json_value(plan).dump(2); }

void merge_plan_json(ExperimentPlan& into, std::string_view text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config parse error: ") + e.what());
    }
    try {
        merge_value(into, j.contains("plan") ? j["plan"] : j);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config type error: ") + e.what());
    }
}

std::string RunManifest::hash() const {
    // Where and how parallel a run executes does not change its outputs.
    json j = to_json_value(plan);
    j.erase("output-dir");
    j.erase("workers");
    j["version"] = version;
    j["shuffle-seed"] = shuffle_seed;
    return hex64(fnv1a(j.dump()));
}

std::string RunManifest::to_json() const {
    json j;
    j["version"] = version;
    j["hash"] = hash();
    j["plan"] = to_json_value(plan);
    j["shuffle-seed"] = shuffle_seed;
    j["turns"] = turns;
    j["lifetime-count"] = lifetime_count;
    j["qualifying-count"] = qualifying_count;
    j["under-sampled"] = under_sampled;
    j["warnings"] = warnings;
    j["analysis-error"] = analysis_error ? json(*analysis_error) : json(nullptr);
    json stages_json = json::array();
    for (const StageRecord& s : stages) {
        stages_json.push_back({{"name", s.name}, {"path", s.path.string()}, {"seconds", s.seconds}});
    }
    j["stages"] = stages_json;
    return j.dump(2);
}

RunManifest read_manifest(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read manifest " + path.string());
    json j;
    try {
        j = json::parse(in);
    } catch (const json::exception& e) {
        throw ConfigError("manifest parse error: " + std::string(e.what()));
    }
    RunManifest m;
    merge_value(m.plan, j.at("plan"));
    m.version = j.value("version", std::string(kVersionTag));
    m.shuffle_seed = j.value("shuffle-seed", std::uint64_t{0});
    m.turns = j.value("turns", std::uint64_t{0});
    m.lifetime_count = j.value("lifetime-count", std::size_t{0});
    m.qualifying_count = j.value("qualifying-count", std::size_t{0});
    m.under_sampled = j.value("under-sampled", false);
    if (j.contains("warnings")) m.warnings = j["warnings"].get<std::vector<std::string>>();
    if (j.contains("analysis-error") && !j["analysis-error"].is_null()) {
        m.analysis_error = j["analysis-error"].get<std::string>();
    }
    if (j.contains("stages")) {
        for (const json& s : j["stages"]) {
            m.stages.push_back({s.at("name"), s.at("path").get<std::string>(), s.at("seconds")});
        }
    }
    return m;
}

SimulationOutput simulate(const ModelConfig& config, std::size_t target_events, std::uint64_t keep_turns) {
    WorldState world = init_world(config);
    SwitchDetector detector;
    SimulationOutput out;
    while (world.turn < config.max_turns && detector.lifetimes().size() < target_events) {
        run_turn(world);
        const MoneyObservation obs = observe_turn(world, detector.incumbent());
        const bool event = detector.push(obs, world.turn_stats.units_exchanged_per_good);
        if (out.turns.size() < keep_turns) out.turns.push_back({obs, event});
    }
    out.turns_run = world.turn;
    LifetimeSeries& series = out.lifetimes;
    series.lifetimes = detector.lifetimes();
    series.money_good = detector.money_goods();
    series.qualifies = detector.qualifies();
    series.thresh = config.thresh;
    series.n_agents = config.n_agents;
    series.seed = config.seed;
    out.under_sampled = series.size() < kUnderSampledEvents;
    return out;
}

RunAnalysis analyze_series(std::span<const double> series, const ExperimentPlan& plan,
                           std::uint64_t shuffle_seed) {
    const std::vector<double> surrogate = shuffle(series, shuffle_seed);
    RunAnalysis out;
    analyze_mfdfa(series, surrogate, plan.mfdfa, out);
    analyze_wtmm(series, surrogate, plan.wtmm, out);
    return out;
}

std::uint64_t shuffle_seed_for(std::uint64_t seed, double thresh) {
    return splitmix64(seed ^ splitmix64(std::bit_cast<std::uint64_t>(thresh)));
}

fs::path run_directory(const ExperimentPlan& plan, double thresh, std::uint64_t seed) {
    return plan.output_dir / ("thresh_" + short_double(thresh)) / ("seed_" + std::to_string(seed));
}

RunManifest run_single(const ExperimentPlan& plan, double thresh, std::uint64_t seed) {
    return execute_run(plan, thresh, seed).manifest;
}

bool SweepTable::any_under_sampled() const {
    return std::any_of(rows.begin(), rows.end(), [](const SweepRow& r) { return r.under_sampled; });
}

bool SweepTable::any_failure() const {
    return !failures.empty() ||
           std::any_of(rows.begin(), rows.end(), [](const SweepRow& r) { return r.error != "" && r.error != "-"; });
}

SweepTable run_sweep(const ExperimentPlan& plan, const std::function<void(const RunManifest&)>& progress) {
    validate(plan);
    struct Job {
        double thresh;
        std::uint64_t seed;
    };
    std::vector<Job> jobs;
    for (double t : plan.thresh_list) {
        for (std::uint64_t s : plan.seeds) jobs.push_back({t, s});
    }

    std::vector<std::vector<SweepRow>> rows(jobs.size());
    std::vector<std::string> failures(jobs.size());
    std::atomic<std::size_t> next{0};
    std::mutex progress_mutex;
    auto worker = [&] {
        for (std::size_t i = next++; i < jobs.size(); i = next++) {
            try {
                RunOutcome outcome = execute_run(plan, jobs[i].thresh, jobs[i].seed);
                rows[i] = std::move(outcome.rows);
                if (progress) {
                    std::lock_guard lock(progress_mutex);
                    progress(outcome.manifest);
                }
            } catch (const std::exception& e) {
                failures[i] = "thresh=" + short_double(jobs[i].thresh) + " seed=" + std::to_string(jobs[i].seed) +
                              ": " + e.what();
            }
        }
    };
    const std::size_t n_threads = std::min(plan.workers, std::max<std::size_t>(jobs.size(), 1));
    if (n_threads <= 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (std::size_t t = 0; t < n_threads; ++t) pool.emplace_back(worker);
    }

    SweepTable table;
    for (std::size_t i = 0; i < jobs.size(); ++i) {
        for (SweepRow& r : rows[i]) table.rows.push_back(std::move(r));
        if (!failures[i].empty()) table.failures.push_back(failures[i]);
    }

    RunManifest sweep_manifest;
    sweep_manifest.plan = plan;
    const std::string hash = sweep_manifest.hash();
    write_sweep(plan.output_dir / "sweep.tsv", table, hash);
    {
        std::ofstream out = open_output(plan.output_dir / "fig7_delta_alpha.tsv", hash,
                                        "thresh\tmethod\tseeds\tmean\tstd\tmean_shuffled\tstd_shuffled");
        for (const Fig7Row& r : aggregate(table, plan.thresh_list)) {
            out << short_double(r.thresh) << '\t' << method_name(r.method) << '\t' << r.seeds << '\t'
                << format_double(r.mean) << '\t' << format_double(r.stddev) << '\t'
                << format_double(r.mean_shuffled) << '\t' << format_double(r.stddev_shuffled) << '\n';
        }
    }
    std::ofstream(plan.output_dir / "plan.json") << plan_to_json(plan) << '\n';
    return table;
}

void write_sweep(const fs::path& path, const SweepTable& table, std::string_view manifest_hash) {
    std::ofstream out = open_output(
        path, manifest_hash,
        "thresh\tseed\tmethod\tdelta_alpha\tdelta_alpha_shuffled\talpha_at_max_f\talpha_at_max_f_shuffled\t"
        "r2_q2\th_range\tfit_decades\tlifetimes\tmedian_lifetime\tmax_lifetime\tunder_sampled\terror");
    for (const std::string& f : table.failures) out << "# failure: " << sanitize(f) << '\n';
    for (const SweepRow& r : table.rows) {
        out << format_double(r.thresh) << '\t' << r.seed << '\t' << method_name(r.method) << '\t'
            << format_double(r.delta_alpha) << '\t' << format_double(r.delta_alpha_shuffled) << '\t'
            << format_double(r.alpha_at_max_f) << '\t' << format_double(r.alpha_at_max_f_shuffled) << '\t'
            << format_double(r.r2_q2) << '\t' << format_double(r.h_range) << '\t' << format_double(r.fit_decades)
            << '\t' << r.lifetime_count << '\t' << r.median_lifetime << '\t' << r.max_lifetime << '\t'
            << (r.under_sampled ? 1 : 0) << '\t' << sanitize(r.error) << '\n';
    }
}

SweepTable read_sweep(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read " + path.string());
    SweepTable table;
    std::string line;
    const std::string failure_tag = "# failure: ";
    while (std::getline(in, line)) {
        if (line.rfind(failure_tag, 0) == 0) {
            table.failures.push_back(line.substr(failure_tag.size()));
            continue;
        }
        if (line.empty() || line[0] == '#') continue;
        const std::vector<std::string> f = split_tabs(line);
        if (f.size() != 15) throw std::runtime_error("malformed sweep row in " + path.string());
        SweepRow r;
        r.thresh = parse_double(f[0]);
        r.seed = std::stoull(f[1]);
        r.method = f[2] == method_name(Method::Wtmm) ? Method::Wtmm : Method::Mfdfa;
        r.delta_alpha = parse_double(f[3]);
        r.delta_alpha_shuffled = parse_double(f[4]);
        r.alpha_at_max_f = parse_double(f[5]);
        r.alpha_at_max_f_shuffled = parse_double(f[6]);
        r.r2_q2 = parse_double(f[7]);
        r.h_range = parse_double(f[8]);
        r.fit_decades = parse_double(f[9]);
        r.lifetime_count = std::stoull(f[10]);
        r.median_lifetime = std::stoull(f[11]);
        r.max_lifetime = std::stoull(f[12]);
        r.under_sampled = f[13] == "1";
        r.error = f[14] == "-" ? "" : f[14];
        table.rows.push_back(std::move(r));
    }
    return table;
}

std::vector<Fig7Row> aggregate(const SweepTable& table, std::span<const double> thresh_list) {
    auto moments = [](const std::vector<double>& v) -> std::pair<double, double> {
        if (v.empty()) return {kNaN, kNaN};
        double mean = 0.0;
        for (double x : v) mean += x;
        mean /= static_cast<double>(v.size());
        double ss = 0.0;
        for (double x : v) ss += (x - mean) * (x - mean);
        return {mean, v.size() > 1 ? std::sqrt(ss / static_cast<double>(v.size() - 1)) : 0.0};
    };
    std::vector<Fig7Row> out;
    for (double t : thresh_list) {
        for (Method m : {Method::Mfdfa, Method::Wtmm}) {
            std::vector<double> orig, shuf;
            for (const SweepRow& r : table.rows) {
                if (r.method != m || !same_thresh(r.thresh, t)) continue;
                if (std::isfinite(r.delta_alpha)) orig.push_back(r.delta_alpha);
                if (std::isfinite(r.delta_alpha_shuffled)) shuf.push_back(r.delta_alpha_shuffled);
            }
            Fig7Row row;
            row.thresh = t;
            row.method = m;
            row.seeds = orig.size();
            std::tie(row.mean, row.stddev) = moments(orig);
            std::tie(row.mean_shuffled, row.stddev_shuffled) = moments(shuf);
            out.push_back(row);
        }
    }
    return out;
}

std::vector<std::string> export_figures(const fs::path& run_dir, const fs::path& dest,
                                        const std::optional<fs::path>& sweep, std::span<const double> thresh_list) {
    std::vector<std::string> errors;
    fs::create_directories(dest);
    copy_into(run_dir / "turns.tsv", dest / "fig1_turns.tsv", errors, "fig1");
    copy_into(run_dir / "lifetimes.tsv", dest / "fig2_lifetimes.tsv", errors, "fig2");
    copy_into(run_dir / "mfdfa_fluct.tsv", dest / "fig3_fluctuation.tsv", errors, "fig3");
    copy_into(run_dir / "mfdfa_spectrum.tsv", dest / "fig4_mfdfa_spectrum.tsv", errors, "fig4");
    copy_into(run_dir / "wtmm_field.tsv", dest / "fig5_wavelet.tsv", errors, "fig5");
    copy_into(run_dir / "wtmm_spectrum.tsv", dest / "fig6_wtmm_spectrum.tsv", errors, "fig6");
    if (sweep) {
        if (!fs::exists(*sweep)) {
            errors.push_back("fig7: missing " + sweep->string());
        } else {
            const SweepTable table = read_sweep(*sweep);
            std::vector<double> grid(thresh_list.begin(), thresh_list.end());
            if (grid.empty()) {
                for (const SweepRow& r : table.rows) {
                    if (std::none_of(grid.begin(), grid.end(), [&](double t) { return same_thresh(t, r.thresh); })) {
                        grid.push_back(r.thresh);
                    }
                }
                std::sort(grid.begin(), grid.end());
            }
            std::string hash = "unknown";
            {
                std::ifstream in(*sweep);
                std::string first;
                std::getline(in, first);
                const std::string tag = "# manifest_hash=";
                if (first.rfind(tag, 0) == 0) hash = first.substr(tag.size());
            }
            std::ofstream out = open_output(dest / "fig7_delta_alpha.tsv", hash,
                                            "thresh\tmethod\tseeds\tmean\tstd\tmean_shuffled\tstd_shuffled");
            for (const Fig7Row& r : aggregate(table, grid)) {
                out << short_double(r.thresh) << '\t' << method_name(r.method) << '\t' << r.seeds << '\t'
                    << format_double(r.mean) << '\t' << format_double(r.stddev) << '\t'
                    << format_double(r.mean_shuffled) << '\t' << format_double(r.stddev_shuffled) << '\n';
            }
        }
    }
    return errors;
}

void write_turns(const fs::path& path, std::span<const TurnRecord> turns, std::string_view manifest_hash) {
    std::ofstream out = open_output(path, manifest_hash,
                                    "turn\targmax_good\tv_max\tunits_produced\tmoney_supply\ttotal_trade_units\t"
                                    "exchanged_units_of_argmax\tswitch");
    for (const TurnRecord& t : turns) {
        const MoneyObservation& o = t.obs;
        out << o.turn << '\t' << o.argmax_good << '\t' << format_double(o.v_max) << '\t' << o.units_produced << '\t'
            << o.money_supply << '\t' << o.total_trade_units << '\t' << o.exchanged_units_of_argmax << '\t'
            << (t.switch_event ? 1 : 0) << '\n';
    }
}

void write_fluctuation(const fs::path& path, const FluctuationSet& set, std::string_view manifest_hash) {
    std::ofstream out = open_output(path, manifest_hash, "q\ts\tF_q");
    for (std::size_t iq = 0; iq < set.q.size(); ++iq) {
        for (std::size_t is = 0; is < set.scales.size(); ++is) {
            if (!std::isfinite(set.values[iq][is])) continue;
            out << short_double(set.q[iq]) << '\t' << set.scales[is] << '\t' << format_double(set.values[iq][is])
                << '\n';
        }
    }
}

void write_spectrum(const fs::path& path, const SingularitySpectrum& original, const SingularitySpectrum* shuffled,
                    std::string_view manifest_hash) {
    std::ofstream out = open_output(path, manifest_hash, "series\tq\talpha\tf");
    out << "# method=" << method_name(original.method) << '\n';
    auto dump = [&](const SingularitySpectrum& s, const char* label) {
        for (const SpectrumPoint& p : s.points) {
            out << label << '\t' << short_double(p.q) << '\t' << format_double(p.alpha) << '\t' << format_double(p.f)
                << '\n';
        }
    };
    dump(original, "original");
    if (shuffled != nullptr) dump(*shuffled, "shuffled");
}

void write_qualification(const fs::path& path, const LifetimeSeries& series, std::string_view manifest_hash) {
    std::ofstream out = open_output(path, manifest_hash, "event_index\tmoney_good\tqualifies");
    for (std::size_t i = 0; i < series.size(); ++i) {
        out << i << '\t' << series.money_good[i] << '\t' << (series.qualifies[i] ? 1 : 0) << '\n';
    }
}

void write_tau(const fs::path& path, const PartitionFunction& partition, std::string_view manifest_hash) {
    std::ofstream out = open_output(path, manifest_hash, "q\ttau\tr2");
    for (std::size_t i = 0; i < partition.q.size(); ++i) {
        out << short_double(partition.q[i]) << '\t' << format_double(partition.tau[i]) << '\t'
            << format_double(partition.r2[i]) << '\n';
    }
}

void write_field(const fs::path& path, const WaveletField& field, std::string_view manifest_hash) {
    std::ofstream out = open_output(path, manifest_hash, "s\tn\tT\tedge_free");
    for (std::size_t is = 0; is < field.scales.size(); ++is) {
        const auto [begin, end] = field.valid[is];
        for (std::size_t n = 0; n < field.values[is].size(); ++n) {
            out << format_double(field.scales[is]) << '\t' << n << '\t' << format_double(field.values[is][n]) << '\t'
                << (n >= begin && n < end ? 1 : 0) << '\n';
        }
    }
}

std::vector<double> read_series(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read series " + path.string());
    std::vector<double> out;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::istringstream fields(line);
        std::string field, last;
        while (fields >> field) last = field;
        if (last.empty()) continue;
        char* end = nullptr;
        const double v = std::strtod(last.c_str(), &end);
        if (end == last.c_str()) throw ConfigError("non-numeric value '" + last + "' in " + path.string());
        out.push_back(v);
    }
    return out;
}

} // namespace moneylife

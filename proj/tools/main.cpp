// moneylife: command-line front end for simulation, analysis and sweeps.
//
// Exit codes: 0 success, 1 configuration error, 2 under-sampled runs present,
// 3 analysis failure.

#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "moneylife/analysis.hpp"
#include "moneylife/errors.hpp"
#include "moneylife/harness.hpp"

namespace fs = std::filesystem;
using namespace moneylife;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitUnderSampled = 2;
constexpr int kExitAnalysis = 3;

// Flag values land here; only the flags actually given override the plan.
struct Flags {
    std::string config;
    std::size_t n_agents = 0;
    double thresh = 0.0;
    std::uint64_t seed = 0;
    std::uint64_t max_turns = 0;
    std::string demand_memory;
    std::vector<double> thresh_list;
    std::vector<std::uint64_t> seeds;
    std::size_t seed_count = 0;
    std::size_t min_lifetime_events = 0;
    std::string output_dir;
    std::size_t workers = 0;
    std::uint64_t fig1_turns = 0;
    bool no_field = false;
    unsigned poly_order = 0;
    std::vector<double> q_grid;
    std::vector<double> mfdfa_fit_range;
    std::vector<double> wtmm_fit_range;
    double link_window = 0.0;
    double edge_margin_factor = 0.0;
    std::size_t min_lines = 0;
    bool periodic = false;
};

struct Options {
    std::vector<std::pair<CLI::Option*, std::function<void(ExperimentPlan&)>>> apply;
};

std::string slurp(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config " + path.string());
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

std::pair<double, double> as_range(const std::vector<double>& v, const char* flag) {
    if (v.size() != 2 || !(v[0] > 0.0) || !(v[1] > v[0])) {
        throw ConfigError(std::string(flag) + " needs two increasing positive values");
    }
    return {v[0], v[1]};
}

// Registers the plan flags on `cmd`. `which` selects the groups that apply.
enum Groups : unsigned { kModel = 1, kSweep = 2, kMfdfa = 4, kWtmm = 8, kRun = 16 };

Options add_plan_flags(CLI::App* cmd, Flags& f, unsigned which) {
    Options o;
    auto add = [&](CLI::Option* opt, std::function<void(ExperimentPlan&)> fn) { o.apply.emplace_back(opt, fn); };
    cmd->add_option("--config", f.config, "JSON config file; flags given here override it");
    if (which & kModel) {
        add(cmd->add_option("--n-agents", f.n_agents, "number of agents and goods"),
            [&](ExperimentPlan& p) { p.base.n_agents = f.n_agents; });
        add(cmd->add_option("--thresh", f.thresh, "preference threshold"),
            [&](ExperimentPlan& p) { p.base.thresh = f.thresh; });
        add(cmd->add_option("--seed", f.seed, "RNG seed"), [&](ExperimentPlan& p) { p.base.seed = f.seed; });
        add(cmd->add_option("--max-turns", f.max_turns, "turn cap per run"),
            [&](ExperimentPlan& p) { p.base.max_turns = f.max_turns; });
        add(cmd->add_option("--demand-memory", f.demand_memory, "standing | exchanged-only")
                ->check(CLI::IsMember({"standing", "exchanged-only"})),
            [&](ExperimentPlan& p) {
                p.base.demand_memory =
                    f.demand_memory == "standing" ? DemandMemory::Standing : DemandMemory::ExchangedOnly;
            });
    }
    if (which & kRun) {
        add(cmd->add_option("--min-lifetime-events", f.min_lifetime_events, "stop after this many lifetimes"),
            [&](ExperimentPlan& p) { p.min_lifetime_events = f.min_lifetime_events; });
        add(cmd->add_option("--output-dir", f.output_dir, "output root (default $MONEYLIFE_OUTPUT_ROOT)"),
            [&](ExperimentPlan& p) { p.output_dir = f.output_dir; });
        add(cmd->add_option("--fig1-turns", f.fig1_turns, "rows of the per-turn table"),
            [&](ExperimentPlan& p) { p.fig1_turns = f.fig1_turns; });
        add(cmd->add_flag("--no-field", f.no_field, "skip the wavelet matrix dump"),
            [&](ExperimentPlan& p) { p.write_field = !f.no_field; });
    }
    if (which & kSweep) {
        add(cmd->add_option("--thresh-list", f.thresh_list, "thresholds to sweep")->delimiter(','),
            [&](ExperimentPlan& p) { p.thresh_list = f.thresh_list; });
        add(cmd->add_option("--seeds", f.seeds, "explicit seed list")->delimiter(','),
            [&](ExperimentPlan& p) { p.seeds = f.seeds; });
        add(cmd->add_option("--seed-count", f.seed_count, "use seeds 1..n"),
            [&](ExperimentPlan& p) { p.seeds = default_seeds(f.seed_count); });
        add(cmd->add_option("--workers", f.workers, "concurrent runs"),
            [&](ExperimentPlan& p) { p.workers = f.workers; });
    }
    if (which & (kMfdfa | kWtmm)) {
        add(cmd->add_option("--q-grid", f.q_grid, "moment orders")->delimiter(','), [&](ExperimentPlan& p) {
            p.mfdfa.q_grid = f.q_grid;
            p.wtmm.q_grid = f.q_grid;
        });
    }
    if (which & kMfdfa) {
        add(cmd->add_option("--poly-order", f.poly_order, "MFDFA detrending order"),
            [&](ExperimentPlan& p) { p.mfdfa.poly_order = f.poly_order; });
        add(cmd->add_option("--mfdfa-fit-range", f.mfdfa_fit_range, "MFDFA fit window lo,hi")->delimiter(','),
            [&](ExperimentPlan& p) { p.mfdfa.fit_range = as_range(f.mfdfa_fit_range, "--mfdfa-fit-range"); });
    }
    if (which & kWtmm) {
        add(cmd->add_option("--wtmm-fit-range", f.wtmm_fit_range, "WTMM fit window lo,hi")->delimiter(','),
            [&](ExperimentPlan& p) { p.wtmm.fit_range = as_range(f.wtmm_fit_range, "--wtmm-fit-range"); });
        add(cmd->add_option("--link-window", f.link_window, "maxima chaining window per unit scale"),
            [&](ExperimentPlan& p) { p.wtmm.link_window = f.link_window; });
        add(cmd->add_option("--edge-margin-factor", f.edge_margin_factor, "edge exclusion in multiples of s"),
            [&](ExperimentPlan& p) { p.wtmm.edge_margin_factor = f.edge_margin_factor; });
        add(cmd->add_option("--min-lines", f.min_lines, "minimum maxima lines per scale"),
            [&](ExperimentPlan& p) { p.wtmm.min_lines = f.min_lines; });
        add(cmd->add_flag("--periodic", f.periodic, "wrap the series around in the wavelet transform"),
            [&](ExperimentPlan& p) { p.wtmm.periodic = f.periodic; });
    }
    return o;
}

ExperimentPlan resolve(const Flags& f, const Options& o) {
    ExperimentPlan plan;
    plan.seeds = default_seeds();
    plan.output_dir = default_output_root();
    if (!f.config.empty()) merge_plan_json(plan, slurp(f.config));
    for (const auto& [opt, fn] : o.apply) {
        if (opt->count() > 0) fn(plan);
    }
    return plan;
}

void print_spectrum_summary(const char* label, const SingularitySpectrum& s) {
    std::printf("%s: delta_alpha=%.4f alpha_at_max_f=%.4f points=%zu\n", label, s.width(), s.alpha_at_max_f(),
                s.points.size());
}

int report_manifest(const RunManifest& m) {
    std::printf("run %s: turns=%llu lifetimes=%zu dir=%s\n", m.hash().c_str(),
                static_cast<unsigned long long>(m.turns), m.lifetime_count, m.plan.output_dir.string().c_str());
    for (const auto& w : m.warnings) std::fprintf(stderr, "warning: %s\n", w.c_str());
    if (m.analysis_error) {
        std::fprintf(stderr, "analysis failed: %s\n", m.analysis_error->c_str());
        return kExitAnalysis;
    }
    return m.under_sampled ? kExitUnderSampled : kExitOk;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Money emergence in a commodity exchange model, with MFDFA and WTMM analysis"};
    app.require_subcommand(1);

    Flags f;
    auto* simulate_cmd = app.add_subcommand("simulate", "one (thresh, seed) run: simulate, analyze, write files");
    const Options simulate_opts = add_plan_flags(simulate_cmd, f, kModel | kRun | kMfdfa | kWtmm);

    std::string input, output;
    std::uint64_t shuffle_seed = 1;
    auto* mfdfa_cmd = app.add_subcommand("analyze-mfdfa", "MFDFA of a series file");
    const Options mfdfa_opts = add_plan_flags(mfdfa_cmd, f, kMfdfa);
    mfdfa_cmd->add_option("--input", input, "series file (last column used)")->required();
    mfdfa_cmd->add_option("--output", output, "directory for fluct and spectrum tables");
    mfdfa_cmd->add_option("--shuffle-seed", shuffle_seed, "seed of the shuffled surrogate");

    auto* wtmm_cmd = app.add_subcommand("analyze-wtmm", "WTMM of a series file");
    const Options wtmm_opts = add_plan_flags(wtmm_cmd, f, kWtmm);
    wtmm_cmd->add_option("--input", input, "series file (last column used)")->required();
    wtmm_cmd->add_option("--output", output, "directory for tau, spectrum and field tables");
    wtmm_cmd->add_option("--shuffle-seed", shuffle_seed, "seed of the shuffled surrogate");
    bool no_field = false;
    wtmm_cmd->add_flag("--no-field", no_field, "skip the wavelet matrix dump");

    auto* sweep_cmd = app.add_subcommand("sweep", "Thresh x seed ensemble with both estimators");
    const Options sweep_opts = add_plan_flags(sweep_cmd, f, kModel | kRun | kSweep | kMfdfa | kWtmm);

    std::string kind = "fgn";
    std::size_t length = 1 << 16;
    unsigned levels = 16;
    double hurst = 0.5, p = 0.6;
    std::uint64_t oracle_seed = 1;
    auto* oracle_cmd = app.add_subcommand("gen-oracle", "synthetic series with known exponents");
    oracle_cmd->add_option("--kind", kind, "fgn | cascade")->check(CLI::IsMember({"fgn", "cascade"}));
    oracle_cmd->add_option("--length", length, "fgn length");
    oracle_cmd->add_option("--hurst", hurst, "fgn Hurst exponent");
    oracle_cmd->add_option("--levels", levels, "cascade levels");
    oracle_cmd->add_option("--p", p, "cascade weight of the left child");
    oracle_cmd->add_option("--seed", oracle_seed, "fgn seed");
    oracle_cmd->add_option("--output", output, "output file (stdout if omitted)");

    std::string run_dir, sweep_file, dest;
    auto* export_cmd = app.add_subcommand("export", "figure-keyed data files from run outputs");
    export_cmd->add_option("--run-dir", run_dir, "run directory (thresh_<t>/seed_<s>)")->required();
    export_cmd->add_option("--sweep", sweep_file, "sweep.tsv for the fig7 table");
    export_cmd->add_option("--dest", dest, "destination directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitConfig;
    }

    try {
        if (simulate_cmd->parsed()) {
            const ExperimentPlan plan = resolve(f, simulate_opts);
            validate(plan);
            return report_manifest(run_single(plan, plan.base.thresh, plan.base.seed));
        }
        if (mfdfa_cmd->parsed()) {
            const ExperimentPlan plan = resolve(f, mfdfa_opts);
            const std::vector<double> x = read_series(input);
            const MfdfaResult r = run_mfdfa(x, plan.mfdfa);
            const MfdfaResult s = run_mfdfa(shuffle(x, shuffle_seed), plan.mfdfa);
            std::printf("h(2)=%.4f r2=%.4f\n", r.hurst.at(2.0), r.hurst.r2_at(2.0));
            print_spectrum_summary("original", r.spectrum);
            print_spectrum_summary("shuffled", s.spectrum);
            for (const auto& w : r.spectrum.warnings) std::fprintf(stderr, "warning: %s\n", w.c_str());
            if (!output.empty()) {
                write_fluctuation(fs::path(output) / "mfdfa_fluct.tsv", r.fluctuation, "-");
                write_spectrum(fs::path(output) / "mfdfa_spectrum.tsv", r.spectrum, &s.spectrum, "-");
            }
            return kExitOk;
        }
        if (wtmm_cmd->parsed()) {
            const ExperimentPlan plan = resolve(f, wtmm_opts);
            const std::vector<double> x = read_series(input);
            const WtmmResult r = run_wtmm(x, plan.wtmm);
            const WtmmResult s = run_wtmm(shuffle(x, shuffle_seed), plan.wtmm);
            std::printf("tau(-2)=%.4f tau(0)=%.4f tau(2)=%.4f lines=%zu\n", r.partition.tau_at(-2.0),
                        r.partition.tau_at(0.0), r.partition.tau_at(2.0), r.lines.size());
            print_spectrum_summary("original", r.spectrum);
            print_spectrum_summary("shuffled", s.spectrum);
            for (const auto& w : r.spectrum.warnings) std::fprintf(stderr, "warning: %s\n", w.c_str());
            if (!output.empty()) {
                write_tau(fs::path(output) / "wtmm_tau.tsv", r.partition, "-");
                write_spectrum(fs::path(output) / "wtmm_spectrum.tsv", r.spectrum, &s.spectrum, "-");
                if (!no_field) write_field(fs::path(output) / "wtmm_field.tsv", r.field, "-");
            }
            return kExitOk;
        }
        if (sweep_cmd->parsed()) {
            const ExperimentPlan plan = resolve(f, sweep_opts);
            validate(plan);
            const SweepTable table = run_sweep(plan, [](const RunManifest& m) {
                std::fprintf(stderr, "done thresh=%g seed=%llu lifetimes=%zu turns=%llu%s\n", m.plan.base.thresh,
                             static_cast<unsigned long long>(m.plan.base.seed), m.lifetime_count,
                             static_cast<unsigned long long>(m.turns), m.under_sampled ? " (under-sampled)" : "");
            });
            for (const Fig7Row& r : aggregate(table, plan.thresh_list)) {
                std::printf("thresh=%g %s delta_alpha=%.4f+-%.4f shuffled=%.4f seeds=%zu\n", r.thresh,
                            std::string(method_name(r.method)).c_str(), r.mean, r.stddev, r.mean_shuffled, r.seeds);
            }
            for (const auto& e : table.failures) std::fprintf(stderr, "failed: %s\n", e.c_str());
            if (table.any_failure()) return kExitAnalysis;
            return table.any_under_sampled() ? kExitUnderSampled : kExitOk;
        }
        if (oracle_cmd->parsed()) {
            const std::vector<double> x =
                kind == "fgn" ? gen_fgn(length, hurst, oracle_seed) : gen_binomial_cascade(levels, p);
            std::ofstream file;
            if (!output.empty()) {
                file.open(output);
                if (!file) throw ConfigError("cannot write " + output);
            }
            std::ostream& out = output.empty() ? std::cout : file;
            if (kind == "fgn") {
                out << "# kind=fgn\tlength=" << length << "\thurst=" << hurst << "\tseed=" << oracle_seed << '\n';
            } else {
                out << "# kind=cascade\tlevels=" << levels << "\tp=" << p << '\n';
            }
            char buf[32];
            for (double v : x) {
                std::snprintf(buf, sizeof buf, "%.17g\n", v);
                out << buf;
            }
            return kExitOk;
        }
        if (export_cmd->parsed()) {
            std::optional<fs::path> sweep;
            if (!sweep_file.empty()) sweep = sweep_file;
            const std::vector<std::string> errors = export_figures(run_dir, dest, sweep);
            for (const auto& e : errors) std::fprintf(stderr, "error: %s\n", e.c_str());
            return errors.empty() ? kExitOk : kExitConfig;
        }
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "configuration error: %s\n", e.what());
        return kExitConfig;
    } catch (const AnalysisError& e) {
        std::fprintf(stderr, "analysis error: %s\n", e.what());
        return kExitAnalysis;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitAnalysis;
    }
    return kExitOk;
}

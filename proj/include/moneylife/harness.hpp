#pragma once

// Experiment orchestration: single runs, Thresh sweeps over seed ensembles,
// per-run manifests and the tab-separated data files behind each figure.
//
// Run directory layout (all files tab-separated, '#' header lines first):
//   <output>/thresh_<t>/seed_<s>/
//     manifest.json          resolved plan entry, version, stage paths, timings
//     turns.tsv              per-turn observables for the first fig1_turns turns
//     lifetimes.tsv          lifetime series
//     lifetime_qualification.tsv  (event_index, money_good, qualifies) per lifetime
//     mfdfa_fluct.tsv        (q, s, F_q)
//     mfdfa_spectrum.tsv     (alpha, f) for original and shuffled series
//     wtmm_tau.tsv           (q, tau, r2)
//     wtmm_spectrum.tsv      (alpha, f) for original and shuffled series
//     wtmm_field.tsv         (s, n, T) matrix of the original series

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "moneylife/mfdfa.hpp"
#include "moneylife/model.hpp"
#include "moneylife/observer.hpp"
#include "moneylife/wtmm.hpp"

namespace moneylife {

inline constexpr std::string_view kVersionTag = "moneylife-1.0.0";
// Environment variable naming the default output root.
inline constexpr const char* kOutputRootEnv = "MONEYLIFE_OUTPUT_ROOT";

struct ExperimentPlan {
    ModelConfig base;
    std::vector<double> thresh_list{1.0, 1.5, 2.0, 2.5, 3.0, 3.5};
    std::vector<std::uint64_t> seeds;
    std::size_t min_lifetime_events = 1024;
    MfdfaConfig mfdfa;
    WtmmConfig wtmm;
    std::filesystem::path output_dir;
    std::size_t workers = 1;
    // Rows of turns.tsv.
    std::uint64_t fig1_turns = 10'000;
    // Write the (s, n, T) matrix; it is the largest file of a run.
    bool write_field = true;
};

// Seeds 1..count.
std::vector<std::uint64_t> default_seeds(std::size_t count = 20);

// $MONEYLIFE_OUTPUT_ROOT, or ./moneylife-out.
std::filesystem::path default_output_root();

// Throws ConfigError: empty thresh_list, thresh outside [0, N], fewer than 256
// target events, invalid base model config.
void validate(const ExperimentPlan& plan);

// JSON with kebab-case keys mirroring the CLI flags. Missing keys keep the
// values already in `into`.
std::string plan_to_json(const ExperimentPlan& plan);
void merge_plan_json(ExperimentPlan& into, std::string_view json);

struct StageRecord {
    std::string name;
    std::filesystem::path path;
    double seconds = 0.0;
};

struct RunManifest {
    ExperimentPlan plan;  // base.thresh and base.seed hold this run's values
    std::string version{kVersionTag};
    std::uint64_t shuffle_seed = 0;
    std::vector<StageRecord> stages;
    std::uint64_t turns = 0;
    std::size_t lifetime_count = 0;
    // Lifetimes whose interval meets the money conditions; all lifetimes are
    // analyzed regardless.
    std::size_t qualifying_count = 0;
    bool under_sampled = false;
    std::vector<std::string> warnings;
    std::optional<std::string> analysis_error;

    // FNV-1a over the resolved configuration (no timings), hex.
    std::string hash() const;
    std::string to_json() const;
};

RunManifest read_manifest(const std::filesystem::path& path);

// Per-turn observables written to turns.tsv.
struct TurnRecord {
    MoneyObservation obs;
    bool switch_event = false;
};

struct SimulationOutput {
    LifetimeSeries lifetimes;
    std::vector<TurnRecord> turns;  // first `keep_turns` turns
    std::uint64_t turns_run = 0;
    bool under_sampled = false;
};

// Below this many lifetimes at max_turns a run is under-sampled.
inline constexpr std::size_t kUnderSampledEvents = 256;

// Runs turns until `target_events` lifetimes are closed or max_turns is hit.
SimulationOutput simulate(const ModelConfig& config, std::size_t target_events, std::uint64_t keep_turns);

struct SeriesAnalysis {
    std::optional<MfdfaResult> mfdfa;
    std::optional<WtmmResult> wtmm;
    std::optional<std::string> mfdfa_error;
    std::optional<std::string> wtmm_error;
};

struct RunAnalysis {
    SeriesAnalysis original;
    SeriesAnalysis shuffled;
};

// Both estimators on the series and on one shuffled surrogate. Estimator
// failures are captured, not thrown.
RunAnalysis analyze_series(std::span<const double> series, const ExperimentPlan& plan,
                           std::uint64_t shuffle_seed);

// Surrogate seed for a run; fixed so manifests replay.
std::uint64_t shuffle_seed_for(std::uint64_t seed, double thresh);

// Simulates, analyzes and writes one (thresh, seed) run directory.
RunManifest run_single(const ExperimentPlan& plan, double thresh, std::uint64_t seed);

std::filesystem::path run_directory(const ExperimentPlan& plan, double thresh, std::uint64_t seed);

struct SweepRow {
    double thresh = 0.0;
    std::uint64_t seed = 0;
    Method method = Method::Mfdfa;
    // NaN when the estimator failed.
    double delta_alpha = 0.0;
    double delta_alpha_shuffled = 0.0;
    double alpha_at_max_f = 0.0;
    double alpha_at_max_f_shuffled = 0.0;
    // r^2 of the q = 2 fit (MFDFA) or of tau(2) (WTMM).
    double r2_q2 = 0.0;
    // max h(q) - min h(q) over the q grid; MFDFA only.
    double h_range = 0.0;
    // Decades spanned by the fit window.
    double fit_decades = 0.0;
    std::size_t lifetime_count = 0;
    std::uint64_t median_lifetime = 0;
    std::uint64_t max_lifetime = 0;
    bool under_sampled = false;
    std::string error;
};

struct SweepTable {
    std::vector<SweepRow> rows;
    std::vector<std::string> failures;

    bool any_under_sampled() const;
    bool any_failure() const;
};

// All (thresh, seed) runs, up to plan.workers at a time. A failing run is
// reported in `failures` and the sweep carries on. `progress` is called once
// per finished run.
SweepTable run_sweep(const ExperimentPlan& plan,
                     const std::function<void(const RunManifest&)>& progress = {});

void write_sweep(const std::filesystem::path& path, const SweepTable& table, std::string_view manifest_hash);
SweepTable read_sweep(const std::filesystem::path& path);

struct Fig7Row {
    double thresh = 0.0;
    Method method = Method::Mfdfa;
    std::size_t seeds = 0;
    double mean = 0.0;
    double stddev = 0.0;
    double mean_shuffled = 0.0;
    double stddev_shuffled = 0.0;
};

// Seed-mean and sample std of delta alpha per (thresh, method), failed runs
// skipped. One row per pair even if no seed succeeded (NaN moments).
std::vector<Fig7Row> aggregate(const SweepTable& table, std::span<const double> thresh_list);

// Copies stage outputs of one run into figure-keyed files under `dest`
// (fig1_turns.tsv, fig2_lifetimes.tsv, fig3_fluctuation.tsv,
// fig4_mfdfa_spectrum.tsv, fig5_wavelet.tsv, fig6_wtmm_spectrum.tsv) and, when
// `sweep` is given, fig7_delta_alpha.tsv. Returns one message per missing
// input; present files are still exported.
std::vector<std::string> export_figures(const std::filesystem::path& run_dir, const std::filesystem::path& dest,
                                        const std::optional<std::filesystem::path>& sweep = std::nullopt,
                                        std::span<const double> thresh_list = {});

// Writers used by run_single and the CLI. Each begins with '#' header lines.
void write_turns(const std::filesystem::path& path, std::span<const TurnRecord> turns,
                 std::string_view manifest_hash);
void write_fluctuation(const std::filesystem::path& path, const FluctuationSet& set,
                       std::string_view manifest_hash);
void write_spectrum(const std::filesystem::path& path, const SingularitySpectrum& original,
                    const SingularitySpectrum* shuffled, std::string_view manifest_hash);
void write_qualification(const std::filesystem::path& path, const LifetimeSeries& series,
                         std::string_view manifest_hash);
void write_tau(const std::filesystem::path& path, const PartitionFunction& partition,
               std::string_view manifest_hash);
void write_field(const std::filesystem::path& path, const WaveletField& field, std::string_view manifest_hash);

// One column of numbers, '#' lines and blanks skipped; the last column of
// multi-column rows is used.
std::vector<double> read_series(const std::filesystem::path& path);

} // namespace moneylife

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "moneylife/errors.hpp"
#include "moneylife/harness.hpp"

using namespace moneylife;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        std::random_device rd;
        path = fs::temp_directory_path() / ("moneylife-test-" + std::to_string(rd()) + std::to_string(rd()));
        fs::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path, ec);
    }
};

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

std::size_t data_rows(const fs::path& p) {
    std::ifstream in(p);
    std::size_t n = 0;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line[0] != '#') ++n;
    }
    return n;
}

ExperimentPlan small_plan(const fs::path& out) {
    ExperimentPlan plan;
    plan.base.max_turns = 50'000;
    plan.thresh_list = {2.5, 3.0};
    plan.seeds = {1, 2};
    plan.min_lifetime_events = 256;
    plan.output_dir = out;
    plan.fig1_turns = 500;
    return plan;
}

} // namespace

TEST_CASE("plan JSON round trip") {
    ExperimentPlan a;
    a.base.n_agents = 30;
    a.base.thresh = 1.75;
    a.base.demand_memory = DemandMemory::ExchangedOnly;
    a.seeds = {4, 9};
    a.thresh_list = {1.0, 2.0};
    a.mfdfa.poly_order = 3;
    a.mfdfa.fit_range = std::pair{20.0, 400.0};
    a.wtmm.link_window = 1.5;
    a.wtmm.periodic = true;
    a.output_dir = "/tmp/x";
    ExperimentPlan b;
    merge_plan_json(b, plan_to_json(a));
    CHECK(plan_to_json(b) == plan_to_json(a));
    CHECK(b.base.demand_memory == DemandMemory::ExchangedOnly);
    CHECK(b.mfdfa.fit_range->second == 400.0);
}

TEST_CASE("partial JSON keeps other values") {
    ExperimentPlan p;
    p.base.seed = 77;
    merge_plan_json(p, R"({"thresh": 3.0, "wtmm": {"min-lines": 5}})");
    CHECK(p.base.thresh == 3.0);
    CHECK(p.base.seed == 77);
    CHECK(p.wtmm.min_lines == 5);
    CHECK(p.wtmm.link_window == 1.0);
    CHECK_THROWS_AS(merge_plan_json(p, "{nope"), ConfigError);
    CHECK_THROWS_AS(merge_plan_json(p, R"({"thresh": "high"})"), ConfigError);
    CHECK_THROWS_AS(merge_plan_json(p, R"({"demand-memory": "sometimes"})"), ConfigError);
}

TEST_CASE("plan validation") {
    ExperimentPlan p;
    p.seeds = default_seeds(3);
    CHECK_NOTHROW(validate(p));
    p.thresh_list = {};
    CHECK_THROWS_AS(validate(p), ConfigError);
    p.thresh_list = {60.0};
    CHECK_THROWS_AS(validate(p), ConfigError);
    p.thresh_list = {2.5};
    p.min_lifetime_events = 100;
    CHECK_THROWS_AS(validate(p), ConfigError);
    p.min_lifetime_events = 1024;
    p.wtmm.edge_margin_factor = 1.0;
    CHECK_THROWS_AS(validate(p), ConfigError);
    p.wtmm.edge_margin_factor = 3.0;
    p.base.n_agents = 2;
    CHECK_THROWS_AS(validate(p), ConfigError);
}

TEST_CASE("hash ignores location and parallelism only") {
    RunManifest a;
    a.plan.seeds = {1};
    RunManifest b = a;
    b.plan.output_dir = "/elsewhere";
    b.plan.workers = 8;
    CHECK(a.hash() == b.hash());
    b.plan.base.thresh = 2.0;
    CHECK(a.hash() != b.hash());
    RunManifest c = a;
    c.shuffle_seed = 5;
    CHECK(a.hash() != c.hash());
}

TEST_CASE("shuffle seeds differ across runs") {
    CHECK(shuffle_seed_for(1, 2.5) == shuffle_seed_for(1, 2.5));
    CHECK(shuffle_seed_for(1, 2.5) != shuffle_seed_for(2, 2.5));
    CHECK(shuffle_seed_for(1, 2.5) != shuffle_seed_for(1, 3.0));
}

TEST_CASE("simulate stops at the target or the turn cap") {
    ModelConfig cfg;
    cfg.thresh = 3.0;
    cfg.max_turns = 100'000;
    const SimulationOutput a = simulate(cfg, 300, 10);
    CHECK(a.lifetimes.size() == 300);
    CHECK(a.turns.size() == 10);
    CHECK_FALSE(a.under_sampled);
    cfg.max_turns = 50;
    const SimulationOutput b = simulate(cfg, 300, 1000);
    CHECK(b.turns_run == 50);
    CHECK(b.turns.size() == 50);
    CHECK(b.under_sampled);
}

TEST_CASE("single run writes every stage and replays byte for byte") {
    TempDir tmp;
    ExperimentPlan plan = small_plan(tmp.path / "a");
    const RunManifest m = run_single(plan, 2.5, 3);
    const fs::path dir = run_directory(plan, 2.5, 3);
    for (const char* f : {"manifest.json", "turns.tsv", "lifetimes.tsv", "lifetime_qualification.tsv", "mfdfa_fluct.tsv", "mfdfa_spectrum.tsv",
                          "wtmm_tau.tsv", "wtmm_spectrum.tsv", "wtmm_field.tsv"}) {
        CHECK_MESSAGE(fs::exists(dir / f), f);
    }
    CHECK(m.lifetime_count == 256);
    CHECK(data_rows(dir / "lifetimes.tsv") == m.lifetime_count);
    CHECK(data_rows(dir / "lifetime_qualification.tsv") == m.lifetime_count);
    CHECK(m.qualifying_count <= m.lifetime_count);
    CHECK(data_rows(dir / "turns.tsv") == 500);
    CHECK(slurp(dir / "lifetimes.tsv").find("manifest_hash=" + m.hash()) != std::string::npos);

    const RunManifest back = read_manifest(dir / "manifest.json");
    CHECK(back.hash() == m.hash());
    CHECK(back.lifetime_count == m.lifetime_count);
    CHECK(back.qualifying_count == m.qualifying_count);

    plan.output_dir = tmp.path / "b";
    const RunManifest again = run_single(plan, 2.5, 3);
    CHECK(again.hash() == m.hash());
    const fs::path dir2 = run_directory(plan, 2.5, 3);
    for (const char* f : {"turns.tsv", "lifetimes.tsv", "mfdfa_fluct.tsv", "mfdfa_spectrum.tsv", "wtmm_tau.tsv",
                          "wtmm_spectrum.tsv", "wtmm_field.tsv"}) {
        CHECK_MESSAGE(slurp(dir / f) == slurp(dir2 / f), f);
    }
}

TEST_CASE("replaying from a manifest reproduces the run") {
    TempDir tmp;
    ExperimentPlan plan = small_plan(tmp.path / "a");
    plan.write_field = false;
    const RunManifest m = run_single(plan, 3.0, 1);
    const fs::path dir = run_directory(plan, 3.0, 1);

    ExperimentPlan replay;
    merge_plan_json(replay, slurp(dir / "manifest.json"));
    replay.output_dir = tmp.path / "replay";
    const RunManifest r = run_single(replay, replay.base.thresh, replay.base.seed);
    CHECK(r.hash() == m.hash());
    CHECK(slurp(run_directory(replay, 3.0, 1) / "lifetimes.tsv") == slurp(dir / "lifetimes.tsv"));
    CHECK_FALSE(fs::exists(dir / "wtmm_field.tsv"));
}

TEST_CASE("sweep table, fig7 aggregation and export") {
    TempDir tmp;
    ExperimentPlan plan = small_plan(tmp.path / "sweep");
    plan.write_field = false;
    plan.workers = 2;
    std::size_t progress_calls = 0;
    const SweepTable t = run_sweep(plan, [&](const RunManifest&) { ++progress_calls; });
    CHECK(progress_calls == 4);
    CHECK(t.failures.empty());
    REQUIRE(t.rows.size() == 8);
    CHECK(t.rows[0].thresh == 2.5);
    CHECK(t.rows[0].seed == 1);
    CHECK(t.rows[0].method == Method::Mfdfa);
    CHECK(t.rows[1].method == Method::Wtmm);
    CHECK(t.rows[7].thresh == 3.0);
    for (const SweepRow& r : t.rows) CHECK(r.lifetime_count == 256);

    const SweepTable back = read_sweep(plan.output_dir / "sweep.tsv");
    REQUIRE(back.rows.size() == t.rows.size());
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
        CHECK(back.rows[i].seed == t.rows[i].seed);
        CHECK(back.rows[i].median_lifetime == t.rows[i].median_lifetime);
        if (std::isfinite(t.rows[i].delta_alpha)) CHECK(back.rows[i].delta_alpha == t.rows[i].delta_alpha);
    }

    const auto fig7 = aggregate(t, plan.thresh_list);
    CHECK(fig7.size() == plan.thresh_list.size() * 2);
    CHECK(data_rows(plan.output_dir / "fig7_delta_alpha.tsv") == fig7.size());

    const fs::path dest = tmp.path / "figs";
    const auto missing = export_figures(run_directory(plan, 2.5, 1), dest, plan.output_dir / "sweep.tsv",
                                        plan.thresh_list);
    // The field was not written; everything else is present.
    REQUIRE(missing.size() == 1);
    CHECK(missing[0].rfind("fig5", 0) == 0);
    CHECK(data_rows(dest / "fig2_lifetimes.tsv") == 256);
    CHECK(read_series(dest / "fig2_lifetimes.tsv").size() == 256);
    CHECK(data_rows(dest / "fig7_delta_alpha.tsv") == 4);
}

TEST_CASE("aggregate moments") {
    SweepTable t;
    for (int i = 0; i < 3; ++i) {
        SweepRow r;
        r.thresh = 1.0;
        r.seed = static_cast<std::uint64_t>(i);
        r.delta_alpha = 1.0 + i;
        r.delta_alpha_shuffled = 0.5;
        t.rows.push_back(r);
    }
    t.rows[2].delta_alpha = std::nan("");
    const std::vector<double> grid{1.0, 2.0};
    const auto rows = aggregate(t, grid);
    REQUIRE(rows.size() == 4);
    CHECK(rows[0].seeds == 2);
    CHECK(rows[0].mean == doctest::Approx(1.5));
    CHECK(rows[0].stddev == doctest::Approx(std::sqrt(0.5)));
    CHECK(rows[0].mean_shuffled == doctest::Approx(0.5));
    CHECK(rows[1].seeds == 0);
    CHECK(std::isnan(rows[2].mean));
}

TEST_CASE("export reports missing inputs") {
    TempDir tmp;
    const auto missing = export_figures(tmp.path / "nothing", tmp.path / "out", tmp.path / "no_sweep.tsv");
    CHECK(missing.size() == 7);
}

TEST_CASE("read_series") {
    TempDir tmp;
    const fs::path p = tmp.path / "s.tsv";
    std::ofstream(p) << "# header\n1\t5\n\n2\t7.5\n3 -1e2\n";
    CHECK(read_series(p) == std::vector<double>{5, 7.5, -100});
    std::ofstream(p) << "1\tabc\n";
    CHECK_THROWS_AS(read_series(p), ConfigError);
    CHECK_THROWS_AS(read_series(tmp.path / "absent"), ConfigError);
}

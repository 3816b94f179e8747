#include <doctest.h>

#include <cmath>
#include <numeric>

#include "moneylife/errors.hpp"
#include "moneylife/mfdfa.hpp"
#include "moneylife/rng.hpp"

using namespace moneylife;

namespace {

// Mean squared residual of an order-m least-squares fit, by normal equations
// in long double on t = 0..n-1.
double lsq_residual(const std::vector<double>& y, unsigned m) {
    const std::size_t n = y.size(), k = m + 1;
    std::vector<long double> a(k * k, 0), b(k, 0);
    const long double c = (n - 1) / 2.0L;
    for (std::size_t i = 0; i < n; ++i) {
        const long double t = (static_cast<long double>(i) - c) / c;
        std::vector<long double> pw(k);
        pw[0] = 1;
        for (std::size_t j = 1; j < k; ++j) pw[j] = pw[j - 1] * t;
        for (std::size_t r = 0; r < k; ++r) {
            b[r] += pw[r] * y[i];
            for (std::size_t col = 0; col < k; ++col) a[r * k + col] += pw[r] * pw[col];
        }
    }
    // Gaussian elimination with partial pivoting.
    for (std::size_t col = 0; col < k; ++col) {
        std::size_t piv = col;
        for (std::size_t r = col + 1; r < k; ++r) {
            if (std::abs(a[r * k + col]) > std::abs(a[piv * k + col])) piv = r;
        }
        for (std::size_t j = 0; j < k; ++j) std::swap(a[col * k + j], a[piv * k + j]);
        std::swap(b[col], b[piv]);
        for (std::size_t r = col + 1; r < k; ++r) {
            const long double f = a[r * k + col] / a[col * k + col];
            for (std::size_t j = col; j < k; ++j) a[r * k + j] -= f * a[col * k + j];
            b[r] -= f * b[col];
        }
    }
    std::vector<long double> coef(k);
    for (std::size_t r = k; r-- > 0;) {
        long double acc = b[r];
        for (std::size_t j = r + 1; j < k; ++j) acc -= a[r * k + j] * coef[j];
        coef[r] = acc / a[r * k + r];
    }
    long double ss = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const long double t = (static_cast<long double>(i) - c) / c;
        long double fit = 0, pw = 1;
        for (std::size_t j = 0; j < k; ++j, pw *= t) fit += coef[j] * pw;
        ss += (y[i] - fit) * (y[i] - fit);
    }
    return static_cast<double>(ss / n);
}

std::vector<double> white_noise(std::size_t n, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<double> x(n);
    for (double& v : x) {
        const double u1 = 1.0 - rng.uniform(), u2 = rng.uniform();
        v = std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
    }
    return x;
}

std::vector<std::size_t> dyadic(std::size_t lo, std::size_t hi) {
    std::vector<std::size_t> s;
    for (std::size_t v = lo; v <= hi; v *= 2) s.push_back(v);
    return s;
}

} // namespace

TEST_CASE("profile") {
    CHECK(profile(std::vector<double>{1, 2, 3}) == std::vector<double>{-1, -1, 0});
    CHECK_THROWS_AS(profile(std::vector<double>{2, 2, 2, 2}), DegenerateInputError);
    CHECK_THROWS_AS(profile(std::vector<double>{}), DegenerateInputError);
    const auto x = white_noise(1 << 16, 1);
    const auto y = profile(x);
    double max_abs = 0;
    for (double v : x) max_abs = std::max(max_abs, std::abs(v));
    CHECK(std::abs(y.back()) <= 1e-9 * x.size() * max_abs);
}

TEST_CASE("window counts come from both ends") {
    std::vector<double> y(100);
    Rng rng(1);
    for (double& v : y) v = rng.uniform();
    const SegmentVariances v = segment_variance(y, 30, 2);
    CHECK(v.segment_count() == 6);
    CHECK(v.excluded_count == 0);
    // The first window from the start and the first from the end differ
    // because 100 is not a multiple of 30.
    CHECK(v.f2[0] != v.f2[3]);
    CHECK_THROWS_AS(segment_variance(y, 3, 2), ConfigError);
}

TEST_CASE("detrending matches a normal-equations oracle") {
    Rng rng(4);
    for (unsigned m : {1u, 2u, 3u, 4u}) {
        for (std::size_t s : {8u, 17u, 64u, 333u}) {
            std::vector<double> y(4 * s);
            double walk = 0;
            for (double& v : y) v = (walk += rng.uniform() - 0.5);
            const SegmentVariances sv = segment_variance(y, s, m);
            for (std::size_t w = 0; w < 4; ++w) {
                std::vector<double> window(y.begin() + w * s, y.begin() + (w + 1) * s);
                CHECK(sv.f2[w] == doctest::Approx(lsq_residual(window, m)).epsilon(1e-9));
            }
        }
    }
}

TEST_CASE("exact polynomial profile leaves nothing: all windows excluded") {
    std::vector<double> y(256);
    for (std::size_t i = 0; i < y.size(); ++i) {
        const double t = static_cast<double>(i);
        y[i] = 3.0 - 0.5 * t + 0.01 * t * t;
    }
    const SegmentVariances v = segment_variance(y, 32, 2);
    CHECK(v.excluded_count == v.segment_count());
    CHECK_FALSE(fluctuation_function(v, 2.0).has_value());
}

TEST_CASE("linear trend plus unit noise gives unit variance per window") {
    const auto noise = white_noise(64 * 32, 6);
    std::vector<double> y(noise.size());
    for (std::size_t i = 0; i < y.size(); ++i) y[i] = 5.0 + 0.3 * static_cast<double>(i) + noise[i];
    const SegmentVariances v = segment_variance(y, 32, 2);
    std::size_t within = 0;
    double mean = 0;
    for (double f2 : v.f2) {
        within += std::abs(f2 - 1.0) <= 0.5 ? 1 : 0;
        mean += f2;
    }
    mean /= static_cast<double>(v.f2.size());
    // Residual variance of a 3-parameter fit on 32 points is 29/32 of sigma^2.
    CHECK(mean == doctest::Approx(29.0 / 32.0).epsilon(0.1));
    CHECK(static_cast<double>(within) / v.f2.size() >= 0.9);
}

TEST_CASE("fluctuation function moments") {
    SegmentVariances v;
    v.scale = 16;
    v.f2 = {4, 4, 4, 4};
    v.excluded = {false, false, false, false};
    for (double q : {-4.0, -1.0, 0.0, 0.5, 2.0, 4.0}) CHECK(*fluctuation_function(v, q) == doctest::Approx(2.0));

    v.f2 = {1, 4, 9, 16, 0};
    v.excluded = {false, false, false, false, true};
    v.excluded_count = 1;
    CHECK(*fluctuation_function(v, 2.0) == doctest::Approx(std::sqrt(7.5)));
    CHECK(*fluctuation_function(v, 0.0) == doctest::Approx(std::pow(1.0 * 2 * 3 * 4, 0.25)));
    // Large |q| must not overflow.
    v.f2 = {1e-200, 1e200, 1.0, 1.0};
    v.excluded = {false, false, false, false};
    v.excluded_count = 0;
    CHECK(std::isfinite(*fluctuation_function(v, 4.0)));
    CHECK(std::isfinite(*fluctuation_function(v, -4.0)));
}

TEST_CASE("generalized Hurst on an exact power law") {
    FluctuationSet set;
    set.q = {-2, 0, 2};
    set.scales = {16, 32, 64, 128, 256, 512, 1024};
    for (double q : set.q) {
        std::vector<double> row;
        for (std::size_t s : set.scales) row.push_back(std::pow(static_cast<double>(s), 0.5 + 0.01 * q));
        set.values.push_back(row);
    }
    const GeneralizedHurst h = generalized_hurst(set);
    CHECK(h.at(2.0) == doctest::Approx(0.52).epsilon(1e-12));
    CHECK(h.at(-2.0) == doctest::Approx(0.48).epsilon(1e-12));
    CHECK(h.r2_at(0.0) == doctest::Approx(1.0));
    CHECK(h.warnings.empty());
    CHECK_THROWS_AS(generalized_hurst(set, std::pair<double, double>{16, 128}), AnalysisError);
}

TEST_CASE("spectrum of constant and linear h(q)") {
    GeneralizedHurst h;
    h.q = q_range(-4, 4, 0.25);
    h.h.assign(h.q.size(), 0.7);
    SingularitySpectrum s = spectrum_from_h(h);
    CHECK(s.width() == doctest::Approx(0.0));
    for (const auto& p : s.points) {
        CHECK(p.alpha == doctest::Approx(0.7));
        CHECK(p.f == doctest::Approx(1.0));
    }

    // h = a - b q gives alpha = a - 2 b q and f = 1 - (a - alpha)^2 / (4 b).
    const double a = 0.8, b = 0.05;
    h.h.clear();
    for (double q : h.q) h.h.push_back(a - b * q);
    s = spectrum_from_h(h);
    // One-sided differences at the ends are exact too, h being linear.
    REQUIRE(s.points.size() == h.q.size());
    for (const auto& p : s.points) {
        CHECK(p.alpha == doctest::Approx(a - 2 * b * p.q).epsilon(1e-12));
        CHECK(p.f == doctest::Approx(1.0 - (a - p.alpha) * (a - p.alpha) / (4 * b)).epsilon(1e-12));
    }
    CHECK(std::is_sorted(s.points.begin(), s.points.end(),
                         [](const SpectrumPoint& x, const SpectrumPoint& y) { return x.alpha < y.alpha; }));
}

TEST_CASE("spectrum drops f > 1") {
    GeneralizedHurst h;
    h.q = {-1, 0, 1};
    h.h = {0.4, 0.5, 0.6};  // increasing h gives f > 1 away from q = 0
    const SingularitySpectrum s = spectrum_from_h(h);
    CHECK(s.points.size() == 1);
    CHECK(s.warnings.size() == 2);
    for (const auto& p : s.points) CHECK(p.f <= 1.0 + 1e-6);
}

TEST_CASE("trend invariance") {
    // A linear trend in x is a quadratic in the profile, removed by m = 2.
    const auto x = gen_fgn(1 << 14, 0.6, 3);
    std::vector<double> trended(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) trended[i] = x[i] + 4.0 - 2e-4 * static_cast<double>(i);
    const FluctuationSet a = fluctuation_set(x, {});
    const FluctuationSet b = fluctuation_set(trended, {});
    for (std::size_t iq = 0; iq < a.q.size(); ++iq) {
        for (std::size_t is = 0; is < a.scales.size(); ++is) {
            CHECK(b.values[iq][is] == doctest::Approx(a.values[iq][is]).epsilon(1e-6));
        }
    }
}

TEST_CASE("fGn oracle: h(2) = H") {
    for (double hurst : {0.3, 0.5, 0.7}) {
        for (std::uint64_t seed = 1; seed <= 10; ++seed) {
            const MfdfaResult r = run_mfdfa(gen_fgn(1 << 16, hurst, seed));
            CHECK(std::abs(r.hurst.at(2.0) - hurst) <= 0.05);
        }
    }
}

TEST_CASE("white noise oracle") {
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        const MfdfaResult r = run_mfdfa(white_noise(1 << 16, seed));
        CHECK(std::abs(r.hurst.at(2.0) - 0.5) <= 0.05);
        CHECK(r.hurst.r2_at(2.0) > 0.95);
    }
}

TEST_CASE("cascade oracle on the dyadic scale grid") {
    const double p = 0.6;
    const auto c = gen_binomial_cascade(16, p);
    MfdfaConfig cfg;
    cfg.scales = dyadic(16, c.size() / 4);
    const MfdfaResult r = run_mfdfa(c, cfg);
    for (double q : {-4.0, -2.0, 2.0, 4.0}) CHECK(std::abs(r.hurst.at(q) - cascade_hurst(q, p)) <= 0.05);
    CHECK(r.spectrum.max_f() == doctest::Approx(1.0).epsilon(0.05));
    for (const auto& pt : r.spectrum.points) CHECK(pt.f <= 1.0 + 1e-6);

    const MfdfaResult shuffled = run_mfdfa(shuffle(c, 1), cfg);
    CHECK(shuffled.spectrum.width() <= 0.5 * r.spectrum.width());
}

TEST_CASE("configuration errors") {
    const auto x = white_noise(1000, 1);
    MfdfaConfig cfg;
    cfg.scales = {16, 32, 500};
    CHECK_THROWS_AS(fluctuation_set(x, cfg), ConfigError);
    CHECK_THROWS_AS(run_mfdfa(std::vector<double>(10, 1.0)), DegenerateInputError);
    cfg.scales = {16, 20, 24, 28, 32};
    CHECK_THROWS_AS(run_mfdfa(x, cfg), AnalysisError);
}

#include "sawnoise/fft.hpp"
#include "sawnoise/noise_analysis.hpp"
#include "sawnoise/rng.hpp"
#include "sawnoise/tls_bath.hpp"
#include "test_support.hpp"

#include <doctest.h>

#include <cmath>
#include <stdexcept>

using namespace sawnoise;

namespace {

TimeTraceSet make_traces(std::vector<std::vector<double>> rows,
                         std::vector<double> freqs, double dt = 0.5)
{
    TimeTraceSet t;
    t.dt_s = dt;
    t.mode_frequencies = std::move(freqs);
    t.deviations = std::move(rows);
    return t;
}

std::vector<double> white(std::size_t n, double sigma, std::uint64_t seed)
{
    RngStream rng(seed, 1000);
    std::vector<double> v(n);
    for (auto& x : v) x = sigma * rng.normal();
    return v;
}

} // namespace

TEST_CASE("fft round trip and spike")
{
    std::vector<std::complex<double>> v(64);
    RngStream rng(3, 2);
    for (auto& x : v) x = {rng.normal(), rng.normal()};
    auto w = v;
    detail::fft(w);
    detail::fft(w, true);
    for (std::size_t i = 0; i < v.size(); ++i)
        CHECK(std::abs(w[i] - v[i]) < 1e-12);

    // Single tone lands in a single bin.
    std::vector<std::complex<double>> tone(128);
    for (std::size_t i = 0; i < tone.size(); ++i)
        tone[i] = std::cos(2.0 * M_PI * 5.0 * static_cast<double>(i) / 128.0);
    detail::fft(tone);
    CHECK(std::abs(tone[5]) == doctest::Approx(64.0).epsilon(1e-9));
    CHECK(std::abs(tone[6]) < 1e-9);

    CHECK(detail::is_power_of_two(64));
    CHECK_FALSE(detail::is_power_of_two(96));
}

TEST_CASE("correlation_matrix identities")
{
    const auto base = white(5000, 1.0, 10);
    auto neg = base;
    for (auto& v : neg) v = -v;

    SUBCASE("duplicate and negated traces")
    {
        const auto t = make_traces({base, base, neg}, {2.371e9, 2.373e9, 2.375e9});
        const auto c = correlation_matrix(t, {0, base.size()});
        CHECK(c.at(0, 1) == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(c.at(0, 2) == doctest::Approx(-1.0).epsilon(1e-12));
        CHECK(c.at(1, 0) == c.at(0, 1));
        for (std::size_t i = 0; i < 3; ++i) CHECK(c.at(i, i) == 1.0);
    }

    SUBCASE("independent white noise decorrelates")
    {
        std::vector<std::vector<double>> rows;
        std::vector<double> freqs;
        for (std::size_t k = 0; k < 14; ++k) {
            rows.push_back(white(100000, 1.0, 100 + k));
            freqs.push_back(2.371e9 + 2e6 * static_cast<double>(k));
        }
        const auto t = make_traces(std::move(rows), std::move(freqs));
        const auto c = correlation_matrix(t, {0, 100000});
        for (std::size_t i = 0; i < 14; ++i)
            for (std::size_t j = 0; j < 14; ++j)
                if (i != j) CHECK(std::abs(c.at(i, j)) < 0.02);

        // Sample correlation matrices are positive semidefinite.
        const auto ev = testsup::symmetric_eigenvalues(c.values, c.n_modes);
        CHECK(ev.front() > -1e-9);
        for (double v : c.values) {
            CHECK(v <= 1.0 + 1e-12);
            CHECK(v >= -1.0 - 1e-12);
        }
    }

    SUBCASE("scale invariance")
    {
        auto scaled = base;
        for (auto& v : scaled) v *= 1234.5;
        const auto t1 = make_traces({base, white(5000, 1.0, 11)}, {2.371e9, 2.373e9});
        auto t2 = t1;
        for (auto& v : t2.deviations[0]) v *= 1234.5;
        const auto c1 = correlation_matrix(t1, {0, 5000});
        const auto c2 = correlation_matrix(t2, {0, 5000});
        CHECK(c1.at(0, 1) == doctest::Approx(c2.at(0, 1)).epsilon(1e-12));
    }

    SUBCASE("zero variance names the mode")
    {
        const auto t = make_traces({base, std::vector<double>(5000, 3.0)},
                                   {2.371e9, 2.373e9});
        CHECK_THROWS_WITH_AS(correlation_matrix(t, {0, 5000}),
                             doctest::Contains("mode 2"), std::runtime_error);
    }

    SUBCASE("window validation")
    {
        const auto t = make_traces({base}, {2.371e9});
        CHECK_THROWS_AS(correlation_matrix(t, {0, 1}), std::invalid_argument);
        CHECK_THROWS_AS(correlation_matrix(t, {0, base.size() + 5}),
                        std::invalid_argument);
    }
}

TEST_CASE("correlation_vs_detuning")
{
    SUBCASE("two modes give one point")
    {
        const auto t = make_traces({white(2000, 1.0, 1), white(2000, 1.0, 2)},
                                   {2.371e9, 2.373e9});
        const auto c = correlation_matrix(t, {0, 2000});
        const auto curve = correlation_vs_detuning(c, 1e6);
        REQUIRE(curve.size() == 1);
        CHECK(curve[0].mean_detuning_hz == doctest::Approx(2e6));
        CHECK(curve[0].mean_correlation == doctest::Approx(c.at(0, 1)));
        CHECK(curve[0].n_pairs == 1);
    }

    SUBCASE("all-ones matrix gives a flat curve at 1")
    {
        CorrelationMatrix c;
        c.n_modes = 5;
        c.values.assign(25, 1.0);
        for (std::size_t k = 0; k < 5; ++k)
            c.mode_frequencies.push_back(2.371e9 + 2e6 * static_cast<double>(k));
        for (const auto& p : correlation_vs_detuning(c, 2e6))
            CHECK(p.mean_correlation == doctest::Approx(1.0));
    }
}

TEST_CASE("welch_psd calibration")
{
    const double dt = 0.5;

    SUBCASE("white level is 2 sigma^2 dt")
    {
        const double sigma = 3.0;
        const auto v = white(1 << 16, sigma, 42);
        const auto psd = welch_psd(v, dt, 1024, 0.5);
        CHECK(psd.n_segments >= 50);
        double mean = 0.0;
        for (double s : psd.psd_hz2_per_hz) mean += s;
        mean /= static_cast<double>(psd.psd_hz2_per_hz.size());
        CHECK(mean == doctest::Approx(2.0 * sigma * sigma * dt).epsilon(0.10));
    }

    SUBCASE("Parseval with rectangular window")
    {
        const auto v = white(1 << 15, 2.0, 7);
        const auto psd = welch_psd(v, dt, 1 << 15, 0.0, SpectralWindow::rectangular);
        const double df = psd.freq_hz[0];
        double integral = 0.0;
        for (double s : psd.psd_hz2_per_hz) integral += s * df;
        double mean = 0.0;
        for (double x : v) mean += x;
        mean /= static_cast<double>(v.size());
        double var = 0.0;
        for (double x : v) var += (x - mean) * (x - mean);
        var /= static_cast<double>(v.size());
        CHECK(integral == doctest::Approx(var).epsilon(0.05));
    }

    SUBCASE("on-bin sinusoid concentrates in one bin")
    {
        const std::size_t L = 4096;
        std::vector<double> v(L);
        const double f0 = 32.0 / (static_cast<double>(L) * dt);
        for (std::size_t i = 0; i < L; ++i)
            v[i] = std::sin(2.0 * M_PI * f0 * static_cast<double>(i) * dt);
        const auto psd = welch_psd(v, dt, L, 0.0, SpectralWindow::rectangular);
        std::size_t imax = 0;
        for (std::size_t i = 1; i < psd.psd_hz2_per_hz.size(); ++i)
            if (psd.psd_hz2_per_hz[i] > psd.psd_hz2_per_hz[imax]) imax = i;
        CHECK(psd.freq_hz[imax] == doctest::Approx(f0).epsilon(1e-12));
        CHECK(psd.psd_hz2_per_hz[imax] >
              1e6 * psd.psd_hz2_per_hz[(imax + 40) % psd.psd_hz2_per_hz.size()]);
    }

    SUBCASE("telegraph knee frequency")
    {
        const double gamma = 0.05;
        Fluctuator f;
        f.switching_rate = gamma;
        f.current_state = 1;
        f.rng_stream_id = kStreamFluctuatorBase + 77;
        const auto path = fluctuator_path(f, 321, 2e5, dt);
        std::vector<double> v(path.begin(), path.end());
        const auto psd = welch_psd(v, dt, 1 << 13, 0.5);
        // Average the plateau well below the knee, then find where the
        // spectrum first drops to half of it.
        const double knee_expect = 2.0 * gamma / (2.0 * M_PI);
        double plateau = 0.0;
        std::size_t n_pl = 0;
        for (std::size_t i = 0; i < psd.freq_hz.size(); ++i)
            if (psd.freq_hz[i] < knee_expect / 4.0) {
                plateau += psd.psd_hz2_per_hz[i];
                ++n_pl;
            }
        REQUIRE(n_pl > 3);
        plateau /= static_cast<double>(n_pl);
        // Smooth with a running geometric mean to tame chi-squared scatter.
        double knee = 0.0;
        for (std::size_t i = 4; i + 4 < psd.freq_hz.size(); ++i) {
            double g = 0.0;
            for (std::size_t j = i - 4; j <= i + 4; ++j)
                g += std::log(psd.psd_hz2_per_hz[j]);
            if (std::exp(g / 9.0) < plateau / 2.0) {
                knee = psd.freq_hz[i];
                break;
            }
        }
        REQUIRE(knee > 0.0);
        CHECK(knee == doctest::Approx(knee_expect).epsilon(0.20));
    }

    SUBCASE("scale equivariance: S_f scales by c^2")
    {
        const auto v = white(1 << 14, 1.0, 9);
        auto v2 = v;
        for (auto& x : v2) x *= 3.0;
        const auto p1 = welch_psd(v, dt, 1024, 0.5);
        const auto p2 = welch_psd(v2, dt, 1024, 0.5);
        for (std::size_t i = 0; i < p1.psd_hz2_per_hz.size(); ++i)
            CHECK(p2.psd_hz2_per_hz[i] ==
                  doctest::Approx(9.0 * p1.psd_hz2_per_hz[i]).epsilon(1e-9));
    }

    SUBCASE("validation")
    {
        const auto v = white(100, 1.0, 1);
        CHECK_THROWS_AS(welch_psd(v, dt, 128, 0.5), std::invalid_argument);
        CHECK_THROWS_AS(welch_psd(v, dt, 96, 0.5), std::invalid_argument);
        CHECK_THROWS_AS(welch_psd(v, dt, 64, 0.95), std::invalid_argument);
        CHECK_THROWS_AS(welch_psd(v, 0.0, 64, 0.5), std::invalid_argument);
    }
}

TEST_CASE("allan_deviation calibration")
{
    const double dt = 0.5;

    SUBCASE("constant trace has zero deviation")
    {
        std::vector<double> v(4000, 5.0);
        const std::vector<double> taus{0.5, 1.0, 8.0};
        const auto curve = allan_deviation(v, dt, taus);
        for (double s : curve.sigma_hz) CHECK(s == 0.0);
    }

    SUBCASE("white noise follows sqrt(h0 / 2 tau)")
    {
        const double sigma = 4.0;
        const double h0 = 2.0 * sigma * sigma * dt;
        const auto v = white(1 << 19, sigma, 33);
        const std::vector<double> taus{0.5, 1.0, 2.0, 4.0, 8.0, 16.0};
        const auto curve = allan_deviation(v, dt, taus);
        for (std::size_t i = 0; i < taus.size(); ++i)
            CHECK(curve.sigma_hz[i] ==
                  doctest::Approx(std::sqrt(h0 / (2.0 * taus[i]))).epsilon(0.05));
    }

    SUBCASE("sum-of-telegraphs 1/f noise plateaus at sqrt(2 ln 2 h_-1)")
    {
        // M telegraphs with rates log-uniform over [g_lo, g_hi] and
        // amplitude a give h_-1 = M a^2 / ln(g_hi / g_lo).
        const std::size_t M = 60;
        const double g_lo = 1e-3, g_hi = 1.0;
        const double target_h = 145.0;
        const double a =
            std::sqrt(target_h * std::log(g_hi / g_lo) / static_cast<double>(M));
        const std::size_t n = 1 << 17;
        const std::vector<double> taus{8, 16, 32, 64, 128};
        std::vector<double> var_sum(taus.size(), 0.0);
        const int n_real = 10;
        for (int real = 0; real < n_real; ++real) {
            std::vector<double> v(n, 0.0);
            const auto seed = static_cast<std::uint64_t>(8 + real);
            RngStream rates(seed, 555);
            for (std::size_t m = 0; m < M; ++m) {
                Fluctuator f;
                f.switching_rate = rates.log_uniform(g_lo, g_hi);
                f.current_state = rates.sign();
                f.rng_stream_id = kStreamFluctuatorBase + 9000 + m;
                const auto path =
                    fluctuator_path(f, seed, static_cast<double>(n) * dt, dt);
                for (std::size_t i = 0; i < n; ++i)
                    v[i] += a * static_cast<double>(path[i]);
            }
            const auto curve = allan_deviation(v, dt, taus);
            for (std::size_t i = 0; i < taus.size(); ++i)
                var_sum[i] += curve.sigma_hz[i] * curve.sigma_hz[i];
        }
        const double plateau = std::sqrt(2.0 * std::log(2.0) * target_h);  // 14.2
        for (std::size_t i = 0; i < taus.size(); ++i)
            CHECK(std::sqrt(var_sum[i] / n_real) ==
                  doctest::Approx(plateau).epsilon(0.15));
    }

    SUBCASE("scale equivariance: sigma scales by c")
    {
        const auto v = white(20000, 1.0, 3);
        auto v2 = v;
        for (auto& x : v2) x *= 7.0;
        const std::vector<double> taus{1.0, 4.0};
        const auto c1 = allan_deviation(v, dt, taus);
        const auto c2 = allan_deviation(v2, dt, taus);
        for (std::size_t i = 0; i < taus.size(); ++i)
            CHECK(c2.sigma_hz[i] == doctest::Approx(7.0 * c1.sigma_hz[i]).epsilon(1e-9));
    }

    SUBCASE("tau validation")
    {
        const auto v = white(1000, 1.0, 4);
        CHECK_THROWS_AS(allan_deviation(v, dt, std::vector<double>{0.7}),
                        std::invalid_argument);
        CHECK_THROWS_AS(allan_deviation(v, dt, std::vector<double>{400.0}),
                        std::invalid_argument);
    }
}

TEST_CASE("default_tau_grid")
{
    const auto taus = default_tau_grid(0.5, 8000.0, 30);
    REQUIRE(!taus.empty());
    CHECK(taus.front() == 0.5);
    CHECK(taus.back() <= 8000.0 + 1e-9);
    for (std::size_t i = 1; i < taus.size(); ++i) {
        CHECK(taus[i] > taus[i - 1]);
        const double r = taus[i] / 0.5;
        CHECK(std::abs(r - std::round(r)) < 1e-9);
    }
}

#include <doctest.h>

#include <cmath>
#include <numeric>

#include "transient/rng.hpp"
#include "transient/spad_sim.hpp"

using namespace transient;

namespace {

TransientHistogram make_hist(std::vector<double> flux) {
    TransientHistogram hist;
    hist.flux = std::move(flux);
    hist.bin_time_s = 130e-12;
    return hist;
}

}  // namespace

TEST_CASE("detection probabilities: zero flux, hand case, saturation") {
    const auto p_zero = detection_probabilities(make_hist(std::vector<double>(16, 0.0)));
    for (int i = 0; i < 16; ++i) CHECK(p_zero[i] == 0.0);
    CHECK(p_zero[16] == 1.0);

    // Hand evaluation: flux (ln 2, ln 2) -> q = (1/2, 1/2) -> p = (1/2, 1/4, 1/4).
    const auto p = detection_probabilities(make_hist({std::log(2.0), std::log(2.0)}));
    CHECK(p[0] == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(p[1] == doctest::Approx(0.25).epsilon(1e-15));
    CHECK(p[2] == doctest::Approx(0.25).epsilon(1e-15));

    const auto p_sat = detection_probabilities(make_hist({60.0, 1.0}));
    CHECK(p_sat[0] > 1.0 - 1e-20);
    CHECK(p_sat[1] < 1e-20);
}

TEST_CASE("detection probabilities sum to one for random histograms") {
    SplitMix64 rng_state{123};  // reuse the library generator via raw state
    for (int draw = 0; draw < 20; ++draw) {
        std::vector<double> flux(64);
        for (double& v : flux) v = 0.2 * rng_state.uniform();
        const auto p = detection_probabilities(make_hist(flux));
        const double sum = std::accumulate(p.begin(), p.end(), 0.0);
        CHECK(std::abs(sum - 1.0) < 1e-12);
        for (double v : p) CHECK(v >= 0.0);
    }
}

TEST_CASE("pile-up monotonicity: raising the first bin starves later bins") {
    const auto base = detection_probabilities(make_hist({0.1, 0.2, 0.3, 0.05}));
    const auto piled = detection_probabilities(make_hist({0.8, 0.2, 0.3, 0.05}));
    for (int i = 1; i < 4; ++i) CHECK(piled[i] <= base[i]);
}

TEST_CASE("constant flux gives the geometric pile-up decay") {
    const auto p = detection_probabilities(make_hist(std::vector<double>(100, 0.25)));
    for (int i = 1; i < 100; ++i) CHECK(p[i] < p[i - 1]);
    // p_i = q (1-q)^(i-1) exactly.
    const double q = 1.0 - std::exp(-0.25);
    CHECK(p[40] == doctest::Approx(q * std::pow(1.0 - q, 40)).epsilon(1e-9));
}

TEST_CASE("synchronous simulation: zero flux, reproducibility, count conservation") {
    const auto zero = simulate_synchronous_spad(make_hist(std::vector<double>(32, 0.0)), 500, 9);
    for (int i = 0; i < 32; ++i) CHECK(zero.counts[i] == 0);
    CHECK(zero.counts[32] == 500);

    const auto hist = make_hist({0.5, 0.1, 0.3, 0.0, 0.2});
    const auto a = simulate_synchronous_spad(hist, 10000, 42);
    const auto b = simulate_synchronous_spad(hist, 10000, 42);
    const auto c = simulate_synchronous_spad(hist, 10000, 43);
    CHECK(a.counts == b.counts);
    CHECK(a.counts != c.counts);
    CHECK(std::accumulate(a.counts.begin(), a.counts.end(), std::int64_t{0}) == 10000);
    CHECK(a.mode == SpadMode::synchronous);
    CHECK_THROWS_AS(simulate_synchronous_spad(hist, 0, 1), validation_error);
}

TEST_CASE("synchronous frequencies converge to the analytic probabilities") {
    std::vector<double> flux(512, 0.0);
    for (int i = 100; i < 120; ++i) flux[i] = 0.05;
    for (int i = 300; i < 340; ++i) flux[i] = 0.01;
    const auto hist = make_hist(flux);
    const auto p = detection_probabilities(hist);
    const std::int64_t cycles = 200000;
    const auto spad = simulate_synchronous_spad(hist, cycles, 2024);
    double max_dev = 0.0;
    for (size_t i = 0; i < p.size(); ++i) {
        const double freq = static_cast<double>(spad.counts[i]) / cycles;
        max_dev = std::max(max_dev, std::abs(freq - p[i]));
    }
    CHECK(max_dev < 5.0 / std::sqrt(static_cast<double>(cycles)));
}

TEST_CASE("asynchronous simulation: zero flux and dead-time mechanics") {
    const auto zero = simulate_asynchronous_spad(make_hist(std::vector<double>(32, 0.0)), 100, 4, 1);
    for (auto c : zero.counts) CHECK(c == 0);
    CHECK(zero.mode == SpadMode::asynchronous);
    CHECK(static_cast<int>(zero.counts.size()) == 32);

    // Saturating flux detects at every live bin: detections at t = 0, D, 2D, ...
    // With N=8, L=3, D=3 the 8 detections cover each phase exactly once.
    const auto sat = simulate_asynchronous_spad(make_hist(std::vector<double>(8, 1e9)), 3, 3, 7);
    for (auto c : sat.counts) CHECK(c == 1);

    CHECK_THROWS_AS(simulate_asynchronous_spad(make_hist({0.1}), 10, 0, 1), validation_error);
}

TEST_CASE("asynchronous D=1 low-flux counts are unbiased") {
    std::vector<double> flux(256, 0.0);
    for (int i = 60; i < 70; ++i) flux[i] = 0.004;
    const auto hist = make_hist(flux);
    const std::int64_t cycles = 400000;
    const auto spad = simulate_asynchronous_spad(hist, cycles, 1, 31);
    const auto estimate = estimate_transient_lowflux(spad);
    for (int i = 60; i < 70; ++i) {
        const double bound = 3.0 * std::sqrt(flux[i] / static_cast<double>(cycles));
        CHECK(std::abs(estimate.flux[i] - flux[i]) < bound);
    }
}

TEST_CASE("low-flux estimator recovers a weak transient from synchronous counts") {
    std::vector<double> flux(512, 5e-5);
    flux[39] = 0.02;
    const auto hist = make_hist(flux);
    const std::int64_t cycles = 1000000;
    const auto spad = simulate_synchronous_spad(hist, cycles, 77);
    const auto estimate = estimate_transient_lowflux(spad);
    CHECK(std::abs(estimate.flux[39] - flux[39]) / flux[39] < 0.03);

    const auto zero = estimate_transient_lowflux(
        simulate_synchronous_spad(make_hist(std::vector<double>(8, 0.0)), 10, 1));
    for (double v : zero.flux) CHECK(v == 0.0);
}

TEST_CASE("Coates correction is the analytic inverse of the detection model") {
    // Start from integer counts, recover flux, and check the expected counts
    // reproduce the input exactly.
    SpadHistogram spad;
    spad.mode = SpadMode::synchronous;
    spad.cycles = 1024;
    spad.counts = {256, 192, 144, 0, 108, 0, 0, 81, 0, 0};
    spad.counts.push_back(1024 - 781);  // empty cycles
    spad.bin_time_s = 130e-12;
    const auto flux = correct_pileup_coates(spad);
    const auto p = detection_probabilities(flux);
    for (size_t i = 0; i < spad.counts.size(); ++i) {
        CHECK(static_cast<double>(spad.cycles) * p[i] ==
              doctest::Approx(static_cast<double>(spad.counts[i])).epsilon(1e-9));
    }
}

TEST_CASE("Coates correction: zero counts, saturation, and mode errors") {
    SpadHistogram spad;
    spad.mode = SpadMode::synchronous;
    spad.cycles = 100;
    spad.counts = {0, 0, 0, 100};
    spad.bin_time_s = 130e-12;
    const auto zero = correct_pileup_coates(spad);
    for (double v : zero.flux) CHECK(v == 0.0);

    spad.counts = {0, 100, 0, 0};  // bin 2 eats every remaining cycle
    CHECK_THROWS_AS(correct_pileup_coates(spad), numeric_error);
    try {
        correct_pileup_coates(spad);
    } catch (const numeric_error& e) {
        CHECK(std::string(e.what()).find("bin 2") != std::string::npos);
    }

    spad.mode = SpadMode::asynchronous;
    spad.counts = {10, 5, 2, 1};
    CHECK_THROWS_AS(correct_pileup_coates(spad), validation_error);
}

TEST_CASE("Coates correction fixes pile-up that the low-flux estimator misses") {
    std::vector<double> flux(512, 0.0);
    for (int i = 0; i < 20; ++i) flux[i] = 0.1;  // total 2 photons per cycle
    const auto hist = make_hist(flux);
    const std::int64_t cycles = 200000;
    const auto spad = simulate_synchronous_spad(hist, cycles, 5150);
    const auto corrected = correct_pileup_coates(spad);
    const auto naive = estimate_transient_lowflux(spad);
    for (int i = 0; i < 20; ++i)
        CHECK(std::abs(corrected.flux[i] - flux[i]) / flux[i] < 0.05);
    // Uncorrected late bins are starved by early detections.
    CHECK(std::abs(naive.flux[19] - flux[19]) / flux[19] > 0.2);
}

#include <doctest.h>

#include <cmath>
#include <vector>

#include "chirpsound/channel.hpp"
#include "chirpsound/error.hpp"
#include "chirpsound/estimator.hpp"

using namespace chirpsound;

namespace {

ScenarioConfig single_link(int L, int N = 64)
{
    ScenarioConfig cfg;
    cfg.tx_nodes = {0};
    cfg.rx_nodes = {0};
    cfg.L = L;
    cfg.active_taps = {L};
    cfg.offsets = {0};
    cfg.N = N;
    cfg.p = {1};
    cfg.snr_db = {25.0};
    return cfg;
}

MimoScenario scenario_with_taps(const ScenarioConfig& cfg, std::vector<CVector> taps)
{
    RandomStream rng(1, 0, StreamId::channel_taps);
    MimoScenario s = synthesize_channels(cfg, rng);
    for (std::size_t k = 0; k < taps.size(); ++k) {
        s.links[k].taps = taps[k];
    }
    return s;
}

double sup_norm(const CVector& v)
{
    return v.cwiseAbs().maxCoeff();
}

}  // namespace

TEST_CASE("synthesize_channels on the two-user scenario")
{
    const ScenarioConfig cfg = preset("paper-sec5");
    RandomStream rng(cfg.seed, 0, StreamId::channel_taps);
    const MimoScenario s = synthesize_channels(cfg, rng);
    REQUIRE(s.links.size() == 9);
    CHECK(s.mt == 2);
    CHECK(s.mr == 3);
    for (int i = 0; i < 3; ++i) {
        for (int m = 0; m < 3; ++m) {
            const LinkChannel& link = s.link(i, m);
            CHECK(link.length() == 15);
            CHECK(link.d == (i == 0 ? 0 : 5));
            CHECK(link.active == 10);
            for (int l = 0; l < link.d; ++l) {
                CHECK(link.taps[l] == cplx{});
            }
            for (int l = link.d; l < link.d + 10; ++l) {
                CHECK(link.taps[l] != cplx{});
            }
            for (int l = link.d + 10; l < 15; ++l) {
                CHECK(link.taps[l] == cplx{});
            }
            CHECK(link.taps.squaredNorm() == doctest::Approx(1.0));
            CHECK(link.mu == 0.0);
        }
    }

    SUBCASE("fixed seed reproduces the scenario")
    {
        RandomStream again(cfg.seed, 0, StreamId::channel_taps);
        const MimoScenario t = synthesize_channels(cfg, again);
        for (std::size_t k = 0; k < s.links.size(); ++k) {
            CHECK(s.links[k].taps == t.links[k].taps);
        }
    }
}

TEST_CASE("synthesize_channels edge cases")
{
    SUBCASE("no active taps gives an all-zero link")
    {
        ScenarioConfig cfg = single_link(5);
        cfg.active_taps = {0};
        RandomStream rng(3, 0, StreamId::channel_taps);
        CHECK(synthesize_channels(cfg, rng).link(0, 0).taps.isZero(0.0));
    }
    SUBCASE("unnormalized taps keep the raw draw")
    {
        ScenarioConfig cfg = single_link(8);
        cfg.normalize_taps = false;
        RandomStream rng(3, 0, StreamId::channel_taps);
        CHECK(synthesize_channels(cfg, rng).link(0, 0).taps.squaredNorm() != doctest::Approx(1.0));
    }
    SUBCASE("inconsistent configs list every violation")
    {
        ScenarioConfig cfg = preset("paper-sec5");
        cfg.offsets[1] = 12;  // 10 + 12 > 15
        cfg.offsets[4] = 4;   // tx node 1 -> rx node 1 disagrees with link (2,1)
        RandomStream rng(3, 0, StreamId::channel_taps);
        CHECK_THROWS_WITH_AS(synthesize_channels(cfg, rng), doctest::Contains("exceeds L = 15"), ValidationError);
        cfg.offsets[1] = 0;
        CHECK_THROWS_WITH_AS(synthesize_channels(cfg, rng), doctest::Contains("offset differs"), ValidationError);
    }
    SUBCASE("node pairs share one fractional offset")
    {
        ScenarioConfig cfg = preset("paper-sec5-fractional");
        RandomStream rng(5, 0, StreamId::channel_taps);
        const MimoScenario s = synthesize_channels(cfg, rng);
        for (int m = 0; m < 3; ++m) {
            CHECK(s.link(1, m).mu == s.link(2, m).mu);
            CHECK(s.link(0, m).mu > 0.0);
            CHECK(s.link(0, m).mu <= 0.5);
        }
        CHECK(s.link(0, 0).mu != s.link(1, 0).mu);
    }
}

TEST_CASE("receive_integer noiseless structure")
{
    const ScenarioConfig cfg = single_link(6);
    const std::vector<SoundingWaveform> w{generate_chirp(1, 64)};

    SUBCASE("identity channel returns the waveform")
    {
        CVector h = CVector::Zero(6);
        h[0] = 1.0;
        const auto s = scenario_with_taps(cfg, {h});
        RandomStream rng(1, 0, StreamId::noise);
        const auto r = receive_integer(s, w, rng);
        CHECK((r[0] - w[0].samples).norm() < 1e-15);
    }
    SUBCASE("pure delay is a cyclic shift")
    {
        CVector h = CVector::Zero(6);
        h[5] = 1.0;
        const auto s = scenario_with_taps(cfg, {h});
        const auto r = noiseless_integer(s, w);
        for (int n = 0; n < 64; ++n) {
            CHECK(std::abs(r[0][n] - w[0].samples[(n - 5 + 64) % 64]) < 1e-15);
        }
    }
    SUBCASE("linearity in the taps")
    {
        RandomStream draw(9, 0, 77u);
        CVector h1(6), h2(6);
        for (int l = 0; l < 6; ++l) {
            h1[l] = draw.complex_normal(0.5);
            h2[l] = draw.complex_normal(0.5);
        }
        const auto r1 = noiseless_integer(scenario_with_taps(cfg, {h1}), w);
        const auto r2 = noiseless_integer(scenario_with_taps(cfg, {h2}), w);
        const auto r12 = noiseless_integer(scenario_with_taps(cfg, {CVector(h1 + h2)}), w);
        CHECK(sup_norm(r12[0] - r1[0] - r2[0]) < 1e-12);
    }
    SUBCASE("matches the Toeplitz matrix form")
    {
        RandomStream draw(4, 0, 77u);
        CVector h(6);
        for (int l = 0; l < 6; ++l) {
            h[l] = draw.complex_normal(0.5);
        }
        const auto r = noiseless_integer(scenario_with_taps(cfg, {h}), w);
        const SoundingMatrix S = build_sounding_matrix(w[0], 6, SoundingKind::integer);
        CHECK(sup_norm(r[0] - S.entries * h) < 1e-14);
    }
    SUBCASE("waveform count must match Nt")
    {
        const auto s = scenario_with_taps(cfg, {CVector::Zero(6)});
        const std::vector<SoundingWaveform> two{generate_chirp(1, 64), generate_chirp(2, 64)};
        RandomStream rng(1, 0, StreamId::noise);
        CHECK_THROWS_AS(receive_integer(s, two, rng), DimensionError);
        CHECK_THROWS_AS(receive_integer(s, {}, rng), DimensionError);
    }
}

TEST_CASE("noise calibration")
{
    ScenarioConfig cfg = single_link(4, 128);
    cfg.active_taps = {0};
    const std::vector<SoundingWaveform> w{generate_chirp(1, 128)};
    RandomStream chan(1, 0, StreamId::channel_taps);
    MimoScenario s = synthesize_channels(cfg, chan);
    s.noise_var = {0.3};

    double power = 0.0;
    long count = 0;
    for (int trial = 0; trial < 800; ++trial) {
        RandomStream rng(11, trial, StreamId::noise);
        const auto r = receive_integer(s, w, rng);
        power += r[0].squaredNorm();
        count += r[0].size();
    }
    REQUIRE(count >= 100000);
    CHECK(power / count == doctest::Approx(2.0 * 0.3).epsilon(0.02));
}

TEST_CASE("calibrate_noise follows the SNR convention")
{
    const ScenarioConfig cfg = preset("paper-sec5");
    std::vector<SoundingWaveform> w;
    for (int p : cfg.p) {
        w.push_back(generate_chirp(p, cfg.N));
    }
    RandomStream rng(cfg.seed, 0, StreamId::channel_taps);
    MimoScenario s = synthesize_channels(cfg, rng);
    calibrate_noise(s, w, cfg.snr_db);
    const auto clean = noiseless_integer(s, w);
    for (int m = 0; m < 3; ++m) {
        const double power = clean[m].squaredNorm() / 128.0;
        CHECK(s.noise_var[m] == doctest::Approx(power / (2.0 * std::pow(10.0, 2.5))));
    }
    CHECK(snr_to_noise_var(1.0, 25.0) == doctest::Approx(std::pow(10.0, -2.5) / 2.0));
    CHECK(snr_to_noise_var(1.0, INFINITY) == 0.0);
}

TEST_CASE("receive_fractional")
{
    const auto pulse = build_pulse(PulseKind::raised_cosine, 0.25, 4);
    const std::vector<SoundingWaveform> w{generate_chirp(1, 64)};
    ScenarioConfig cfg = single_link(5);

    SUBCASE("single unit tap at mu = 1/2 evaluates the pulse directly")
    {
        CVector h = CVector::Zero(5);
        h[0] = 1.0;
        MimoScenario s = scenario_with_taps(cfg, {h});
        s.link(0, 0).mu = 0.5;
        const auto r = noiseless_fractional(s, w, pulse);
        for (int n = 0; n < 64; ++n) {
            cplx expected{};
            for (int y = -64; y <= 64; ++y) {
                expected += w[0].samples[((n - y) % 64 + 64) % 64] * pulse(y + 0.5);
            }
            CHECK(std::abs(r[0][n] - expected) < 1e-13);
        }
    }
    SUBCASE("tiny mu converges to the integer model")
    {
        RandomStream draw(2, 0, 77u);
        CVector h(5);
        for (int l = 0; l < 5; ++l) {
            h[l] = draw.complex_normal(0.5);
        }
        MimoScenario s = scenario_with_taps(cfg, {h});
        s.link(0, 0).mu = 1e-6;
        const auto frac = noiseless_fractional(s, w, pulse);
        const auto integer = noiseless_integer(s, w);
        CHECK(sup_norm(frac[0] - integer[0]) < 1e-4);
        s.link(0, 0).mu = 0.0;
        CHECK(sup_norm(noiseless_fractional(s, w, pulse)[0] - integer[0]) < 1e-12);
    }
    SUBCASE("matches the S^F G(mu) h matrix form")
    {
        RandomStream draw(6, 0, 77u);
        CVector h(5);
        for (int l = 0; l < 5; ++l) {
            h[l] = draw.complex_normal(0.5);
        }
        MimoScenario s = scenario_with_taps(cfg, {h});
        s.link(0, 0).mu = 0.37;
        const auto r = noiseless_fractional(s, w, pulse);
        const SoundingMatrix SF = build_sounding_matrix(w[0], 5, SoundingKind::fractional, 4);
        const RMatrix G = build_shaping_matrix(pulse, 0.37, 5, 4);
        CHECK(sup_norm(r[0] - SF.entries * (G.cast<cplx>() * h)) < 1e-13);
    }
    SUBCASE("fixed seed reproducibility")
    {
        ScenarioConfig fcfg = preset("paper-sec5-fractional");
        std::vector<SoundingWaveform> ws;
        for (int p : fcfg.p) {
            ws.push_back(generate_chirp(p, fcfg.N));
        }
        RandomStream c1(fcfg.seed, 0, StreamId::channel_taps);
        MimoScenario s = synthesize_channels(fcfg, c1);
        calibrate_noise(s, ws, fcfg.snr_db);
        RandomStream n1(fcfg.seed, 3, StreamId::noise);
        RandomStream n2(fcfg.seed, 3, StreamId::noise);
        const auto a = receive_fractional(s, ws, pulse, n1);
        const auto b = receive_fractional(s, ws, pulse, n2);
        for (int m = 0; m < 3; ++m) {
            CHECK(a[m] == b[m]);
        }
    }
}
